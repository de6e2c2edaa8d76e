#include "plucker_rig/toylab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "plucker_rig/error.hpp"
#include "plucker_rig/transforms.hpp"

namespace plucker::toy {

std::string_view to_string(Conditioning c) {
  switch (c) {
    case Conditioning::kNone: return "none";
    case Conditioning::kToken: return "token";
    case Conditioning::kEarly: return "early";
    case Conditioning::kLate: return "late";
  }
  return "unknown";
}

Conditioning parse_conditioning(std::string_view name) {
  for (Conditioning c :
       {Conditioning::kNone, Conditioning::kToken, Conditioning::kEarly, Conditioning::kLate}) {
    if (name == to_string(c)) return c;
  }
  throw Error(ErrorCode::kSchemaError, "unknown variant '" + std::string(name) + "'");
}

ToyTaskConfig ToyTaskConfig::fixed_cameras() {
  ToyTaskConfig cfg;
  for (int i = 0; i < 2; ++i) {
    PoseSamplerConfig& cam = cfg.cameras[i];
    const double azimuth = i == 0 ? -45.0 : 45.0;
    cam.azimuth_deg = {azimuth, azimuth};
    cam.elevation_deg = {45.0, 45.0};
    cam.radius_m = {1.0, 1.0};
    cam.target_box = {Vec3::Zero(), Vec3::Zero()};
  }
  cfg.crop_fraction = 1.0;
  return cfg;
}

ToyDataset make_dataset(Rng& rng, const ToyTaskConfig& cfg, std::size_t count) {
  const Intrinsics& full = cfg.intrinsics;
  if (!(cfg.crop_fraction > 0.0 && cfg.crop_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidSamplerConfig, "crop_fraction must be in (0, 1]");
  }
  const auto [crop_h, crop_w] = crop_size_for_fraction(full.height(), full.width(), cfg.crop_fraction);
  const bool cropping = crop_h < full.height() || crop_w < full.width();
  ToyDataset data;
  data.reserve(count);
  std::uint64_t rejected = 0;
  while (data.size() < count) {
    std::array<CameraPose, 2> poses{sample_lookat_pose(rng, cfg.cameras[0]),
                                    sample_lookat_pose(rng, cfg.cameras[1])};
    std::array<Intrinsics, 2> views{full, full};
    if (cropping) {
      for (Intrinsics& k : views) {
        k = crop_intrinsics(full, sample_crop(rng, full.height(), full.width(), crop_h, crop_w));
      }
    }
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = rng.uniform(cfg.workspace.min[k], cfg.workspace.max[k]);

    ToySample sample;
    bool visible = true;
    for (int c = 0; c < 2 && visible; ++c) {
      const Intrinsics& k = views[c];
      const double depth = (poses[c].rotation() * p + poses[c].translation()).z();
      const Vec2 px = project(k, poses[c], p);
      visible = depth > 0.0 && px.x() >= 0.0 && px.x() < k.width() && px.y() >= 0.0 &&
                px.y() < k.height();
      sample.pixel[c] = px;
    }
    if (!visible) {
      if (++rejected > cfg.max_resamples) {
        throw Error(ErrorCode::kRejectionOverflow,
                    "more than " + std::to_string(cfg.max_resamples) +
                        " rejected draws; workspace does not fit the camera frustums");
      }
      continue;
    }
    for (int c = 0; c < 2; ++c) {
      const Intrinsics& k = views[c];
      sample.observation[c] = Vec2(sample.pixel[c].x() / k.width(), sample.pixel[c].y() / k.height());
      sample.rays[c] = pixel_ray(k, poses[c], sample.pixel[c].x(), sample.pixel[c].y());
      sample.extrinsics[c].leftCols<3>() = poses[c].rotation();
      sample.extrinsics[c].col(3) = poses[c].translation();
    }
    sample.label = p;
    data.push_back(sample);
  }
  return data;
}

namespace {

int conditioning_dim(Conditioning variant) {
  switch (variant) {
    case Conditioning::kNone: return 0;
    case Conditioning::kToken: return kTokenInputDim;
    case Conditioning::kEarly:
    case Conditioning::kLate: return kRayInputDim;
  }
  return 0;
}

}  // namespace

Batch make_batch(const ToyDataset& data, Conditioning variant) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Batch batch{Eigen::MatrixXd(kObservationDim, n), Eigen::MatrixXd(conditioning_dim(variant), n),
              Eigen::MatrixXd(3, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const ToySample& s = data[i];
    batch.observation.col(i) << s.observation[0], s.observation[1];
    batch.label.col(i) = s.label;
    switch (variant) {
      case Conditioning::kNone: break;
      case Conditioning::kToken:
        for (int c = 0; c < 2; ++c) {
          for (int r = 0; r < 3; ++r) {
            for (int k = 0; k < 4; ++k) batch.conditioning(c * 12 + r * 4 + k, i) = s.extrinsics[c](r, k);
          }
        }
        break;
      case Conditioning::kEarly:
      case Conditioning::kLate:
        for (int c = 0; c < 2; ++c) {
          batch.conditioning.block<3, 1>(c * 6, i) = s.rays[c].direction;
          batch.conditioning.block<3, 1>(c * 6 + 3, i) = s.rays[c].moment;
        }
        break;
    }
  }
  return batch;
}

Batch select_columns(const Batch& batch, std::span<const std::size_t> columns) {
  const auto n = static_cast<Eigen::Index>(columns.size());
  Batch out{Eigen::MatrixXd(batch.observation.rows(), n),
            Eigen::MatrixXd(batch.conditioning.rows(), n), Eigen::MatrixXd(3, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(columns[i]);
    out.observation.col(i) = batch.observation.col(c);
    if (out.conditioning.rows() > 0) out.conditioning.col(i) = batch.conditioning.col(c);
    out.label.col(i) = batch.label.col(c);
  }
  return out;
}

namespace {

void fit_rows(const Eigen::MatrixXd& x, Eigen::VectorXd& mean, Eigen::VectorXd& inv_std) {
  const auto n = std::max<Eigen::Index>(x.cols(), 1);
  mean = x.rowwise().sum() / static_cast<double>(n);
  inv_std.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double var = (x.row(r).array() - mean[r]).square().sum() / static_cast<double>(n);
    // Constant features (fixed cameras) stay unscaled.
    inv_std[r] = var > 1e-18 ? 1.0 / std::sqrt(var) : 1.0;
  }
}

}  // namespace

Standardizer fit_standardizer(const Batch& train) {
  Standardizer s;
  fit_rows(train.observation, s.observation_mean, s.observation_inv_std);
  fit_rows(train.conditioning, s.conditioning_mean, s.conditioning_inv_std);
  const auto n = std::max<Eigen::Index>(train.label.cols(), 1);
  s.label_mean = train.label.rowwise().sum() / static_cast<double>(n);
  const double var =
      (train.label.colwise() - s.label_mean).squaredNorm() / (3.0 * static_cast<double>(n));
  s.label_scale = var > 1e-18 ? std::sqrt(var) : 1.0;
  return s;
}

namespace {

Dense glorot(int in, int out, bool tanh, Rng& rng) {
  Dense layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out), tanh};
  const double limit = std::sqrt(6.0 / (in + out));
  for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = rng.uniform(-limit, limit);
  }
  return layer;
}

Dense zero_dense(int in, int out, bool tanh) {
  return {Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out), tanh};
}

// Layer shapes (in, out, tanh) for a variant.
struct Shapes {
  std::vector<std::tuple<int, int, bool>> branch, trunk;
};

Shapes shapes_for(Conditioning variant, const ToyModelConfig& cfg) {
  Shapes s;
  int trunk_in = kObservationDim;
  switch (variant) {
    case Conditioning::kNone: break;
    case Conditioning::kToken:
      s.branch.emplace_back(kTokenInputDim, cfg.token_dim, false);
      trunk_in += cfg.token_dim;
      break;
    case Conditioning::kEarly: trunk_in += kRayInputDim; break;
    case Conditioning::kLate: {
      int in = kRayInputDim;
      for (int l = 0; l < cfg.late_hidden_layers; ++l) {
        s.branch.emplace_back(in, cfg.late_hidden_units, true);
        in = cfg.late_hidden_units;
      }
      s.branch.emplace_back(in, cfg.late_latent_dim, false);
      trunk_in += cfg.late_latent_dim;
      break;
    }
  }
  int in = trunk_in;
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    s.trunk.emplace_back(in, cfg.hidden_units, true);
    in = cfg.hidden_units;
  }
  s.trunk.emplace_back(in, 3, false);
  return s;
}

Eigen::MatrixXd forward(const std::vector<Dense>& layers, const Eigen::MatrixXd& input,
                        std::vector<Eigen::MatrixXd>* activations) {
  Eigen::MatrixXd x = input;
  if (activations) activations->assign(1, input);
  for (const Dense& layer : layers) {
    Eigen::MatrixXd z = layer.weight * x;
    z.colwise() += layer.bias;
    if (layer.tanh) z = z.array().tanh().matrix();
    x = std::move(z);
    if (activations) activations->push_back(x);
  }
  return x;
}

// Accumulates parameter gradients into `grads`; returns d loss / d input.
Eigen::MatrixXd backward(const std::vector<Dense>& layers,
                         const std::vector<Eigen::MatrixXd>& activations, Eigen::MatrixXd grad_out,
                         std::vector<Dense>& grads) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Dense& layer = layers[l];
    if (layer.tanh) {
      grad_out = (grad_out.array() * (1.0 - activations[l + 1].array().square())).matrix();
    }
    grads[l].weight.noalias() += grad_out * activations[l].transpose();
    grads[l].bias += grad_out.rowwise().sum();
    grad_out = layer.weight.transpose() * grad_out;
  }
  return grad_out;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& mean,
                            const Eigen::VectorXd& inv_std) {
  // An unfitted standardizer (empty vectors) is the identity.
  if (x.rows() == 0 || mean.size() == 0) return x;
  if (mean.size() != x.rows() || inv_std.size() != x.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "standardizer does not match the feature width");
  }
  return ((x.colwise() - mean).array().colwise() * inv_std.array()).matrix();
}

}  // namespace

ToyModel::ToyModel(Conditioning variant, std::vector<Dense> branch, std::vector<Dense> trunk)
    : variant_(variant), branch_(std::move(branch)), trunk_(std::move(trunk)) {}

ToyModel::ToyModel(Conditioning variant, const ToyModelConfig& cfg, Rng& init_rng)
    : variant_(variant) {
  const Shapes s = shapes_for(variant, cfg);
  for (const auto& [in, out, tanh] : s.branch) branch_.push_back(glorot(in, out, tanh, init_rng));
  for (const auto& [in, out, tanh] : s.trunk) trunk_.push_back(glorot(in, out, tanh, init_rng));
}

ToyModel ToyModel::zeros(Conditioning variant, const ToyModelConfig& cfg) {
  const Shapes s = shapes_for(variant, cfg);
  std::vector<Dense> branch, trunk;
  for (const auto& [in, out, tanh] : s.branch) branch.push_back(zero_dense(in, out, tanh));
  for (const auto& [in, out, tanh] : s.trunk) trunk.push_back(zero_dense(in, out, tanh));
  return ToyModel(variant, std::move(branch), std::move(trunk));
}

ToyModel ToyModel::zeros_like() const {
  ToyModel out = *this;
  for (auto span : out.parameters()) std::fill(span.begin(), span.end(), 0.0);
  return out;
}

std::vector<std::span<double>> ToyModel::parameters() {
  std::vector<std::span<double>> out;
  for (auto* layers : {&branch_, &trunk_}) {
    for (Dense& layer : *layers) {
      out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
      out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    }
  }
  return out;
}

std::size_t ToyModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* layers : {&branch_, &trunk_}) {
    for (const Dense& layer : *layers) n += layer.weight.size() + layer.bias.size();
  }
  return n;
}

bool ToyModel::all_finite() const {
  for (const auto* layers : {&branch_, &trunk_}) {
    for (const Dense& layer : *layers) {
      if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
    }
  }
  return true;
}

Eigen::MatrixXd ToyModel::trunk_input(const Eigen::MatrixXd& obs,
                                      const Eigen::MatrixXd& branch_out) const {
  if (branch_out.rows() == 0) return obs;
  Eigen::MatrixXd in(obs.rows() + branch_out.rows(), obs.cols());
  in << obs, branch_out;
  return in;
}

Eigen::MatrixXd ToyModel::predict(const Batch& batch) const {
  const Standardizer& s = standardizer_;
  const auto obs = standardize(batch.observation, s.observation_mean, s.observation_inv_std);
  const auto cond = standardize(batch.conditioning, s.conditioning_mean, s.conditioning_inv_std);
  const Eigen::MatrixXd side = branch_.empty() ? cond : forward(branch_, cond, nullptr);
  const Eigen::MatrixXd out = forward(trunk_, trunk_input(obs, side), nullptr);
  return (out * s.label_scale).colwise() + s.label_mean;
}

double ToyModel::loss(const Batch& batch, ToyModel* grad) const {
  const Standardizer& s = standardizer_;
  const auto obs = standardize(batch.observation, s.observation_mean, s.observation_inv_std);
  const auto cond = standardize(batch.conditioning, s.conditioning_mean, s.conditioning_inv_std);
  const Eigen::MatrixXd target = (batch.label.colwise() - s.label_mean) / s.label_scale;

  std::vector<Eigen::MatrixXd> branch_acts, trunk_acts;
  const Eigen::MatrixXd side = branch_.empty() ? cond : forward(branch_, cond, &branch_acts);
  const Eigen::MatrixXd out = forward(trunk_, trunk_input(obs, side), &trunk_acts);

  const double n = static_cast<double>(std::max<Eigen::Index>(batch.label.cols(), 1));
  const Eigen::MatrixXd residual = out - target;
  const double value = residual.squaredNorm() / n;
  if (grad) {
    const Eigen::MatrixXd d_in = backward(trunk_, trunk_acts, (2.0 / n) * residual, grad->trunk_);
    if (!branch_.empty()) {
      backward(branch_, branch_acts, d_in.bottomRows(d_in.rows() - kObservationDim), grad->branch_);
    }
  }
  return value;
}

GradientCheckResult gradient_check(const ToyModel& model, const Batch& batch, Rng& rng,
                                   int per_layer, double step) {
  ToyModel grad = model.zeros_like();
  model.loss(batch, &grad);
  ToyModel probe = model;
  auto params = probe.parameters();
  const auto grads = grad.parameters();

  GradientCheckResult result;
  auto check = [&](std::size_t block, std::size_t index) {
    double& x = params[block][index];
    const double original = x;
    x = original + step;
    const double plus = probe.loss(batch);
    x = original - step;
    const double minus = probe.loss(batch);
    x = original;
    const double numeric = (plus - minus) / (2.0 * step);
    const double analytic = grads[block][index];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
    ++result.coordinates;
  };
  // parameters() alternates weight, bias per layer.
  for (std::size_t block = 0; block + 1 < params.size(); block += 2) {
    const auto nw = static_cast<std::int64_t>(params[block].size());
    const auto nb = static_cast<std::int64_t>(params[block + 1].size());
    for (int k = 0; k < per_layer; ++k) check(block, static_cast<std::size_t>(rng.uniform_int(0, nw - 1)));
    for (int k = 0; k < std::min<std::int64_t>(3, nb); ++k) {
      check(block + 1, static_cast<std::size_t>(rng.uniform_int(0, nb - 1)));
    }
  }
  return result;
}

EvalReport evaluate_predictions(const Eigen::MatrixXd& predictions, const ToyDataset& data) {
  EvalReport report;
  report.samples = data.size();
  if (data.empty()) return report;
  Eigen::Vector3d sq = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < data.size(); ++i) {
    sq += (predictions.col(static_cast<Eigen::Index>(i)) - data[i].label).cwiseAbs2();
  }
  const double n = static_cast<double>(data.size());
  report.axis_rmse = (sq / n).cwiseSqrt();
  report.rmse = std::sqrt(sq.sum() / n);
  return report;
}

EvalReport evaluate(const ToyModel& model, const ToyDataset& data) {
  return evaluate_predictions(model.predict(make_batch(data, model.variant())), data);
}

EvalReport evaluate_mean_predictor(const ToyDataset& train_set, const ToyDataset& data) {
  Vec3 mean = Vec3::Zero();
  for (const ToySample& s : train_set) mean += s.label;
  if (!train_set.empty()) mean /= static_cast<double>(train_set.size());
  Eigen::MatrixXd pred(3, static_cast<Eigen::Index>(data.size()));
  pred.colwise() = mean;
  return evaluate_predictions(pred, data);
}

EvalReport evaluate_triangulation_oracle(const ToyDataset& data) {
  Eigen::MatrixXd pred(3, static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    pred.col(static_cast<Eigen::Index>(i)) = triangulate(data[i].rays[0], data[i].rays[1]).midpoint;
  }
  return evaluate_predictions(pred, data);
}

double uniform_box_rmse(const AxisBox& box) {
  return std::sqrt((box.max - box.min).squaredNorm() / 12.0);
}

TrainResult train(ToyModel model, const ToyDataset& train_set, const ToyDataset& validation_set,
                  const TrainConfig& cfg, Rng& shuffle_rng) {
  if (train_set.empty()) throw Error(ErrorCode::kShapeMismatch, "empty training set");
  const Conditioning variant = model.variant();
  const Batch all = make_batch(train_set, variant);
  const Batch validation = make_batch(validation_set, variant);
  model.set_standardizer(fit_standardizer(all));

  TrainResult result{model, {}, {}};
  ToyModel& m = result.model;
  if (cfg.check_gradients) {
    Rng check_rng(shuffle_rng.next_u64());
    std::vector<std::size_t> cols(std::min<std::size_t>(32, train_set.size()));
    std::iota(cols.begin(), cols.end(), 0);
    result.initial_gradient_check = gradient_check(m, select_columns(all, cols), check_rng);
    if (result.initial_gradient_check.max_relative_error >= cfg.gradient_tolerance) {
      throw Error(ErrorCode::kNonFiniteLoss,
                  "initial gradient check failed, relative error " +
                      std::to_string(result.initial_gradient_check.max_relative_error));
    }
  }

  const double scale_sq = m.standardizer().label_scale * m.standardizer().label_scale;
  ToyModel grad = m.zeros_like();
  ToyModel velocity = m.zeros_like();
  auto params = m.parameters();
  auto grads = grad.parameters();
  auto vel = velocity.parameters();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch_size = static_cast<std::size_t>(std::max(cfg.batch_size, 1));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      const Batch batch =
          select_columns(all, std::span<const std::size_t>(order).subspan(start, end - start));
      for (auto g : grads) std::fill(g.begin(), g.end(), 0.0);
      const double loss = m.loss(batch, &grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kNonFiniteLoss, "loss became non-finite at epoch " +
                                                   std::to_string(epoch) + ", batch " +
                                                   std::to_string(batches));
      }
      for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t k = 0; k < params[b].size(); ++k) {
          vel[b][k] = cfg.momentum * vel[b][k] - cfg.learning_rate * grads[b][k];
          params[b][k] += vel[b][k];
        }
      }
      epoch_loss += loss;
      ++batches;
    }
    result.curve.train_mse.push_back(epoch_loss / static_cast<double>(batches) * scale_sq);
    const double val_rmse =
        validation_set.empty()
            ? 0.0
            : evaluate_predictions(m.predict(validation), validation_set).rmse;
    if (!std::isfinite(val_rmse) || !m.all_finite()) {
      throw Error(ErrorCode::kNonFiniteLoss,
                  "non-finite weights or validation error after epoch " + std::to_string(epoch));
    }
    result.curve.validation_rmse.push_back(val_rmse);
  }
  return result;
}

ExperimentResult run_experiment(Conditioning variant, std::uint64_t seed,
                                const ExperimentConfig& cfg) {
  Rng train_rng(derive_seed(seed, kTrainDataStream));
  Rng val_rng(derive_seed(seed, kValidationDataStream));
  Rng init_rng(derive_seed(seed, kInitStream));
  Rng shuffle_rng(derive_seed(seed, kShuffleStream));

  const ToyDataset train_set = make_dataset(train_rng, cfg.task, cfg.train_count);
  const ToyDataset validation_set = make_dataset(val_rng, cfg.task, cfg.validation_count);

  const auto start = std::chrono::steady_clock::now();
  TrainResult trained =
      train(ToyModel(variant, cfg.model, init_rng), train_set, validation_set, cfg.train, shuffle_rng);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  return {variant,
          seed,
          evaluate(trained.model, validation_set),
          evaluate_mean_predictor(train_set, validation_set),
          evaluate_triangulation_oracle(validation_set),
          uniform_box_rmse(cfg.task.workspace),
          std::move(trained.curve),
          trained.initial_gradient_check,
          seconds};
}

std::string format_report(const ExperimentResult& r) {
  using nlohmann::json;
  auto eval = [](const EvalReport& e) {
    return json{{"rmse_m", e.rmse},
                {"axis_rmse_m", {e.axis_rmse.x(), e.axis_rmse.y(), e.axis_rmse.z()}},
                {"samples", e.samples}};
  };
  const json report{
      {"variant", std::string(to_string(r.variant))},
      {"seed", r.seed},
      {"rmse_m", r.validation.rmse},
      {"validation", eval(r.validation)},
      {"baselines",
       {{"mean_predictor", eval(r.mean_predictor)},
        {"triangulation_oracle", eval(r.oracle)},
        {"uniform_box_closed_form_rmse_m", r.closed_form_mean_rmse}}},
      {"gradient_check",
       {{"max_relative_error", r.gradient_check.max_relative_error},
        {"coordinates", r.gradient_check.coordinates}}},
      {"loss_curve",
       {{"train_mse_m2", r.curve.train_mse}, {"validation_rmse_m", r.curve.validation_rmse}}},
  };
  return report.dump(2) + "\n";
}

}  // namespace plucker::toy
