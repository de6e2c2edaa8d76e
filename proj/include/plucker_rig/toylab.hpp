#pragma once

// Desk-scale view-generalization experiment: two randomly placed cameras see a
// point target, and a small MLP must regress the point's world position from
// its two pixel observations. Without camera geometry the task is ill-posed;
// each conditioning variant injects the geometry differently.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "plucker_rig/geometry.hpp"
#include "plucker_rig/random.hpp"
#include "plucker_rig/schedule.hpp"

namespace plucker::toy {

enum class Conditioning {
  kNone,   // pixel observations only
  kToken,  // both 3x4 extrinsic matrices, linearly projected to a token
  kEarly,  // per-camera Plücker ray concatenated with the pixels at the input
  kLate,   // rays through a separate encoder, latent concatenated
};

std::string_view to_string(Conditioning c);
Conditioning parse_conditioning(std::string_view name);  // throws SchemaError

struct ToyTaskConfig {
  AxisBox workspace{Vec3::Constant(-0.25), Vec3::Constant(0.25)};
  std::array<PoseSamplerConfig, 2> cameras{};
  Intrinsics intrinsics{48.0, 48.0, 64.0, 64.0, 128, 128};
  std::uint64_t max_resamples = 1'000'000;
  // Each view is a random crop of this linear size of the full image, i.e. a
  // virtual camera with shifted principal point. 1.0 disables cropping.
  double crop_fraction = 0.95;

  // Both cameras pinned (degenerate sampler ranges), 90 degrees apart, no
  // cropping.
  static ToyTaskConfig fixed_cameras();
};

struct ToySample {
  std::array<Vec2, 2> pixel;       // pixel coordinates in each (cropped) view
  std::array<Vec2, 2> observation; // pixel / (crop width, crop height), in [0, 1)^2
  std::array<PluckerRay, 2> rays;  // ray through the observed pixel
  std::array<Eigen::Matrix<double, 3, 4>, 2> extrinsics;  // [R | t]
  Vec3 label;
};

using ToyDataset = std::vector<ToySample>;

// Throws RejectionOverflow after cfg.max_resamples rejected draws.
ToyDataset make_dataset(Rng& rng, const ToyTaskConfig& cfg, std::size_t count);

inline constexpr int kObservationDim = 4;
inline constexpr int kTokenInputDim = 24;
inline constexpr int kRayInputDim = 12;

// Column-per-sample feature matrices for one variant.
struct Batch {
  Eigen::MatrixXd observation;   // 4 x N
  Eigen::MatrixXd conditioning;  // k x N (k = 0, 24, 12 or 12)
  Eigen::MatrixXd label;         // 3 x N
};

Batch make_batch(const ToyDataset& data, Conditioning variant);
Batch select_columns(const Batch& batch, std::span<const std::size_t> columns);

struct Dense {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  bool tanh = true;
};

struct ToyModelConfig {
  int hidden_layers = 3;
  int hidden_units = 64;
  int late_hidden_layers = 2;
  int late_hidden_units = 32;
  int late_latent_dim = 16;
  int token_dim = 16;
};

// Affine standardization of inputs and targets, fitted once on training data
// and frozen. Targets share one scale across axes so the training loss is the
// metric MSE divided by scale^2. A default-constructed one is the identity.
struct Standardizer {
  Eigen::VectorXd observation_mean, observation_inv_std;
  Eigen::VectorXd conditioning_mean, conditioning_inv_std;
  Eigen::Vector3d label_mean = Eigen::Vector3d::Zero();
  double label_scale = 1.0;
};

Standardizer fit_standardizer(const Batch& train);

class ToyModel {
 public:
  // Glorot-uniform weights, zero biases.
  ToyModel(Conditioning variant, const ToyModelConfig& cfg, Rng& init_rng);
  // All weights and biases zero.
  static ToyModel zeros(Conditioning variant, const ToyModelConfig& cfg);

  Conditioning variant() const { return variant_; }
  const std::vector<Dense>& branch() const { return branch_; }
  const std::vector<Dense>& trunk() const { return trunk_; }

  void set_standardizer(Standardizer s) { standardizer_ = std::move(s); }
  const Standardizer& standardizer() const { return standardizer_; }

  // World-frame predictions, 3 x N.
  Eigen::MatrixXd predict(const Batch& batch) const;

  // Training objective in standardized target units: mean over samples of the
  // squared error norm. Fills `grad` (same shapes as this model) when given.
  double loss(const Batch& batch, ToyModel* grad = nullptr) const;

  // Flat views over every trainable parameter, in a fixed order.
  std::vector<std::span<double>> parameters();
  std::size_t parameter_count() const;

  ToyModel zeros_like() const;

  bool all_finite() const;

 private:
  ToyModel(Conditioning variant, std::vector<Dense> branch, std::vector<Dense> trunk);

  Eigen::MatrixXd trunk_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& branch_out) const;

  Conditioning variant_;
  std::vector<Dense> branch_;  // token: one linear layer; late: encoder MLP
  std::vector<Dense> trunk_;
  Standardizer standardizer_;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

// Central differences with `step` on `per_layer` random weights and up to 3
// random biases of every layer. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradientCheckResult gradient_check(const ToyModel& model, const Batch& batch, Rng& rng,
                                   int per_layer = 10, double step = 1e-5);

struct TrainConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int epochs = 200;
  int batch_size = 128;
  bool check_gradients = true;  // abort before training if the check fails
  double gradient_tolerance = 1e-4;
};

struct LossCurve {
  std::vector<double> train_mse;       // meters^2, mean over the epoch's batches
  std::vector<double> validation_rmse; // meters, after each epoch
};

struct TrainResult {
  ToyModel model;
  LossCurve curve;
  GradientCheckResult initial_gradient_check;
};

// Plain mini-batch SGD with momentum on MSE. Fits the standardizer on `train`.
// Deterministic given the shuffle generator. Throws NonFiniteLoss.
TrainResult train(ToyModel model, const ToyDataset& train_set, const ToyDataset& validation_set,
                  const TrainConfig& cfg, Rng& shuffle_rng);

struct EvalReport {
  double rmse = 0.0;             // sqrt(mean |p_hat - p|^2), meters
  Eigen::Vector3d axis_rmse = Eigen::Vector3d::Zero();
  std::size_t samples = 0;
};

EvalReport evaluate(const ToyModel& model, const ToyDataset& data);
EvalReport evaluate_predictions(const Eigen::MatrixXd& predictions, const ToyDataset& data);

// Reference predictors on the same data.
EvalReport evaluate_mean_predictor(const ToyDataset& train_set, const ToyDataset& data);
EvalReport evaluate_triangulation_oracle(const ToyDataset& data);

// sqrt(sum over axes of side^2 / 12): RMSE of predicting the box center for a
// uniform point in the box.
double uniform_box_rmse(const AxisBox& box);

struct ExperimentConfig {
  ToyTaskConfig task;
  ToyModelConfig model;
  TrainConfig train;
  std::size_t train_count = 8192;
  std::size_t validation_count = 2048;
};

// Seed streams derived from the run seed with derive_seed(seed, stream):
//   1 training data, 2 validation data, 3 weight init, 4 batch shuffling (its
//   first draw seeds the gradient-check coordinate picks).
// The data streams do not depend on the variant, so all variants of one seed
// see identical samples.
enum SeedStream : std::uint64_t {
  kTrainDataStream = 1,
  kValidationDataStream = 2,
  kInitStream = 3,
  kShuffleStream = 4,
};

struct ExperimentResult {
  Conditioning variant;
  std::uint64_t seed;
  EvalReport validation;
  EvalReport mean_predictor;
  EvalReport oracle;
  double closed_form_mean_rmse;
  LossCurve curve;
  GradientCheckResult gradient_check;
  double train_seconds;
};

ExperimentResult run_experiment(Conditioning variant, std::uint64_t seed,
                                const ExperimentConfig& cfg);

// Structured text (JSON) report.
std::string format_report(const ExperimentResult& result);

}  // namespace plucker::toy
