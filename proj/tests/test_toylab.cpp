#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "plucker_rig/error.hpp"
#include "plucker_rig/toylab.hpp"

namespace plucker::toy {
namespace {

constexpr Conditioning kAllVariants[] = {Conditioning::kNone, Conditioning::kToken,
                                         Conditioning::kEarly, Conditioning::kLate};

ToyDataset dataset(std::uint64_t seed, std::size_t count, const ToyTaskConfig& cfg = {}) {
  Rng rng(seed);
  return make_dataset(rng, cfg, count);
}

TEST(ToyConditioning, NamesRoundTrip) {
  for (Conditioning c : kAllVariants) EXPECT_EQ(parse_conditioning(to_string(c)), c);
  EXPECT_THROW(parse_conditioning("mid"), Error);
}

TEST(ToyDataset, DeterministicAndConsistent) {
  const ToyDataset a = dataset(5, 200);
  const ToyDataset b = dataset(5, 200);
  ASSERT_EQ(a.size(), 200u);
  const ToyTaskConfig cfg;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_EQ(a[i].pixel[1], b[i].pixel[1]);
    EXPECT_TRUE((a[i].label.array() >= cfg.workspace.min.array()).all());
    EXPECT_TRUE((a[i].label.array() <= cfg.workspace.max.array()).all());
    for (int c = 0; c < 2; ++c) {
      const Vec2& o = a[i].observation[c];
      EXPECT_TRUE(o.x() >= 0 && o.x() < 1 && o.y() >= 0 && o.y() < 1);
      // The stored ray passes through the label.
      const PluckerRay& r = a[i].rays[c];
      EXPECT_LE((a[i].label.cross(r.direction) - r.moment).norm(), 1e-12);
      const Mat3 R = a[i].extrinsics[c].leftCols<3>();
      EXPECT_LE(CameraPose::orthonormality_error(R), 1e-12);
    }
  }
  EXPECT_NE(dataset(6, 1)[0].label, a[0].label);
}

TEST(ToyDataset, FixedCamerasAreConstant) {
  const ToyDataset d = dataset(7, 50, ToyTaskConfig::fixed_cameras());
  for (const ToySample& s : d) {
    EXPECT_EQ(s.extrinsics[0], d[0].extrinsics[0]);
    EXPECT_EQ(s.extrinsics[1], d[0].extrinsics[1]);
  }
  // 90 degrees apart in azimuth.
  const Vec3 c0 = -d[0].extrinsics[0].leftCols<3>().transpose() * d[0].extrinsics[0].col(3);
  const Vec3 c1 = -d[0].extrinsics[1].leftCols<3>().transpose() * d[0].extrinsics[1].col(3);
  const double cosang = c0.head<2>().normalized().dot(c1.head<2>().normalized());
  EXPECT_NEAR(cosang, 0.0, 1e-12);
}

TEST(ToyDataset, CroppedViewsKeepRaysConsistent) {
  ToyTaskConfig cfg;
  cfg.crop_fraction = 0.5;
  const ToyDataset d = dataset(8, 300, cfg);
  // A 64x64 window of the 128x128 image: observations stay in [0, 1) and the
  // ray through the cropped pixel still passes through the label.
  for (const ToySample& s : d) {
    for (int c = 0; c < 2; ++c) {
      EXPECT_TRUE(s.pixel[c].x() >= 0 && s.pixel[c].x() < 64 && s.pixel[c].y() >= 0 &&
                  s.pixel[c].y() < 64);
      EXPECT_EQ(s.observation[c], s.pixel[c] / 64.0);
      EXPECT_LE((s.label.cross(s.rays[c].direction) - s.rays[c].moment).norm(), 1e-12);
    }
  }
  EXPECT_LE(evaluate_triangulation_oracle(d).rmse, 1e-6);
  cfg.crop_fraction = 0.0;
  EXPECT_THROW(dataset(8, 1, cfg), Error);
}

TEST(ToyDataset, RejectionOverflow) {
  ToyTaskConfig cfg;
  cfg.workspace = {Vec3::Constant(5.0), Vec3::Constant(6.0)};  // behind/outside every camera
  cfg.max_resamples = 1000;
  Rng rng(1);
  try {
    make_dataset(rng, cfg, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRejectionOverflow);
  }
}

TEST(ToyBatch, ShapesPerVariant) {
  const ToyDataset d = dataset(9, 10);
  EXPECT_EQ(make_batch(d, Conditioning::kNone).conditioning.rows(), 0);
  EXPECT_EQ(make_batch(d, Conditioning::kToken).conditioning.rows(), kTokenInputDim);
  EXPECT_EQ(make_batch(d, Conditioning::kEarly).conditioning.rows(), kRayInputDim);
  const Batch late = make_batch(d, Conditioning::kLate);
  EXPECT_EQ(late.conditioning.rows(), kRayInputDim);
  EXPECT_EQ(late.observation.rows(), kObservationDim);
  EXPECT_EQ(late.label.cols(), 10);
  const std::size_t cols[] = {3, 7};
  const Batch sub = select_columns(late, cols);
  EXPECT_EQ(sub.label.col(1), late.label.col(7));
}

TEST(ToyOracle, TriangulationRecoversLabels) {
  const ToyDataset d = dataset(11, 2048);
  EXPECT_LE(evaluate_triangulation_oracle(d).rmse, 1e-6);
}

TEST(ToyMeanPredictor, MatchesClosedFormAndSampling) {
  const ToyTaskConfig cfg;
  const double closed = uniform_box_rmse(cfg.workspace);
  EXPECT_NEAR(closed, std::sqrt(3 * 0.25 / 12.0), 1e-15);
  // Brute-force: RMSE to the box center of plain uniform draws.
  Rng rng(13);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    Vec3 p(rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25));
    sum += p.squaredNorm();
  }
  EXPECT_NEAR(std::sqrt(sum / n), closed, 0.005 * closed);
  const EvalReport mean = evaluate_mean_predictor(dataset(14, 8192), dataset(15, 2048));
  EXPECT_NEAR(mean.rmse, closed, 0.02 * closed);
}

TEST(ToyModel, ZeroModelOnZeroLabelsHasZeroLoss) {
  for (Conditioning c : kAllVariants) {
    const ToyModel m = ToyModel::zeros(c, ToyModelConfig{});
    Batch b = make_batch(dataset(17, 16), c);
    b.label.setZero();
    EXPECT_EQ(m.loss(b), 0.0) << to_string(c);
    EXPECT_TRUE(m.predict(b).isZero(0.0));
  }
}

TEST(ToyModel, ParameterCounts) {
  Rng rng(19);
  const ToyModelConfig cfg;
  const std::size_t trunk_tail = 64 * 64 + 64 + 64 * 64 + 64 + 64 * 3 + 3;
  EXPECT_EQ(ToyModel(Conditioning::kNone, cfg, rng).parameter_count(), 4 * 64 + 64 + trunk_tail);
  EXPECT_EQ(ToyModel(Conditioning::kEarly, cfg, rng).parameter_count(),
            16 * 64 + 64 + trunk_tail);
  EXPECT_EQ(ToyModel(Conditioning::kToken, cfg, rng).parameter_count(),
            24 * 16 + 16 + 20 * 64 + 64 + trunk_tail);
  EXPECT_EQ(ToyModel(Conditioning::kLate, cfg, rng).parameter_count(),
            12 * 32 + 32 + 32 * 32 + 32 + 32 * 16 + 16 + 20 * 64 + 64 + trunk_tail);
}

TEST(ToyModel, GradientCheckPassesForEveryVariant) {
  const ToyDataset d = dataset(23, 64);
  for (Conditioning c : kAllVariants) {
    Rng init(29);
    ToyModel m(c, ToyModelConfig{}, init);
    const Batch b = make_batch(d, c);
    m.set_standardizer(fit_standardizer(b));
    Rng pick(31);
    const GradientCheckResult r = gradient_check(m, b, pick);
    EXPECT_LT(r.max_relative_error, 1e-4) << to_string(c);
    EXPECT_GE(r.coordinates, 10u * m.trunk().size());
  }
}

TEST(ToyModel, UntrainedModelIsNoBetterThanTheMean) {
  const ToyDataset train_set = dataset(37, 2048);
  const ToyDataset val = dataset(41, 1024);
  const double mean = evaluate_mean_predictor(train_set, val).rmse;
  for (Conditioning c : kAllVariants) {
    Rng init(43);
    ToyModel m(c, ToyModelConfig{}, init);
    m.set_standardizer(fit_standardizer(make_batch(train_set, c)));
    EXPECT_GE(evaluate(m, val).rmse, 0.9 * mean) << to_string(c);
  }
}

TEST(ToyTraining, ShortRunReducesLossDeterministically) {
  const ToyDataset train_set = dataset(47, 1024);
  const ToyDataset val = dataset(53, 256);
  TrainConfig cfg;
  cfg.epochs = 5;
  auto run = [&] {
    Rng init(59), shuffle(61);
    return train(ToyModel(Conditioning::kLate, ToyModelConfig{}, init), train_set, val, cfg,
                 shuffle);
  };
  const TrainResult a = run();
  const TrainResult b = run();
  ASSERT_EQ(a.curve.train_mse.size(), 5u);
  EXPECT_LT(a.curve.train_mse.back(), a.curve.train_mse.front());
  EXPECT_LT(a.curve.validation_rmse.back(), evaluate_mean_predictor(train_set, val).rmse);
  EXPECT_EQ(a.curve.validation_rmse, b.curve.validation_rmse);
  EXPECT_LT(a.initial_gradient_check.max_relative_error, 1e-4);
  EXPECT_TRUE(a.model.all_finite());
}

TEST(ToyTraining, DivergenceRaisesNonFiniteLoss) {
  const ToyDataset train_set = dataset(67, 512);
  TrainConfig cfg;
  cfg.learning_rate = 1e6;
  cfg.epochs = 50;
  cfg.check_gradients = false;
  Rng init(71), shuffle(73);
  try {
    train(ToyModel(Conditioning::kNone, ToyModelConfig{}, init), train_set, {}, cfg, shuffle);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteLoss);
  }
}

TEST(ToyExperiment, ReportIsReproducible) {
  ExperimentConfig cfg;
  cfg.train.epochs = 2;
  cfg.train_count = 512;
  cfg.validation_count = 128;
  const ExperimentResult a = run_experiment(Conditioning::kEarly, 3, cfg);
  const ExperimentResult b = run_experiment(Conditioning::kEarly, 3, cfg);
  EXPECT_EQ(format_report(a), format_report(b));
  EXPECT_LE(a.oracle.rmse, 1e-6);
  EXPECT_EQ(a.validation.samples, 128u);
  // Variants of one seed share their data.
  const ExperimentResult c = run_experiment(Conditioning::kNone, 3, cfg);
  EXPECT_EQ(c.mean_predictor.rmse, a.mean_predictor.rmse);
}

}  // namespace
}  // namespace plucker::toy
