// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. `--no-toy` skips the (minutes-long) toy experiment grid.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "plucker_rig/actions.hpp"
#include "plucker_rig/error.hpp"
#include "plucker_rig/geometry.hpp"
#include "plucker_rig/schedule.hpp"
#include "plucker_rig/tensorio.hpp"
#include "plucker_rig/toylab.hpp"
#include "plucker_rig/transforms.hpp"
#include "test_support.hpp"

namespace {

using namespace plucker;
using plucker::testing::random_ee_trajectory;
using plucker::testing::random_intrinsics;
using plucker::testing::random_joint_trajectory;
using plucker::testing::random_pose;
using Clock = std::chrono::steady_clock;

int failures = 0;

void report(bool ok, std::string_view name, const std::string& detail) {
  std::printf("%s %-28s %s\n", ok ? "PASS" : "FAIL", std::string(name).c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void info(std::string_view name, const std::string& detail) {
  std::printf("INFO %-28s %s\n", std::string(name).c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vec2 random_pixel(Rng& rng, const Intrinsics& k) {
  return {rng.uniform(0.0, k.width()), rng.uniform(0.0, k.height())};
}

void plucker_invariants() {
  Rng rng(derive_seed(1001, 0));
  const auto t0 = Clock::now();
  double worst_bilinear = 0.0, worst_norm = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Intrinsics k = random_intrinsics(rng);
    const CameraPose pose = random_pose(rng);
    const Vec2 px = random_pixel(rng, k);
    const PluckerRay r = pixel_ray(k, pose, px.x(), px.y());
    worst_bilinear = std::max(worst_bilinear, std::abs(r.direction.dot(r.moment)));
    worst_norm = std::max(worst_norm, std::abs(r.direction.norm() - 1.0));
  }
  const double secs = seconds_since(t0);
  report(worst_bilinear <= 1e-9 && worst_norm <= 1e-9 && secs < 5.0, "plucker-invariants",
         fmt("10000 draws: max|d.m|=%.3g max||d|-1|=%.3g in %.3fs (limits 1e-9, 1e-9, 5s)",
             worst_bilinear, worst_norm, secs));
}

void reprojection_closure() {
  Rng rng(derive_seed(1002, 0));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Intrinsics k = random_intrinsics(rng);
    const CameraPose pose = random_pose(rng);
    const Vec2 px = random_pixel(rng, k);
    const PluckerRay r = pixel_ray(k, pose, px.x(), px.y());
    const Vec3 c = camera_center(pose);
    for (double depth : {0.1, 1.0, 25.0}) {
      const Vec3 x = c + depth * r.direction;
      worst = std::max(worst, (project(k, pose, x) - px).norm());
    }
  }
  report(worst <= 1e-6, "reprojection-closure",
         fmt("1000 rays x 3 depths: max error %.3g px (limit 1e-6)", worst));
}

void origin_invariance() {
  Rng rng(derive_seed(1003, 0));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Intrinsics k = random_intrinsics(rng);
    const CameraPose pose = random_pose(rng);
    const Vec2 px = random_pixel(rng, k);
    const PluckerRay r = pixel_ray(k, pose, px.x(), px.y());
    const Vec3 c = camera_center(pose);
    for (double s : {-5.0, 0.1, 7.0}) {
      const Vec3 shifted = plucker_moment(c + s * r.direction, r.direction);
      worst = std::max(worst, (shifted - plucker_moment(c, r.direction)).norm());
    }
  }
  report(worst <= 1e-9, "origin-invariance",
         fmt("1000 rays x s in {-5, 0.1, 7}: max moment change %.3g (limit 1e-9)", worst));
}

void crop_commutation() {
  Rng rng(derive_seed(1004, 0));
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Intrinsics k = random_intrinsics(rng, 64);
    const CameraPose pose = random_pose(rng);
    const int w = static_cast<int>(rng.uniform_int(1, k.width()));
    const int h = static_cast<int>(rng.uniform_int(1, k.height()));
    const CropRect rect = sample_crop(rng, k.height(), k.width(), h, w);
    const RayMap direct = ray_map(crop_intrinsics(k, rect), pose);
    const Image img(k.height(), k.width(), 3);
    const RayMap cropped = joint_crop(img, ray_map(k, pose), rect).second;
    worst = std::max(worst, testing::max_abs_diff(direct, cropped));
  }
  report(worst <= 1e-12, "crop-commutation",
         fmt("200 camera/rect pairs: max channel difference %.3g (limit 1e-12)", worst));
}

void center_recovery() {
  Rng rng(derive_seed(1005, 0));
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Intrinsics k(rng.uniform(20.0, 60.0), rng.uniform(20.0, 60.0), rng.uniform(8.0, 24.0),
                       rng.uniform(8.0, 24.0), 32, 32, rng.uniform(-1.0, 1.0));
    const CameraPose pose = random_pose(rng);
    const Vec3 truth = -pose.rotation().transpose() * pose.translation();
    worst = std::max(worst, (recover_camera_center(ray_map(k, pose)).center - truth).norm());
  }
  report(worst <= 1e-6, "camera-center-recovery",
         fmt("100 cameras at 32x32: max |C* - C| %.3g m (limit 1e-6)", worst));
}

void stair_schedules() {
  const bool fig_a = stair_schedule(3, 3, 1).episodes ==
                     std::vector<std::vector<int>>{{0, 1, 2}, {1, 2, 3}, {2, 3, 4}};
  const bool fig_b =
      stair_schedule(2, 4, 2).episodes == std::vector<std::vector<int>>{{0, 1, 2, 3}, {2, 3, 4, 5}};
  Rng rng(derive_seed(1006, 0));
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 12));
    const int m = static_cast<int>(rng.uniform_int(0, n));
    const CameraSchedule s = stair_schedule(static_cast<int>(rng.uniform_int(2, 20)), n, m);
    for (std::size_t i = 0; i + 1 < s.episodes.size(); ++i) {
      const std::set<int> a(s.episodes[i].begin(), s.episodes[i].end());
      const auto shared = std::count_if(s.episodes[i + 1].begin(), s.episodes[i + 1].end(),
                                        [&](int x) { return a.count(x) > 0; });
      if (shared != n - m || static_cast<int>(a.size()) != n) ++bad;
    }
  }
  report(fig_a && fig_b && bad == 0, "stair-schedules",
         fmt("(3,1) pattern %s, (4,2) pattern %s, %d overlap violations in 100 random (n,m)",
             fig_a ? "exact" : "WRONG", fig_b ? "exact" : "WRONG", bad));
}

void action_round_trips() {
  Rng rng(derive_seed(1007, 0));
  double pos = 0.0, rot = 0.0, joint = 0.0;
  bool gripper_exact = true;
  for (RotationFrame frame : {RotationFrame::kWorld, RotationFrame::kEndEffector}) {
    for (int i = 0; i < 100; ++i) {
      const EeTrajectory t = random_ee_trajectory(rng, 50);
      // abs -> delta -> abs and delta -> abs -> delta.
      const Trajectory d = convert(t, ActionSpace::kAbsEe, ActionSpace::kDeltaEe, frame);
      const Trajectory abs_again = convert(d, ActionSpace::kDeltaEe, ActionSpace::kAbsEe, frame);
      const Trajectory delta_again =
          convert(abs_again, ActionSpace::kAbsEe, ActionSpace::kDeltaEe, frame);
      const auto& a2 = std::get<EeTrajectory>(abs_again);
      const auto& d1 = std::get<EeTrajectory>(d);
      const auto& d2 = std::get<EeTrajectory>(delta_again);
      for (std::size_t k = 0; k < t.steps.size(); ++k) {
        pos = std::max(pos, (a2.steps[k].position - t.steps[k].position).norm());
        rot = std::max(rot, rotation_angle_between(a2.steps[k].orientation, t.steps[k].orientation));
        pos = std::max(pos, (d2.steps[k].position - d1.steps[k].position).norm());
        rot = std::max(rot, rotation_angle_between(d2.steps[k].orientation, d1.steps[k].orientation));
      }
      gripper_exact = gripper_exact && a2.gripper == t.gripper && d1.gripper == t.gripper;
    }
  }
  for (int i = 0; i < 100; ++i) {
    const JointTrajectory t = random_joint_trajectory(rng, 50, 7);
    const Trajectory d = convert(t, ActionSpace::kAbsJoint, ActionSpace::kDeltaJoint);
    const Trajectory a2 = convert(d, ActionSpace::kDeltaJoint, ActionSpace::kAbsJoint);
    const Trajectory d2 = convert(a2, ActionSpace::kAbsJoint, ActionSpace::kDeltaJoint);
    const auto& ja = std::get<JointTrajectory>(a2);
    const auto& jd = std::get<JointTrajectory>(d);
    const auto& jd2 = std::get<JointTrajectory>(d2);
    for (std::size_t k = 0; k < t.steps.size(); ++k) {
      for (std::size_t j = 0; j < t.steps[k].values.size(); ++j) {
        joint = std::max(joint, std::abs(ja.steps[k].values[j] - t.steps[k].values[j]));
        joint = std::max(joint, std::abs(jd2.steps[k].values[j] - jd.steps[k].values[j]));
      }
    }
    gripper_exact = gripper_exact && ja.gripper == t.gripper;
  }
  report(pos <= 1e-9 && rot <= 1e-7 && joint <= 1e-12 && gripper_exact, "action-round-trips",
         fmt("ee (world+ee frames) and joint, 100 x 50 steps each: pos %.3g m, rot %.3g rad, "
             "joint %.3g rad, gripper %s (limits 1e-9, 1e-7, 1e-12)",
             pos, rot, joint, gripper_exact ? "exact" : "CHANGED"));
}

bool detected(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_raymap(bytes);
    return false;
  } catch (const Error& e) {
    return e.code() == ErrorCode::kCorruptFile || e.code() == ErrorCode::kUnsupportedVersion;
  }
}

void file_format() {
  const std::filesystem::path golden_path =
      std::filesystem::path(PLUCKER_RIG_TEST_DATA) / "identity_1x1.plkr";
  std::ifstream in(golden_path, std::ios::binary);
  const std::vector<std::uint8_t> golden{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};
  const RayMap identity = ray_map(Intrinsics(1, 1, 0, 0, 1, 1), CameraPose::identity());
  const bool bytes_equal = !golden.empty() && encode_raymap(identity) == golden;

  Rng rng(derive_seed(1008, 0));
  const RayMap rays = ray_map(random_intrinsics(rng, 24), random_pose(rng));
  const std::vector<std::uint8_t> clean = encode_raymap(rays);
  auto flip_detected = [&](std::size_t bit) {
    std::vector<std::uint8_t> bad = clean;
    bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    return detected(bad);
  };
  int header_missed = 0, payload_missed = 0;
  for (std::size_t bit = 0; bit < kRayMapHeaderSize * 8; ++bit) header_missed += !flip_detected(bit);
  const std::size_t payload_bits = (clean.size() - kRayMapHeaderSize) * 8;
  const int samples = 2000;
  for (int i = 0; i < samples; ++i) {
    const std::size_t bit = kRayMapHeaderSize * 8 +
                            static_cast<std::size_t>(rng.uniform_int(0, payload_bits - 1));
    payload_missed += !flip_detected(bit);
  }
  report(bytes_equal && header_missed == 0 && payload_missed == 0, "file-format",
         fmt("golden 1x1 bytes %s; missed flips: header %d/%zu, payload+crc %d/%d sampled",
             bytes_equal ? "equal" : "DIFFER", header_missed, kRayMapHeaderSize * 8, payload_missed,
             samples));
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1).
double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void toy_suite() {
  using namespace plucker::toy;
  constexpr std::array<Conditioning, 4> variants{Conditioning::kNone, Conditioning::kToken,
                                                 Conditioning::kEarly, Conditioning::kLate};
  constexpr std::array<std::uint64_t, 3> seeds{0, 1, 2};
  const ExperimentConfig cfg;

  std::array<std::vector<double>, 4> rmse;
  std::array<double, 4> seconds{};
  double worst_grad = 0.0, worst_oracle = 0.0, worst_mean_rel = 0.0;
  double closed_form = 0.0;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (std::uint64_t seed : seeds) {
      const ExperimentResult r = run_experiment(variants[v], seed, cfg);
      rmse[v].push_back(r.validation.rmse);
      seconds[v] += r.train_seconds;
      worst_grad = std::max(worst_grad, r.gradient_check.max_relative_error);
      worst_oracle = std::max(worst_oracle, r.oracle.rmse);
      closed_form = r.closed_form_mean_rmse;
      worst_mean_rel = std::max(worst_mean_rel,
                                std::abs(r.mean_predictor.rmse - closed_form) / closed_form);
      info("toy-run", fmt("%-5s seed %llu: validation RMSE %.4f m, %.1fs",
                          std::string(to_string(variants[v])).c_str(),
                          static_cast<unsigned long long>(seed), r.validation.rmse,
                          r.train_seconds));
    }
  }

  report(worst_grad < 1e-4, "toy-gradient-check",
         fmt("max relative error %.3g over all variants and seeds (limit 1e-4)", worst_grad));

  const std::size_t none = 0, token = 1, early = 2, late = 3;
  auto gap_line = [&](std::size_t a, const char* name) {
    const double gap = mean(rmse[none]) - mean(rmse[a]);
    const double bound = 3.0 * std::max(stddev(rmse[none]), stddev(rmse[a]));
    report(gap > bound, std::string("toy-") + name + "-beats-none",
           fmt("mean RMSE %s %.4f vs none %.4f: gap %.4f > 3*max std %.4f", name, mean(rmse[a]),
               mean(rmse[none]), gap, bound));
  };
  gap_line(late, "late");
  gap_line(early, "early");
  report(mean(rmse[token]) <= mean(rmse[none]), "toy-token-not-worse",
         fmt("mean RMSE token %.4f <= none %.4f", mean(rmse[token]), mean(rmse[none])));
  report(worst_oracle <= 1e-6, "toy-triangulation-oracle",
         fmt("max oracle RMSE %.3g m (limit 1e-6)", worst_oracle));
  report(worst_mean_rel <= 0.02, "toy-mean-predictor",
         fmt("max relative deviation %.3f%% from closed form %.4f m (limit 2%%)",
             100.0 * worst_mean_rel, closed_form));
  const double slowest = *std::max_element(seconds.begin(), seconds.end());
  report(slowest < 15 * 60.0, "toy-runtime",
         fmt("slowest variant %.1fs for 3 seeds on one core (limit 900s)", slowest));

  info("toy-uninformed-floor",
       fmt("none %.4f m vs mean predictor %.4f m: pixels alone leave depth ambiguous",
           mean(rmse[none]), closed_form));
  info("toy-ordering", fmt("late %.4f, early %.4f, token %.4f, none %.4f", mean(rmse[late]),
                           mean(rmse[early]), mean(rmse[token]), mean(rmse[none])));
}

}  // namespace

int main(int argc, char** argv) {
  bool run_toy = true;
  for (int i = 1; i < argc; ++i) {
    if (std::string_view(argv[i]) == "--no-toy") run_toy = false;
  }
  try {
    plucker_invariants();
    reprojection_closure();
    origin_invariance();
    crop_commutation();
    center_recovery();
    stair_schedules();
    action_round_trips();
    file_format();
    if (run_toy) {
      toy_suite();
    } else {
      info("toy-suite", "skipped (--no-toy)");
    }
  } catch (const std::exception& e) {
    std::printf("FAIL %-28s %s\n", "unexpected-exception", e.what());
    return 1;
  }
  std::printf("%s: %d failing criteria\n", failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
              failures);
  return failures == 0 ? 0 : 1;
}
