#include "plucker_rig/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "plucker_rig/error.hpp"

namespace plucker {

CameraSchedule stair_schedule(int num_episodes, int n, int m, int start_index) {
  if (num_episodes < 1 || n < 1 || m < 0 || m > n || start_index < 0) {
    throw Error(ErrorCode::kInvalidStairParams,
                "need episodes >= 1, n >= 1, 0 <= m <= n, start >= 0 (got episodes=" +
                    std::to_string(num_episodes) + ", n=" + std::to_string(n) +
                    ", m=" + std::to_string(m) + ")");
  }
  CameraSchedule schedule;
  schedule.n = n;
  schedule.m = m;
  schedule.start_index = start_index;
  schedule.pool_size = start_index + (num_episodes - 1) * m + n;
  schedule.episodes.reserve(num_episodes);
  for (int i = 0; i < num_episodes; ++i) {
    std::vector<int> cams(n);
    for (int k = 0; k < n; ++k) cams[k] = start_index + i * m + k;
    schedule.episodes.push_back(std::move(cams));
  }
  return schedule;
}

void validate(const PoseSamplerConfig& cfg) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidSamplerConfig, what);
  };
  auto finite_range = [](const Range& r) {
    return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi;
  };
  if (!finite_range(cfg.azimuth_deg)) fail("azimuth range is empty");
  if (!finite_range(cfg.elevation_deg)) fail("elevation range is empty");
  if (!finite_range(cfg.radius_m)) fail("radius range is empty");
  if (!(cfg.radius_m.lo > 0.0)) fail("radius must be positive");
  if (!std::isfinite(cfg.heading_deg)) fail("heading must be finite");
  if (!cfg.target_box.min.allFinite() || !cfg.target_box.max.allFinite() ||
      (cfg.target_box.min.array() > cfg.target_box.max.array()).any()) {
    fail("target box min must not exceed max");
  }
  if (!cfg.up.allFinite() || cfg.up.norm() == 0.0) fail("up hint must be a nonzero vector");
}

CameraPose look_at(const Vec3& center, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - center).normalized();
  const Vec3 up_dir = up.normalized();
  const Vec3 side = forward.cross(up_dir);
  if (!forward.allFinite() || side.norm() < std::sin(1e-6)) {
    throw Error(ErrorCode::kDegenerateUp, "optical axis is parallel to the up hint");
  }
  const Vec3 right = side.normalized();
  const Vec3 down = forward.cross(right);
  Mat3 rotation;
  rotation.row(0) = right.transpose();
  rotation.row(1) = down.transpose();
  rotation.row(2) = forward.transpose();
  return CameraPose(rotation, -(rotation * center));
}

LookAtSample sample_lookat(Rng& rng, const PoseSamplerConfig& cfg) {
  validate(cfg);
  constexpr double kDeg = std::numbers::pi / 180.0;
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Vec3 target;
    for (int k = 0; k < 3; ++k) target[k] = rng.uniform(cfg.target_box.min[k], cfg.target_box.max[k]);
    const double azimuth = rng.uniform(cfg.azimuth_deg.lo, cfg.azimuth_deg.hi);
    const double elevation = rng.uniform(cfg.elevation_deg.lo, cfg.elevation_deg.hi);
    const double radius = rng.uniform(cfg.radius_m.lo, cfg.radius_m.hi);

    const double az = (cfg.heading_deg + azimuth) * kDeg;
    const double el = elevation * kDeg;
    const Vec3 offset(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    const Vec3 center = target + radius * offset;
    try {
      return {look_at(center, target, cfg.up), target, azimuth, elevation, radius};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateUp ||
          cfg.on_degenerate_up == DegenerateUpPolicy::kFail) {
        throw;
      }
    }
  }
  throw Error(ErrorCode::kDegenerateUp,
              "no non-degenerate pose after " + std::to_string(kMaxAttempts) + " resamples");
}

}  // namespace plucker
