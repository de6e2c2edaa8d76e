#pragma once

#include <vector>

#include "plucker_rig/geometry.hpp"
#include "plucker_rig/random.hpp"

namespace plucker {

// Stair-shaped camera assignment: each episode sees `n` cameras, and each step
// to the next episode retires `m` of them and introduces `m` new ones.
struct CameraSchedule {
  int n = 0;
  int m = 0;
  int start_index = 0;
  int pool_size = 0;
  std::vector<std::vector<int>> episodes;

  bool operator==(const CameraSchedule&) const = default;
};

// Episode i uses {start + i*m, ..., start + i*m + n - 1}.
// Throws InvalidStairParams unless 0 <= m <= n, n >= 1, episodes >= 1.
CameraSchedule stair_schedule(int num_episodes, int n, int m, int start_index = 0);

struct AxisBox {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

enum class DegenerateUpPolicy { kFail, kResample };

// Spherical placement around a target point. Azimuth is measured in the world
// x-y plane from +x, offset by `heading_deg`; elevation is above the x-y
// plane. The up hint only orients the camera about its optical axis.
struct PoseSamplerConfig {
  double heading_deg = 0.0;
  Range azimuth_deg{-90.0, 90.0};
  Range elevation_deg{30.0, 60.0};
  Range radius_m{0.8, 1.2};
  AxisBox target_box{Vec3(-0.05, -0.05, -0.05), Vec3(0.05, 0.05, 0.05)};
  Vec3 up = Vec3::UnitZ();
  DegenerateUpPolicy on_degenerate_up = DegenerateUpPolicy::kFail;
};

// Throws InvalidSamplerConfig on empty ranges, non-positive radius, inverted
// box or zero up vector.
void validate(const PoseSamplerConfig& cfg);

// Camera frame: +z optical axis toward the target, +x right, +y down.
// Throws DegenerateUp when the optical axis is within 1e-6 rad of +/- up.
CameraPose look_at(const Vec3& center, const Vec3& target, const Vec3& up);

struct LookAtSample {
  CameraPose pose;
  Vec3 target;
  double azimuth_deg;
  double elevation_deg;
  double radius_m;
};

LookAtSample sample_lookat(Rng& rng, const PoseSamplerConfig& cfg);

inline CameraPose sample_lookat_pose(Rng& rng, const PoseSamplerConfig& cfg) {
  return sample_lookat(rng, cfg).pose;
}

}  // namespace plucker
