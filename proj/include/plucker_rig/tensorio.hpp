#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plucker_rig/actions.hpp"
#include "plucker_rig/geometry.hpp"
#include "plucker_rig/schedule.hpp"
#include "plucker_rig/transforms.hpp"

namespace plucker {

// ---------------------------------------------------------------------------
// Ray-map file (.plkr). All fields little-endian.
//
//   offset  size  field
//        0     4  magic "PLKR"
//        4     2  version = 1
//        6     2  flags (bit 0: 3 image channels follow the 6 ray channels)
//        8     4  height
//       12     4  width
//       16     4  channels (6, or 9 with flag bit 0)
//       20     1  dtype = 0 (float32)
//       21     7  reserved, zero
//       28   4*N  payload, row-major H x W x C, channel order
//                 dx dy dz mx my mz [r g b]
//   28+4*N     4  CRC-32 of payload
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kRayMapVersion = 1;
inline constexpr std::size_t kRayMapHeaderSize = 28;
inline constexpr std::uint16_t kFlagImageChannels = 0x0001;

struct RayMapFile {
  RayMap rays;
  std::optional<Image> image;  // 3 channels when present
};

// Throws ShapeMismatch when the image is not H x W x 3 for the ray-map's H, W.
std::vector<std::uint8_t> encode_raymap(const RayMap& rays, const std::optional<Image>& image = {});

// Throws CorruptFile or UnsupportedVersion.
RayMapFile decode_raymap(std::span<const std::uint8_t> bytes);

struct RayCheck {
  bool ok = true;
  double max_norm_error = 0.0;   // max | |d| - 1 |
  double max_bilinear = 0.0;     // max |d . m|
  double center_residual = 0.0;  // RMS residual of the common-center fit
  std::string message;
};

// Unit directions, d.m = 0 and a common center, all at `tolerance`.
RayCheck check_rays(const RayMap& rays, double tolerance);

inline constexpr double kStorageTolerance = 1e-6;

struct RayMapReadOptions {
  bool validate = false;
  double tolerance = kStorageTolerance;
};

void write_raymap(const std::filesystem::path& path, const RayMap& rays,
                  const std::optional<Image>& image = {});
// With options.validate, ray invariants failing at options.tolerance raise
// CorruptFile.
RayMapFile read_raymap(const std::filesystem::path& path, const RayMapReadOptions& options = {});

// ---------------------------------------------------------------------------
// Cameras document (JSON):
//   {"cameras": [{"id": "...", "width": W, "height": H,
//                 "intrinsics": {"fx":..,"fy":..,"cx":..,"cy":..,"skew":..},
//                 "extrinsics": {"rotation": [9 numbers, row-major, world-to-camera],
//                                "translation": [3 numbers, meters]}}]}
// ---------------------------------------------------------------------------

struct CameraEntry {
  std::string id;
  Intrinsics intrinsics;
  CameraPose pose;
};

struct CamerasDoc {
  std::vector<CameraEntry> cameras;

  // Throws SchemaError for an unknown id.
  const CameraEntry& find(std::string_view id) const;
};

struct CamerasReadOptions {
  // Polar-decompose proper rotations that miss the load tolerance instead of
  // rejecting them. Each repair is reported through `log`.
  bool repair = false;
  std::function<void(const std::string&)> log;
};

// Rotations within this of orthonormal load as-is (snapped to the nearest
// rotation); beyond it they are BadRotation unless repair is requested.
inline constexpr double kLoadRotationTolerance = 1e-6;

CamerasDoc parse_cameras(std::string_view text, const CamerasReadOptions& options = {});
std::string format_cameras(const CamerasDoc& doc);
CamerasDoc read_cameras(const std::filesystem::path& path, const CamerasReadOptions& options = {});
void write_cameras(const std::filesystem::path& path, const CamerasDoc& doc);

// ---------------------------------------------------------------------------
// Schedule document:
//   {"n": n, "m": m, "start_index": s, "pool_size": P, "episodes": [[...], ...]}
// ---------------------------------------------------------------------------

std::string format_schedule(const CameraSchedule& schedule);
CameraSchedule parse_schedule(std::string_view text);

// ---------------------------------------------------------------------------
// Pose sampling config (all keys optional except "camera"):
//   {"heading_deg": 0, "azimuth_deg": [-90, 90], "elevation_deg": [30, 60],
//    "radius_m": [0.8, 1.2], "target_box": {"min": [x,y,z], "max": [x,y,z]},
//    "up": [0, 0, 1], "on_degenerate_up": "fail" | "resample",
//    "id_prefix": "cam",
//    "camera": {"width": W, "height": H, "fx":.., "fy":.., "cx":.., "cy":.., "skew": 0}}
// ---------------------------------------------------------------------------

struct PoseSetConfig {
  PoseSamplerConfig sampler;
  Intrinsics intrinsics;
  std::string id_prefix = "cam";
};

PoseSetConfig parse_pose_set_config(std::string_view text);

// ---------------------------------------------------------------------------
// Trajectory document:
//   {"space": "abs_ee" | "delta_ee" | "abs_joint" | "delta_joint",
//    "reference": <step>, "steps": [<step>, ...]}
//   ee step:    {"position": [x,y,z], "orientation": [w,x,y,z], "gripper": g}
//   joint step: {"joints": [...], "gripper": g}
// "gripper" is either present on every step or on none; "reference" is
// required for delta spaces and carries no gripper.
// ---------------------------------------------------------------------------

std::string format_trajectory(const Trajectory& traj);
Trajectory parse_trajectory(std::string_view text);

// ---------------------------------------------------------------------------
// Binary PPM (P6, maxval <= 255) to and from 3-channel float images in [0, 1].
// ---------------------------------------------------------------------------

Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace plucker
