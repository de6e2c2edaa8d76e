#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace plucker {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Pinhole calibration. K = [[fx, skew, cx], [0, fy, cy], [0, 0, 1]].
class Intrinsics {
 public:
  Intrinsics(double fx, double fy, double cx, double cy, int width, int height,
             double skew = 0.0);

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  double skew() const { return skew_; }
  int width() const { return width_; }
  int height() const { return height_; }

  Mat3 matrix() const;

  bool operator==(const Intrinsics&) const = default;

 private:
  double fx_, fy_, cx_, cy_, skew_;
  int width_, height_;
};

enum class RotationRepair { kReject, kOrthonormalize };

inline constexpr double kRotationTolerance = 1e-9;

// World-to-camera rigid transform: x_cam = R * x_world + t (t in meters).
//
// NOTE: this is the inverse of the camera-to-world "pose" that many robotics
// stacks store. Feeding a camera-to-world matrix here produces a valid but
// wrong camera; nothing can detect that from R alone.
class CameraPose {
 public:
  // Throws BadRotation unless R is orthonormal with det +1 within `tolerance`.
  // With kOrthonormalize, a proper but slightly non-orthonormal R is replaced
  // by its polar factor; reflections are still rejected.
  CameraPose(const Mat3& rotation, const Vec3& translation,
             RotationRepair repair = RotationRepair::kReject,
             double tolerance = kRotationTolerance);

  static CameraPose identity() { return CameraPose(Mat3::Identity(), Vec3::Zero()); }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  // C = -R^T t.
  Vec3 center() const;

  // Maximum absolute entry of R^T R - I.
  static double orthonormality_error(const Mat3& rotation);

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

struct PluckerRay {
  Vec3 direction;  // unit, world frame
  Vec3 moment;     // p x d, meters
};

// H x W grid of Plücker rays, 6 doubles per pixel (dx, dy, dz, mx, my, mz),
// row-major with the pixel (u, v) = (column, row) at offset (v * W + u) * 6.
class RayMap {
 public:
  static constexpr int kChannels = 6;

  RayMap(int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

  PluckerRay ray(int u, int v) const;
  void set_ray(int u, int v, const PluckerRay& ray);

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool operator==(const RayMap&) const = default;

 private:
  int height_, width_;
  std::vector<double> data_;
};

struct RayOptions {
  // Added to integer pixel indices before back-projection. 0.0 reproduces
  // u~ = [u, v, 1] exactly; 0.5 places rays through pixel centers.
  double pixel_center_offset = 0.0;
  // Row-parallelism for ray_map; 0 picks hardware concurrency. Output does not
  // depend on this value.
  unsigned threads = 1;
};

// Closed-form inverse of the upper-triangular K.
Mat3 intrinsics_inverse(const Intrinsics& intr);

Vec3 camera_center(const CameraPose& pose);

// Moment of the line through `point` with direction `direction`.
Vec3 plucker_moment(const Vec3& point, const Vec3& direction);

// Ray through pixel (u, v): d = normalize(R^T K^-1 [u, v, 1]), m = C x d.
PluckerRay pixel_ray(const Intrinsics& intr, const CameraPose& pose, double u, double v,
                     const RayOptions& options = {});

RayMap ray_map(const Intrinsics& intr, const CameraPose& pose, const RayOptions& options = {});

// Pixel coordinates of a world point, in the same convention as pixel_ray
// (the pixel offset is removed). Point must be in front of the camera.
Vec2 project(const Intrinsics& intr, const CameraPose& pose, const Vec3& world_point,
             const RayOptions& options = {});

struct CenterEstimate {
  Vec3 center;
  double residual;  // RMS of |C x d - m| over pixels, meters
};

// Least-squares camera center from the moments of a ray-map:
// (sum I - d d^T) C = sum d x m. Throws DegenerateRays if all directions are
// parallel within 1e-12.
CenterEstimate recover_camera_center(const RayMap& rays);

struct LineMidpoint {
  Vec3 midpoint;
  double gap;  // length of the shortest segment between the two lines
};

// Closest approach of two lines. Throws ParallelRays if |d1 x d2| < 1e-12.
LineMidpoint triangulate(const PluckerRay& first, const PluckerRay& second);

// Nearest rotation by iterated averaging R <- (R + R^-T) / 2. Throws
// BadRotation if det(R) <= 0 or the iteration fails to converge.
Mat3 orthonormalize(const Mat3& rotation);

}  // namespace plucker
