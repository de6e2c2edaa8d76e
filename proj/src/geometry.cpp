#include "plucker_rig/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include <Eigen/Dense>

#include "plucker_rig/error.hpp"

namespace plucker {

Intrinsics::Intrinsics(double fx, double fy, double cx, double cy, int width, int height,
                       double skew)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), skew_(skew), width_(width), height_(height) {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw Error(ErrorCode::kInvalidIntrinsics, "focal lengths must be positive and finite");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(skew)) {
    throw Error(ErrorCode::kInvalidIntrinsics, "principal point and skew must be finite");
  }
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidIntrinsics, "image size must be at least 1x1");
  }
}

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx_, skew_, cx_, 0.0, fy_, cy_, 0.0, 0.0, 1.0;
  return k;
}

double CameraPose::orthonormality_error(const Mat3& rotation) {
  return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
}

namespace {

bool is_proper_rotation(const Mat3& r, double tolerance) {
  if (!r.allFinite()) return false;
  return CameraPose::orthonormality_error(r) <= tolerance &&
         std::abs(r.determinant() - 1.0) <= tolerance;
}

}  // namespace

CameraPose::CameraPose(const Mat3& rotation, const Vec3& translation, RotationRepair repair,
                       double tolerance)
    : rotation_(rotation), translation_(translation) {
  if (!translation.allFinite()) {
    throw Error(ErrorCode::kBadRotation, "translation must be finite");
  }
  if (is_proper_rotation(rotation_, tolerance)) return;
  if (repair == RotationRepair::kOrthonormalize && rotation.allFinite()) {
    rotation_ = orthonormalize(rotation);
    if (is_proper_rotation(rotation_, kRotationTolerance)) return;
  }
  throw Error(ErrorCode::kBadRotation,
              "rotation is not orthonormal with det +1 (orthonormality error " +
                  std::to_string(orthonormality_error(rotation)) + ", det " +
                  std::to_string(rotation.determinant()) + ")");
}

Vec3 CameraPose::center() const { return -(rotation_.transpose() * translation_); }

RayMap::RayMap(int height, int width) : height_(height), width_(width) {
  if (height < 0 || width < 0) {
    throw Error(ErrorCode::kShapeMismatch, "ray-map dimensions must be non-negative");
  }
  data_.assign(static_cast<std::size_t>(height) * width * kChannels, 0.0);
}

PluckerRay RayMap::ray(int u, int v) const {
  const double* p = data_.data() + (static_cast<std::size_t>(v) * width_ + u) * kChannels;
  return {Vec3(p[0], p[1], p[2]), Vec3(p[3], p[4], p[5])};
}

void RayMap::set_ray(int u, int v, const PluckerRay& ray) {
  double* p = data_.data() + (static_cast<std::size_t>(v) * width_ + u) * kChannels;
  p[0] = ray.direction.x();
  p[1] = ray.direction.y();
  p[2] = ray.direction.z();
  p[3] = ray.moment.x();
  p[4] = ray.moment.y();
  p[5] = ray.moment.z();
}

Mat3 intrinsics_inverse(const Intrinsics& intr) {
  const double fx = intr.fx(), fy = intr.fy(), cx = intr.cx(), cy = intr.cy(), s = intr.skew();
  Mat3 inv;
  inv << 1.0 / fx, -s / (fx * fy), (s * cy - cx * fy) / (fx * fy),
         0.0, 1.0 / fy, -cy / fy,
         0.0, 0.0, 1.0;
  return inv;
}

Vec3 camera_center(const CameraPose& pose) { return pose.center(); }

Vec3 plucker_moment(const Vec3& point, const Vec3& direction) { return point.cross(direction); }

namespace {

// Shared by pixel_ray and ray_map so that both produce bit-identical rays.
struct Backprojector {
  Mat3 rt_kinv;  // R^T K^-1
  Vec3 center;
  double offset;

  Backprojector(const Intrinsics& intr, const CameraPose& pose, double pixel_offset)
      : rt_kinv(pose.rotation().transpose() * intrinsics_inverse(intr)),
        center(pose.center()),
        offset(pixel_offset) {}

  PluckerRay operator()(double u, double v) const {
    const Vec3 homogeneous(u + offset, v + offset, 1.0);
    const Vec3 direction = (rt_kinv * homogeneous).normalized();
    return {direction, center.cross(direction)};
  }
};

unsigned resolve_threads(unsigned requested, int rows) {
  unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return std::max(1u, std::min<unsigned>(n, static_cast<unsigned>(std::max(rows, 1))));
}

}  // namespace

PluckerRay pixel_ray(const Intrinsics& intr, const CameraPose& pose, double u, double v,
                     const RayOptions& options) {
  return Backprojector(intr, pose, options.pixel_center_offset)(u, v);
}

RayMap ray_map(const Intrinsics& intr, const CameraPose& pose, const RayOptions& options) {
  const int height = intr.height();
  const int width = intr.width();
  RayMap out(height, width);
  const Backprojector backproject(intr, pose, options.pixel_center_offset);

  auto fill_rows = [&](int row_begin, int row_end) {
    for (int v = row_begin; v < row_end; ++v) {
      for (int u = 0; u < width; ++u) {
        out.set_ray(u, v, backproject(u, v));
      }
    }
  };

  const unsigned threads = resolve_threads(options.threads, height);
  if (threads == 1) {
    fill_rows(0, height);
    return out;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  const int chunk = (height + static_cast<int>(threads) - 1) / static_cast<int>(threads);
  for (int begin = 0; begin < height; begin += chunk) {
    workers.emplace_back(fill_rows, begin, std::min(height, begin + chunk));
  }
  return out;
}

Vec2 project(const Intrinsics& intr, const CameraPose& pose, const Vec3& world_point,
             const RayOptions& options) {
  const Vec3 cam = pose.rotation() * world_point + pose.translation();
  const Vec3 pix = intr.matrix() * cam;
  return Vec2(pix.x() / pix.z() - options.pixel_center_offset,
              pix.y() / pix.z() - options.pixel_center_offset);
}

CenterEstimate recover_camera_center(const RayMap& rays) {
  const int height = rays.height();
  const int width = rays.width();
  if (rays.pixel_count() == 0) {
    throw Error(ErrorCode::kDegenerateRays, "empty ray-map");
  }

  const Vec3 first = rays.ray(0, 0).direction;
  double max_spread = 0.0;
  Mat3 normal = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const PluckerRay r = rays.ray(u, v);
      normal += Mat3::Identity() - r.direction * r.direction.transpose();
      rhs += r.direction.cross(r.moment);
      max_spread = std::max(max_spread, first.cross(r.direction).norm());
    }
  }
  if (max_spread < 1e-12) {
    throw Error(ErrorCode::kDegenerateRays,
                "all ray directions are parallel; center is unobservable along them");
  }

  const Vec3 center = normal.ldlt().solve(rhs);
  double sum_sq = 0.0;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const PluckerRay r = rays.ray(u, v);
      sum_sq += (center.cross(r.direction) - r.moment).squaredNorm();
    }
  }
  return {center, std::sqrt(sum_sq / static_cast<double>(rays.pixel_count()))};
}

LineMidpoint triangulate(const PluckerRay& first, const PluckerRay& second) {
  const Vec3& d1 = first.direction;
  const Vec3& d2 = second.direction;
  if (d1.cross(d2).norm() < 1e-12) {
    throw Error(ErrorCode::kParallelRays, "rays are parallel");
  }
  // Point of each line closest to the origin (d is unit).
  const Vec3 p1 = d1.cross(first.moment);
  const Vec3 p2 = d2.cross(second.moment);

  const Vec3 w0 = p1 - p2;
  const double b = d1.dot(d2);
  const double d = d1.dot(w0);
  const double e = d2.dot(w0);
  const double denom = 1.0 - b * b;
  const double s = (b * e - d) / denom;
  const double t = (e - b * d) / denom;

  const Vec3 q1 = p1 + s * d1;
  const Vec3 q2 = p2 + t * d2;
  return {0.5 * (q1 + q2), (q1 - q2).norm()};
}

Mat3 orthonormalize(const Mat3& rotation) {
  if (!rotation.allFinite() || !(rotation.determinant() > 0.0)) {
    throw Error(ErrorCode::kBadRotation, "cannot orthonormalize a reflection or singular matrix");
  }
  Mat3 r = rotation;
  for (int iter = 0; iter < 100; ++iter) {
    const Mat3 next = 0.5 * (r + r.inverse().transpose());
    const double change = (next - r).cwiseAbs().maxCoeff();
    r = next;
    if (change < 1e-15) break;
  }
  if (CameraPose::orthonormality_error(r) > 1e-12) {
    throw Error(ErrorCode::kBadRotation, "orthonormalization did not converge");
  }
  return r;
}

}  // namespace plucker
