#include "plucker_rig/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "plucker_rig/error.hpp"

namespace plucker {

Image::Image(int height, int width, int channels)
    : Image(height, width, channels,
            std::vector<float>(static_cast<std::size_t>(std::max(height, 0)) *
                               std::max(width, 0) * std::max(channels, 0))) {}

Image::Image(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height < 0 || width < 0 || channels < 1) {
    throw Error(ErrorCode::kShapeMismatch, "invalid image dimensions");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw Error(ErrorCode::kShapeMismatch, "image buffer size does not match dimensions");
  }
}

void check_rect(const CropRect& rect, int source_width, int source_height) {
  const bool ok = rect.x0 >= 0 && rect.y0 >= 0 && rect.w >= 1 && rect.h >= 1 &&
                  static_cast<long long>(rect.x0) + rect.w <= source_width &&
                  static_cast<long long>(rect.y0) + rect.h <= source_height;
  if (!ok) {
    throw Error(ErrorCode::kRectOutOfBounds,
                "rect (" + std::to_string(rect.x0) + "," + std::to_string(rect.y0) + "," +
                    std::to_string(rect.w) + "," + std::to_string(rect.h) + ") outside " +
                    std::to_string(source_width) + "x" + std::to_string(source_height));
  }
}

CropRect compose_crops(const CropRect& outer, const CropRect& inner) {
  check_rect(inner, outer.w, outer.h);
  return {outer.x0 + inner.x0, outer.y0 + inner.y0, inner.w, inner.h};
}

Intrinsics crop_intrinsics(const Intrinsics& intr, const CropRect& rect) {
  check_rect(rect, intr.width(), intr.height());
  return Intrinsics(intr.fx(), intr.fy(), intr.cx() - rect.x0, intr.cy() - rect.y0, rect.w,
                    rect.h, intr.skew());
}

RayMap crop_ray_map(const RayMap& rays, const CropRect& rect) {
  check_rect(rect, rays.width(), rays.height());
  RayMap out(rect.h, rect.w);
  const auto src = rays.data();
  auto dst = out.data();
  const std::size_t row_len = static_cast<std::size_t>(rect.w) * RayMap::kChannels;
  for (int v = 0; v < rect.h; ++v) {
    const std::size_t from =
        (static_cast<std::size_t>(v + rect.y0) * rays.width() + rect.x0) * RayMap::kChannels;
    std::copy_n(src.begin() + from, row_len, dst.begin() + v * row_len);
  }
  return out;
}

Image crop_image(const Image& image, const CropRect& rect) {
  check_rect(rect, image.width(), image.height());
  Image out(rect.h, rect.w, image.channels());
  const auto src = image.data();
  auto dst = out.data();
  const std::size_t row_len = static_cast<std::size_t>(rect.w) * image.channels();
  for (int v = 0; v < rect.h; ++v) {
    const std::size_t from =
        (static_cast<std::size_t>(v + rect.y0) * image.width() + rect.x0) * image.channels();
    std::copy_n(src.begin() + from, row_len, dst.begin() + v * row_len);
  }
  return out;
}

std::pair<Image, RayMap> joint_crop(const Image& image, const RayMap& rays, const CropRect& rect) {
  if (image.height() != rays.height() || image.width() != rays.width()) {
    throw Error(ErrorCode::kShapeMismatch, "image and ray-map sizes differ");
  }
  return {crop_image(image, rect), crop_ray_map(rays, rect)};
}

CropRect sample_crop(Rng& rng, int source_height, int source_width, int crop_height,
                     int crop_width) {
  if (crop_height < 1 || crop_width < 1 || crop_height > source_height ||
      crop_width > source_width) {
    throw Error(ErrorCode::kCropLargerThanSource,
                "crop " + std::to_string(crop_width) + "x" + std::to_string(crop_height) +
                    " does not fit source " + std::to_string(source_width) + "x" +
                    std::to_string(source_height));
  }
  const int x0 = static_cast<int>(rng.uniform_int(0, source_width - crop_width));
  const int y0 = static_cast<int>(rng.uniform_int(0, source_height - crop_height));
  return {x0, y0, crop_width, crop_height};
}

std::pair<int, int> crop_size_for_fraction(int source_height, int source_width, double fraction) {
  auto side = [fraction](int n) {
    return std::clamp(static_cast<int>(std::lround(fraction * n)), 1, n);
  };
  return {side(source_height), side(source_width)};
}

Intrinsics resize_intrinsics(const Intrinsics& intr, int new_width, int new_height) {
  if (new_width < 1 || new_height < 1) {
    throw Error(ErrorCode::kInvalidIntrinsics, "resize target must be at least 1x1");
  }
  const double sx = static_cast<double>(new_width) / intr.width();
  const double sy = static_cast<double>(new_height) / intr.height();
  return Intrinsics(intr.fx() * sx, intr.fy() * sy, intr.cx() * sx, intr.cy() * sy, new_width,
                    new_height, intr.skew() * sx);
}

Image resize_image(const Image& image, int new_width, int new_height, Resample method) {
  if (new_width < 1 || new_height < 1) {
    throw Error(ErrorCode::kShapeMismatch, "resize target must be at least 1x1");
  }
  Image out(new_height, new_width, image.channels());
  const double sx = static_cast<double>(image.width()) / new_width;
  const double sy = static_cast<double>(image.height()) / new_height;
  const int max_u = image.width() - 1;
  const int max_v = image.height() - 1;
  for (int v = 0; v < new_height; ++v) {
    for (int u = 0; u < new_width; ++u) {
      const double su = u * sx;
      const double sv = v * sy;
      for (int c = 0; c < image.channels(); ++c) {
        if (method == Resample::kNearest) {
          const int nu = std::clamp(static_cast<int>(std::lround(su)), 0, max_u);
          const int nv = std::clamp(static_cast<int>(std::lround(sv)), 0, max_v);
          out.at(u, v, c) = image.at(nu, nv, c);
        } else {
          const int u0 = std::clamp(static_cast<int>(std::floor(su)), 0, max_u);
          const int v0 = std::clamp(static_cast<int>(std::floor(sv)), 0, max_v);
          const int u1 = std::min(u0 + 1, max_u);
          const int v1 = std::min(v0 + 1, max_v);
          const double a = std::clamp(su - u0, 0.0, 1.0);
          const double b = std::clamp(sv - v0, 0.0, 1.0);
          const double top = (1 - a) * image.at(u0, v0, c) + a * image.at(u1, v0, c);
          const double bottom = (1 - a) * image.at(u0, v1, c) + a * image.at(u1, v1, c);
          out.at(u, v, c) = static_cast<float>((1 - b) * top + b * bottom);
        }
      }
    }
  }
  return out;
}

}  // namespace plucker
