#pragma once

#include <span>
#include <utility>
#include <vector>

#include "plucker_rig/geometry.hpp"
#include "plucker_rig/random.hpp"

namespace plucker {

// H x W x C float image, row-major, channels interleaved.
class Image {
 public:
  Image(int height, int width, int channels);
  Image(int height, int width, int channels, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }

  float at(int u, int v, int c) const {
    return data_[(static_cast<std::size_t>(v) * width_ + u) * channels_ + c];
  }
  float& at(int u, int v, int c) {
    return data_[(static_cast<std::size_t>(v) * width_ + u) * channels_ + c];
  }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int height_, width_, channels_;
  std::vector<float> data_;
};

// Axis-aligned integer window: columns [x0, x0 + w), rows [y0, y0 + h).
struct CropRect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  bool operator==(const CropRect&) const = default;
};

// Throws RectOutOfBounds unless 0 <= x0, 0 <= y0, w, h >= 1 and the rect fits.
void check_rect(const CropRect& rect, int source_width, int source_height);

// Rect `inner`, expressed in the coordinates of a crop by `outer`, mapped back
// to the original image.
CropRect compose_crops(const CropRect& outer, const CropRect& inner);

// The virtual camera seen through the crop window: principal point shifted by
// (x0, y0), image size set to the window.
Intrinsics crop_intrinsics(const Intrinsics& intr, const CropRect& rect);

RayMap crop_ray_map(const RayMap& rays, const CropRect& rect);
Image crop_image(const Image& image, const CropRect& rect);

// Crops image and ray-map by the same window. Values are copied, never
// resampled.
std::pair<Image, RayMap> joint_crop(const Image& image, const RayMap& rays, const CropRect& rect);

// Uniform top-left corner for an h x w window inside an H x W source.
CropRect sample_crop(Rng& rng, int source_height, int source_width, int crop_height,
                     int crop_width);

// Crop side lengths at `fraction` of the source (rounded, at least 1 pixel).
std::pair<int, int> crop_size_for_fraction(int source_height, int source_width, double fraction);

// Scales fx, cx by new_width / width and fy, cy by new_height / height. Skew
// scales with the horizontal ratio.
Intrinsics resize_intrinsics(const Intrinsics& intr, int new_width, int new_height);

enum class Resample { kNearest, kBilinear };

// Image resampling consistent with resize_intrinsics: output pixel (u', v')
// samples source coordinate (u' * width / new_width, v' * height / new_height).
// Ray-maps are never resized; regenerate them from resize_intrinsics instead.
Image resize_image(const Image& image, int new_width, int new_height, Resample method);

}  // namespace plucker
