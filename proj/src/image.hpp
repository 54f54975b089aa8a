#pragma once

#include <cstddef>
#include <vector>

#include "error.hpp"

namespace stereo {

// Marker for pixels with no disparity estimate. Negative rather than NaN so
// that ordering comparisons against valid disparities stay total.
inline constexpr float kInvalidDisparity = -1.0f;

inline bool disparity_valid(float d) { return d >= 0.0f; }

// Single-channel intensity grid, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.0f);

  float at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  float& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  float at_clamped(int x, int y) const;
  bool same_size(const Image& o) const { return width == o.width && height == o.height; }
};

// Per-pixel real disparity, row-major; kInvalidDisparity marks holes.
struct DisparityMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  DisparityMap() = default;
  DisparityMap(int w, int h, float fill = kInvalidDisparity);

  float at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  float& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  bool same_size(const DisparityMap& o) const { return width == o.width && height == o.height; }
};

// (x - mean) / population standard deviation. Throws a degenerate-input
// error for constant images.
Image normalize(const Image& img);

// Bilinear sample at real coordinates, clamped to the image rectangle.
float bilinear_sample(const Image& img, float x, float y);

Image flip_horizontal(const Image& img);
DisparityMap flip_horizontal(const DisparityMap& map);

}  // namespace stereo
