#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "image.hpp"

namespace stereo {

// Cost assigned to disparities whose match position falls outside the right
// image (x - d < 0). Exactly representable in float so it survives averaging.
inline constexpr float kSentinelCost = 1e9f;

// w x h x max_disparity matching costs, row-major [y][x][d].
// Lower is better for every producer in the system.
struct CostVolume {
  int width = 0;
  int height = 0;
  int max_disparity = 0;
  std::vector<float> data;

  CostVolume() = default;
  CostVolume(int w, int h, int d, float fill = 0.0f);

  size_t index(int x, int y, int d) const {
    return (static_cast<size_t>(y) * width + x) * max_disparity + d;
  }
  float at(int x, int y, int d) const { return data[index(x, y, d)]; }
  float& at(int x, int y, int d) { return data[index(x, y, d)]; }
  bool same_shape(const CostVolume& o) const {
    return width == o.width && height == o.height && max_disparity == o.max_disparity;
  }
};

// Per-pixel brightness-comparison bit vectors: bit k (row-major within the
// window) is set iff the center is strictly brighter than neighbor k, with
// clamp-to-edge sampling. The self-comparison bit is always 0. Bits are
// packed little-endian into 64-bit words (bit k lives in word k/64 at k%64).
struct CensusField {
  int width = 0;
  int height = 0;
  int window = 0;
  int words_per_pixel = 0;
  std::vector<uint64_t> bits;

  int bits_per_pixel() const { return window * window; }
  const uint64_t* at(int x, int y) const {
    return bits.data() + (static_cast<size_t>(y) * width + x) * words_per_pixel;
  }
};

// Sum of absolute intensity differences over a patch_size x patch_size window,
// clamp-to-edge sampling.
CostVolume sad_volume(const Image& left, const Image& right, int max_disparity, int patch_size = 9);

CensusField census_transform(const Image& img, int window = 9);

// Hamming distance between census vectors at p and p - d.
CostVolume census_volume(const CensusField& left, const CensusField& right, int max_disparity);

// Negated normalized cross-correlation (cosine similarity of raw patches),
// so that lower = better like every other producer. Zero-norm patches get
// the sentinel cost.
CostVolume ncc_volume(const Image& left, const Image& right, int max_disparity, int window = 11);

// Raw dump: "STCV", u32 w/h/d_max, then row-major [y][x][d] float32, all
// little-endian.
void save_cost_volume(const CostVolume& vol, const std::string& path);
CostVolume load_cost_volume(const std::string& path);

}  // namespace stereo
