#pragma once

#include <cstdint>
#include <vector>

#include "classic_costs.hpp"
#include "image.hpp"

namespace stereo {

// Per-pixel arm lengths of the upright intensity cross. An arm length of k
// means the arm covers k pixels beyond the anchor; the anchor itself is
// always part of its own support.
struct CrossArms {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> left, right, top, bottom;

  uint8_t arm_left(int x, int y) const { return left[static_cast<size_t>(y) * width + x]; }
  uint8_t arm_right(int x, int y) const { return right[static_cast<size_t>(y) * width + x]; }
  uint8_t arm_top(int x, int y) const { return top[static_cast<size_t>(y) * width + x]; }
  uint8_t arm_bottom(int x, int y) const { return bottom[static_cast<size_t>(y) * width + x]; }
};

// Arms extend while |I(p) - I(arm pixel)| < cbca_intensity and the distance
// to the anchor stays below cbca_distance, stopping at the first violation
// or the image edge. Thresholds apply to preprocessed (normalized) images.
CrossArms compute_arms(const Image& img, float cbca_intensity, int cbca_distance);

// Iterated averaging of the cost over the combined support region
//   U_d(p) = { q : q in U_L(p), q - d in U_R(p - d) },
// where U(p) is the union of horizontal arms of the pixels on p's vertical
// arm. Entries whose match position p - d is out of frame keep their prior
// value. Zero iterations is the identity.
CostVolume aggregate(const CostVolume& cost, const CrossArms& arms_left, const CrossArms& arms_right,
                     int iterations);

}  // namespace stereo
