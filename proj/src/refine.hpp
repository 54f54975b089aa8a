#pragma once

#include <cstdint>
#include <vector>

#include "classic_costs.hpp"
#include "image.hpp"

namespace stereo {

enum class LrLabel : uint8_t { correct, mismatch, occlusion };

struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<LrLabel> labels;

  LrLabel at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
  LrLabel& at(int x, int y) { return labels[static_cast<size_t>(y) * width + x]; }
};

// Winner-takes-all: argmin over d, ties toward smaller d. Pixels with only
// sentinel costs come out invalid.
DisparityMap wta(const CostVolume& cost);

// Left-right consistency labels, rules applied in order:
//   correct   if |d - right(p - d)| <= 1 for d = left(p)
//   mismatch  if that holds for any other d in [0, max_disparity)
//   occlusion otherwise.
// Out-of-frame lookups fail the check.
LabelMap lr_check(const DisparityMap& left, const DisparityMap& right, int max_disparity);

// Occlusion pixels take the first correct value to the left (falling back to
// the right on the same row); mismatch pixels take the median of the nearest
// correct values along 16 evenly spaced rays. Values are read from the input
// map, never from earlier fills.
DisparityMap interpolate(const DisparityMap& disp, const LabelMap& labels);

// Parabola fit through (d-1, d, d+1) of the (post-SGM) cost volume:
//   d - (C+ - C-) / (2 (C+ - 2C + C-)).
// Pixels at the disparity range edges, with a sentinel neighbor, or with a
// near-zero denominator keep their integer value.
DisparityMap subpixel(const DisparityMap& disp, const CostVolume& cost);

// 5x5 median, clamp-to-edge; invalid samples are excluded and invalid
// centers pass through unchanged.
DisparityMap median5(const DisparityMap& disp);

// Edge-preserving smoothing: spatial Gaussian of std blur_sigma gated by
// |I(p) - I(q)| < blur_threshold, over a square window of radius
// ceil(3 * blur_sigma). Invalid neighbors are excluded.
DisparityMap bilateral(const DisparityMap& disp, const Image& left, float blur_sigma, float blur_threshold);

}  // namespace stereo
