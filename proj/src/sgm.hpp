#pragma once

#include "classic_costs.hpp"
#include "image.hpp"

namespace stereo {

struct SgmParams {
  float p1 = 2.3f;         // base penalty for |delta d| = 1
  float p2 = 42.3f;        // base penalty for |delta d| > 1
  float q1 = 3.0f;         // divisor when one gradient is strong
  float q2 = 6.0f;         // divisor when both gradients are strong
  float d_threshold = 0.08f;  // intensity-difference threshold (preprocessed scale)
  float v = 1.25f;         // extra P1 divisor for the vertical directions
};

struct PenaltyPair {
  float p1;
  float p2;
};

// Gradient-adaptive penalties. d1/d2 are the absolute intensity differences
// along the sweep direction in the left and right image; vertical sweeps get
// p1 further divided by sgm_V.
PenaltyPair sgm_penalties(float d1, float d2, const SgmParams& params, bool vertical);

// One directional dynamic-programming pass, r in {(1,0),(-1,0),(0,1),(0,-1)}.
// Scanline-initial pixels take the raw cost; out-of-range d +/- 1 neighbors
// are excluded from the minimum; sentinel entries pass through unchanged and
// are never selected by any minimum.
CostVolume sweep_direction(const CostVolume& cost, const Image& left, const Image& right, int rx, int ry,
                           const SgmParams& params);

// Mean of the four directional sweeps.
CostVolume semiglobal(const CostVolume& cost, const Image& left, const Image& right, const SgmParams& params);

}  // namespace stereo
