#include "sgm.hpp"

#include <cmath>
#include <limits>

#include "parallel.hpp"

namespace stereo {

PenaltyPair sgm_penalties(float d1, float d2, const SgmParams& params, bool vertical) {
  PenaltyPair out{};
  if (d1 < params.d_threshold && d2 < params.d_threshold) {
    out = {params.p1, params.p2};
  } else if (d1 >= params.d_threshold && d2 >= params.d_threshold) {
    out = {params.p1 / params.q2, params.p2 / params.q2};
  } else {
    out = {params.p1 / params.q1, params.p2 / params.q1};
  }
  if (vertical) out.p1 /= params.v;
  return out;
}

namespace {

// Sequential recurrence along one scanline. prev holds C_r at p - r.
void step_pixel(const CostVolume& cost, const Image& left, const Image& right, int x, int y, int rx, int ry,
                bool vertical, const SgmParams& params, const float* prev, float* out) {
  const int dmax = cost.max_disparity;

  float prev_min = std::numeric_limits<float>::infinity();
  for (int d = 0; d < dmax; ++d) {
    if (prev[d] != kSentinelCost && prev[d] < prev_min) prev_min = prev[d];
  }

  const float d1 = std::fabs(left.at(x, y) - left.at(x - rx, y - ry));
  for (int d = 0; d < dmax; ++d) {
    const float raw = cost.at(x, y, d);
    if (raw == kSentinelCost) {
      out[d] = kSentinelCost;
      continue;
    }
    // Right-image gradient at the match position; out-of-frame lookups
    // count as below threshold.
    const int mx = x - d;
    const int mxp = mx - rx;
    const int myp = y - ry;
    float d2 = 0.0f;
    if (mx >= 0 && mx < right.width && mxp >= 0 && mxp < right.width && myp >= 0 && myp < right.height) {
      d2 = std::fabs(right.at(mx, y) - right.at(mxp, myp));
    }
    const PenaltyPair pen = sgm_penalties(d1, d2, params, vertical);

    float best = prev_min + pen.p2;
    if (prev[d] != kSentinelCost && prev[d] < best) best = prev[d];
    if (d - 1 >= 0 && prev[d - 1] != kSentinelCost && prev[d - 1] + pen.p1 < best) best = prev[d - 1] + pen.p1;
    if (d + 1 < dmax && prev[d + 1] != kSentinelCost && prev[d + 1] + pen.p1 < best) best = prev[d + 1] + pen.p1;
    out[d] = raw + best - prev_min;
  }
}

}  // namespace

CostVolume sweep_direction(const CostVolume& cost, const Image& left, const Image& right, int rx, int ry,
                           const SgmParams& params) {
  if (!((std::abs(rx) == 1 && ry == 0) || (rx == 0 && std::abs(ry) == 1)))
    throw Error(Errc::invalid_argument, "direction must be axis-aligned unit step");
  if (left.width != cost.width || left.height != cost.height || !left.same_size(right))
    throw Error(Errc::invalid_argument, "image/volume dimensions differ");

  const int w = cost.width;
  const int h = cost.height;
  const int dmax = cost.max_disparity;
  const bool vertical = rx == 0;
  CostVolume out(w, h, dmax);

  if (!vertical) {
    parallel_for(0, h, [&](int y) {
      const int x0 = rx > 0 ? 0 : w - 1;
      for (int d = 0; d < dmax; ++d) out.at(x0, y, d) = cost.at(x0, y, d);
      for (int i = 1; i < w; ++i) {
        const int x = rx > 0 ? i : w - 1 - i;
        step_pixel(cost, left, right, x, y, rx, ry, vertical, params, &out.at(x - rx, y, 0), &out.at(x, y, 0));
      }
    });
  } else {
    parallel_for(0, w, [&](int x) {
      const int y0 = ry > 0 ? 0 : h - 1;
      for (int d = 0; d < dmax; ++d) out.at(x, y0, d) = cost.at(x, y0, d);
      for (int i = 1; i < h; ++i) {
        const int y = ry > 0 ? i : h - 1 - i;
        step_pixel(cost, left, right, x, y, rx, ry, vertical, params, &out.at(x, y - ry, 0), &out.at(x, y, 0));
      }
    });
  }
  return out;
}

CostVolume semiglobal(const CostVolume& cost, const Image& left, const Image& right, const SgmParams& params) {
  const CostVolume east = sweep_direction(cost, left, right, 1, 0, params);
  const CostVolume west = sweep_direction(cost, left, right, -1, 0, params);
  const CostVolume south = sweep_direction(cost, left, right, 0, 1, params);
  const CostVolume north = sweep_direction(cost, left, right, 0, -1, params);

  CostVolume out(cost.width, cost.height, cost.max_disparity);
  for (size_t i = 0; i < out.data.size(); ++i) {
    if (cost.data[i] == kSentinelCost) {
      out.data[i] = kSentinelCost;
      continue;
    }
    out.data[i] = 0.25f * (east.data[i] + west.data[i] + south.data[i] + north.data[i]);
  }
  return out;
}

}  // namespace stereo
