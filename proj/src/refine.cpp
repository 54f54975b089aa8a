#include "refine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "parallel.hpp"

namespace stereo {

DisparityMap wta(const CostVolume& cost) {
  DisparityMap out(cost.width, cost.height);
  parallel_for(0, cost.height, [&](int y) {
    for (int x = 0; x < cost.width; ++x) {
      float best = kSentinelCost;
      int best_d = -1;
      for (int d = 0; d < cost.max_disparity; ++d) {
        const float c = cost.at(x, y, d);
        if (c == kSentinelCost) continue;
        if (c < best) {
          best = c;
          best_d = d;
        }
      }
      out.at(x, y) = best_d < 0 ? kInvalidDisparity : static_cast<float>(best_d);
    }
  });
  return out;
}

LabelMap lr_check(const DisparityMap& left, const DisparityMap& right, int max_disparity) {
  if (!left.same_size(right)) throw Error(Errc::invalid_argument, "disparity map dimensions differ");
  LabelMap out;
  out.width = left.width;
  out.height = left.height;
  out.labels.assign(static_cast<size_t>(left.width) * left.height, LrLabel::occlusion);

  auto holds = [&](int x, int y, int d) {
    if (x - d < 0) return false;
    const float r = right.at(x - d, y);
    return disparity_valid(r) && std::fabs(static_cast<float>(d) - r) <= 1.0f;
  };

  parallel_for(0, left.height, [&](int y) {
    for (int x = 0; x < left.width; ++x) {
      const float dl = left.at(x, y);
      const int d = disparity_valid(dl) ? static_cast<int>(std::lround(dl)) : -1;
      if (d >= 0 && holds(x, y, d)) {
        out.at(x, y) = LrLabel::correct;
        continue;
      }
      LrLabel label = LrLabel::occlusion;
      for (int other = 0; other < max_disparity; ++other) {
        if (other == d) continue;
        if (holds(x, y, other)) {
          label = LrLabel::mismatch;
          break;
        }
      }
      out.at(x, y) = label;
    }
  });
  return out;
}

namespace {

// Median as the upper middle element, so fills stay on the integer
// disparity lattice fed to the subpixel fit.
float median_of(std::vector<float>& vals) {
  const size_t mid = vals.size() / 2;
  std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
  return vals[mid];
}

float nearest_correct_value(const DisparityMap& disp, const LabelMap& labels, int x, int y) {
  long best_d2 = -1;
  float best_val = kInvalidDisparity;
  for (int qy = 0; qy < disp.height; ++qy) {
    for (int qx = 0; qx < disp.width; ++qx) {
      if (labels.at(qx, qy) != LrLabel::correct) continue;
      const long dx = qx - x;
      const long dy = qy - y;
      const long d2 = dx * dx + dy * dy;
      if (best_d2 < 0 || d2 < best_d2) {
        best_d2 = d2;
        best_val = disp.at(qx, qy);
      }
    }
  }
  return best_val;
}

}  // namespace

DisparityMap interpolate(const DisparityMap& disp, const LabelMap& labels) {
  if (labels.width != disp.width || labels.height != disp.height)
    throw Error(Errc::invalid_argument, "label/map dimensions differ");
  bool any_correct = false;
  for (LrLabel l : labels.labels) {
    if (l == LrLabel::correct) {
      any_correct = true;
      break;
    }
  }
  if (!any_correct) throw Error(Errc::degenerate_input, "no correct pixel to interpolate from");

  const int w = disp.width;
  const int h = disp.height;
  DisparityMap out = disp;

  // Mismatch fill walks 16 rays at angles 2*pi*k/16 in unit steps, rounding
  // to the nearest pixel, until it leaves the image or hits a correct pixel.
  struct Dir {
    float dx, dy;
  };
  std::vector<Dir> dirs(16);
  for (int k = 0; k < 16; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 16.0;
    dirs[k] = {static_cast<float>(std::cos(a)), static_cast<float>(std::sin(a))};
  }
  const int max_steps = 2 * (w + h);

  parallel_for(0, h, [&](int y) {
    std::vector<float> hits;
    for (int x = 0; x < w; ++x) {
      const LrLabel label = labels.at(x, y);
      if (label == LrLabel::correct) continue;
      if (label == LrLabel::occlusion) {
        float fill = kInvalidDisparity;
        for (int qx = x - 1; qx >= 0; --qx) {
          if (labels.at(qx, y) == LrLabel::correct) {
            fill = disp.at(qx, y);
            break;
          }
        }
        if (!disparity_valid(fill)) {
          for (int qx = x + 1; qx < w; ++qx) {
            if (labels.at(qx, y) == LrLabel::correct) {
              fill = disp.at(qx, y);
              break;
            }
          }
        }
        if (disparity_valid(fill)) {
          out.at(x, y) = fill;
          continue;
        }
        // No correct pixel on the whole row; fall through to the ray median.
      }
      hits.clear();
      for (const Dir& dir : dirs) {
        for (int t = 1; t <= max_steps; ++t) {
          const int qx = static_cast<int>(std::lround(x + t * dir.dx));
          const int qy = static_cast<int>(std::lround(y + t * dir.dy));
          if (qx < 0 || qx >= w || qy < 0 || qy >= h) break;  // ray contributes nothing
          if (labels.at(qx, qy) == LrLabel::correct) {
            hits.push_back(disp.at(qx, qy));
            break;
          }
        }
      }
      out.at(x, y) = hits.empty() ? nearest_correct_value(disp, labels, x, y) : median_of(hits);
    }
  });
  return out;
}

DisparityMap subpixel(const DisparityMap& disp, const CostVolume& cost) {
  if (disp.width != cost.width || disp.height != cost.height)
    throw Error(Errc::invalid_argument, "map/volume dimensions differ");
  DisparityMap out = disp;
  parallel_for(0, disp.height, [&](int y) {
    for (int x = 0; x < disp.width; ++x) {
      const float v = disp.at(x, y);
      if (!disparity_valid(v)) continue;
      const int d = static_cast<int>(std::lround(v));
      if (d - 1 < 0 || d + 1 >= cost.max_disparity) continue;
      const float cm = cost.at(x, y, d - 1);
      const float cc = cost.at(x, y, d);
      const float cp = cost.at(x, y, d + 1);
      if (cm == kSentinelCost || cc == kSentinelCost || cp == kSentinelCost) continue;
      const float den = cp - 2.0f * cc + cm;
      if (std::fabs(den) < 1e-9f) continue;
      out.at(x, y) = static_cast<float>(d) - (cp - cm) / (2.0f * den);
    }
  });
  return out;
}

DisparityMap median5(const DisparityMap& disp) {
  DisparityMap out = disp;
  parallel_for(0, disp.height, [&](int y) {
    std::vector<float> window;
    window.reserve(25);
    for (int x = 0; x < disp.width; ++x) {
      if (!disparity_valid(disp.at(x, y))) continue;
      window.clear();
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          const int qx = std::clamp(x + dx, 0, disp.width - 1);
          const int qy = std::clamp(y + dy, 0, disp.height - 1);
          const float v = disp.at(qx, qy);
          if (disparity_valid(v)) window.push_back(v);
        }
      }
      out.at(x, y) = median_of(window);
    }
  });
  return out;
}

DisparityMap bilateral(const DisparityMap& disp, const Image& left, float blur_sigma, float blur_threshold) {
  if (left.width != disp.width || left.height != disp.height)
    throw Error(Errc::invalid_argument, "image/map dimensions differ");
  if (!(blur_sigma > 0.0f)) throw Error(Errc::invalid_argument, "blur_sigma must be positive");

  const int radius = static_cast<int>(std::ceil(3.0f * blur_sigma));
  const double inv_two_sigma_sq = 1.0 / (2.0 * static_cast<double>(blur_sigma) * blur_sigma);
  DisparityMap out = disp;
  parallel_for(0, disp.height, [&](int y) {
    for (int x = 0; x < disp.width; ++x) {
      if (!disparity_valid(disp.at(x, y))) continue;
      const float center = left.at(x, y);
      double weight_sum = 0.0;
      double value_sum = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int qy = y + dy;
        if (qy < 0 || qy >= disp.height) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
          const int qx = x + dx;
          if (qx < 0 || qx >= disp.width) continue;
          const float v = disp.at(qx, qy);
          if (!disparity_valid(v)) continue;
          if (!(std::fabs(center - left.at(qx, qy)) < blur_threshold)) continue;
          const double g = std::exp(-static_cast<double>(dx * dx + dy * dy) * inv_two_sigma_sq);
          weight_sum += g;
          value_sum += g * v;
        }
      }
      out.at(x, y) = static_cast<float>(value_sum / weight_sum);  // the center always contributes
    }
  });
  return out;
}

}  // namespace stereo
