#include "cbca.hpp"

#include <cmath>

#include "parallel.hpp"

namespace stereo {

CrossArms compute_arms(const Image& img, float cbca_intensity, int cbca_distance) {
  if (cbca_distance < 1 || cbca_distance > 255)
    throw Error(Errc::invalid_argument, "cbca_distance out of range");
  CrossArms arms;
  arms.width = img.width;
  arms.height = img.height;
  const size_t n = static_cast<size_t>(img.width) * img.height;
  arms.left.assign(n, 0);
  arms.right.assign(n, 0);
  arms.top.assign(n, 0);
  arms.bottom.assign(n, 0);

  auto scan = [&](int x, int y, int dx, int dy) {
    const float anchor = img.at(x, y);
    int len = 0;
    while (len + 1 < cbca_distance) {
      const int nx = x + dx * (len + 1);
      const int ny = y + dy * (len + 1);
      if (nx < 0 || nx >= img.width || ny < 0 || ny >= img.height) break;
      if (!(std::fabs(anchor - img.at(nx, ny)) < cbca_intensity)) break;
      ++len;
    }
    return static_cast<uint8_t>(len);
  };

  parallel_for(0, img.height, [&](int y) {
    for (int x = 0; x < img.width; ++x) {
      const size_t i = static_cast<size_t>(y) * img.width + x;
      arms.left[i] = scan(x, y, -1, 0);
      arms.right[i] = scan(x, y, 1, 0);
      arms.top[i] = scan(x, y, 0, -1);
      arms.bottom[i] = scan(x, y, 0, 1);
    }
  });
  return arms;
}

CostVolume aggregate(const CostVolume& cost, const CrossArms& arms_left, const CrossArms& arms_right,
                     int iterations) {
  if (iterations < 0) throw Error(Errc::invalid_argument, "iterations must be >= 0");
  if (arms_left.width != cost.width || arms_left.height != cost.height ||
      arms_right.width != cost.width || arms_right.height != cost.height)
    throw Error(Errc::invalid_argument, "arms/volume dimensions differ");
  if (iterations == 0) return cost;

  const int w = cost.width;
  const int h = cost.height;
  const int dmax = cost.max_disparity;

  // The combined region intersects the left support of p with the shifted
  // right support of p - d; row by row that is a component-wise min of arm
  // pairs, which is what the two passes below sum over. Every member q has
  // q.x - d >= 0 (right arms cannot cross the image edge), so no sentinel
  // entry can enter an average.
  CostVolume cur = cost;
  CostVolume next(w, h, dmax);
  std::vector<double> hsum(static_cast<size_t>(w) * h);
  std::vector<int> hcnt(static_cast<size_t>(w) * h);
  std::vector<double> prefix(static_cast<size_t>(w) + 1);

  for (int it = 0; it < iterations; ++it) {
    for (int d = 0; d < dmax; ++d) {
      // Horizontal pass: sum over the combined horizontal arms of each row
      // pixel. Sentinel entries read as zero; no combined window can reach
      // one, so only the prefix sums see the substitution.
      for (int y = 0; y < h; ++y) {
        prefix[0] = 0.0;
        for (int x = 0; x < w; ++x) {
          const float c = cur.at(x, y, d);
          prefix[x + 1] = prefix[x] + (c == kSentinelCost ? 0.0 : static_cast<double>(c));
        }
        for (int x = 0; x < w; ++x) {
          const size_t i = static_cast<size_t>(y) * w + x;
          if (x - d < 0) {
            hsum[i] = 0.0;
            hcnt[i] = 0;
            continue;
          }
          const int hl = std::min<int>(arms_left.arm_left(x, y), arms_right.arm_left(x - d, y));
          const int hr = std::min<int>(arms_left.arm_right(x, y), arms_right.arm_right(x - d, y));
          hsum[i] = prefix[x + hr + 1] - prefix[x - hl];
          hcnt[i] = hl + hr + 1;
        }
      }
      // Vertical pass: combine the row sums over the combined vertical arms.
      parallel_for(0, h, [&](int y) {
        for (int x = 0; x < w; ++x) {
          if (x - d < 0) {
            next.at(x, y, d) = cur.at(x, y, d);  // out-of-frame match keeps its prior value
            continue;
          }
          const int vt = std::min<int>(arms_left.arm_top(x, y), arms_right.arm_top(x - d, y));
          const int vb = std::min<int>(arms_left.arm_bottom(x, y), arms_right.arm_bottom(x - d, y));
          double sum = 0.0;
          int count = 0;
          for (int v = -vt; v <= vb; ++v) {
            const size_t i = static_cast<size_t>(y + v) * w + x;
            sum += hsum[i];
            count += hcnt[i];
          }
          next.at(x, y, d) = static_cast<float>(sum / count);
        }
      });
    }
    std::swap(cur, next);
  }
  return cur;
}

}  // namespace stereo
