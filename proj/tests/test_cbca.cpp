#include <algorithm>
#include <cmath>

#include "cbca.hpp"
#include "doctest.h"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace stereo;

namespace {

CostVolume random_volume(int w, int h, int dmax, Rng& rng) {
  CostVolume vol(w, h, dmax);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int d = 0; d < dmax; ++d)
        vol.at(x, y, d) = x - d < 0 ? kSentinelCost : static_cast<float>(rng.uniform(0.0, 1.0));
  return vol;
}

}  // namespace

TEST_SUITE_BEGIN("cbca");

TEST_CASE("constant image arms are distance- or edge-limited") {
  Image img(10, 8, 0.5f);
  const int distance = 4;
  const CrossArms arms = compute_arms(img, 0.1f, distance);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x) {
      CHECK(arms.arm_left(x, y) == std::min(distance - 1, x));
      CHECK(arms.arm_right(x, y) == std::min(distance - 1, 10 - 1 - x));
      CHECK(arms.arm_top(x, y) == std::min(distance - 1, y));
      CHECK(arms.arm_bottom(x, y) == std::min(distance - 1, 8 - 1 - y));
    }
}

TEST_CASE("arms stop at a hard intensity step") {
  Image img(10, 4, 0.0f);
  const int step_x = 5;
  for (int y = 0; y < 4; ++y)
    for (int x = step_x; x < 10; ++x) img.at(x, y) = 1.0f;  // step far above the threshold
  const CrossArms arms = compute_arms(img, 0.2f, 8);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 10; ++x) {
      // No horizontal arm may reach across the step.
      CHECK(x - arms.arm_left(x, y) >= (x >= step_x ? step_x : 0));
      CHECK(x + arms.arm_right(x, y) < (x < step_x ? step_x : 10));
    }
  }
}

TEST_CASE("gradient fixture arms match the direct scanner") {
  Image img(5, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) img.at(x, y) = 0.1f * x + 0.03f * y;
  const float intensity = 0.25f;
  const int distance = 4;
  const CrossArms arms = compute_arms(img, intensity, distance);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      CHECK(arms.arm_left(x, y) == oracle::arm_length(img, x, y, -1, 0, intensity, distance));
      CHECK(arms.arm_right(x, y) == oracle::arm_length(img, x, y, 1, 0, intensity, distance));
      CHECK(arms.arm_top(x, y) == oracle::arm_length(img, x, y, 0, -1, intensity, distance));
      CHECK(arms.arm_bottom(x, y) == oracle::arm_length(img, x, y, 0, 1, intensity, distance));
    }
}

TEST_CASE("aggregation leaves constant volumes unchanged") {
  Rng rng(21);
  const Image left = testsupport::random_image(8, 6, rng);
  const Image right = testsupport::random_image(8, 6, rng);
  CostVolume vol(8, 6, 3, 0.75f);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x)
      for (int d = 0; d < 3; ++d)
        if (x - d < 0) vol.at(x, y, d) = kSentinelCost;
  const CrossArms al = compute_arms(left, 0.4f, 4);
  const CrossArms ar = compute_arms(right, 0.4f, 4);
  const CostVolume out = aggregate(vol, al, ar, 3);
  for (size_t i = 0; i < vol.data.size(); ++i) CHECK(out.data[i] == doctest::Approx(vol.data[i]).epsilon(1e-6));
}

TEST_CASE("zero iterations is the identity") {
  Rng rng(22);
  const Image left = testsupport::random_image(7, 5, rng);
  const Image right = testsupport::random_image(7, 5, rng);
  const CostVolume vol = random_volume(7, 5, 3, rng);
  const CostVolume out = aggregate(vol, compute_arms(left, 0.3f, 3), compute_arms(right, 0.3f, 3), 0);
  CHECK(out.data == vol.data);
}

TEST_CASE("aggregation matches explicit support-set enumeration") {
  Rng rng(23);
  for (int trial = 0; trial < 6; ++trial) {
    const int w = 8, h = 8, dmax = 3;
    const Image left = testsupport::random_image(w, h, rng);
    const Image right = testsupport::random_image(w, h, rng);
    const CostVolume vol = random_volume(w, h, dmax, rng);
    const float intensity = 0.35f;
    const int distance = 2 + static_cast<int>(rng.below(3));
    const int iterations = 1 + static_cast<int>(rng.below(2));

    const CostVolume fast =
        aggregate(vol, compute_arms(left, intensity, distance), compute_arms(right, intensity, distance), iterations);
    const CostVolume ref = oracle::cbca_aggregate(vol, left, right, intensity, distance, iterations);
    for (size_t i = 0; i < vol.data.size(); ++i) CHECK(std::fabs(fast.data[i] - ref.data[i]) <= 1e-5f);
  }
}

TEST_CASE("aggregation stays within the input range") {
  Rng rng(24);
  const Image left = testsupport::random_image(9, 7, rng);
  const Image right = testsupport::random_image(9, 7, rng);
  const CostVolume vol = random_volume(9, 7, 4, rng);
  const CostVolume out = aggregate(vol, compute_arms(left, 0.5f, 4), compute_arms(right, 0.5f, 4), 2);
  float lo = 1e30f, hi = -1e30f;
  for (float v : vol.data) {
    if (v == kSentinelCost) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (size_t i = 0; i < out.data.size(); ++i) {
    if (vol.data[i] == kSentinelCost) {
      CHECK(out.data[i] == kSentinelCost);  // out-of-frame entries keep their prior value
      continue;
    }
    CHECK(out.data[i] >= lo - 1e-5f);
    CHECK(out.data[i] <= hi + 1e-5f);
  }
}

TEST_SUITE_END();
