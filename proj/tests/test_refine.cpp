#include <cmath>

#include "doctest.h"
#include "refine.hpp"
#include "support/synthetic.hpp"

using namespace stereo;

TEST_SUITE_BEGIN("refine");

TEST_CASE("wta picks the minimum and breaks ties toward smaller d") {
  CostVolume vol(2, 1, 3);
  vol.at(0, 0, 0) = 3;
  vol.at(0, 0, 1) = 1;
  vol.at(0, 0, 2) = 2;
  vol.at(1, 0, 0) = 1;
  vol.at(1, 0, 1) = 1;
  vol.at(1, 0, 2) = 2;
  const DisparityMap dm = wta(vol);
  CHECK(dm.at(0, 0) == 1.0f);
  CHECK(dm.at(1, 0) == 0.0f);
}

TEST_CASE("wta of an all-sentinel pixel is invalid") {
  CostVolume vol(1, 1, 2, kSentinelCost);
  CHECK(wta(vol).at(0, 0) == kInvalidDisparity);
}

TEST_CASE("wta is invariant to per-pixel constant shifts") {
  Rng rng(41);
  CostVolume vol(6, 4, 5);
  for (float& v : vol.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
  CostVolume shifted = vol;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) {
      const float c = static_cast<float>(rng.uniform(0.0, 4.0));
      for (int d = 0; d < 5; ++d) shifted.at(x, y, d) += c;
    }
  CHECK(wta(vol).data == wta(shifted).data);
}

TEST_CASE("lr labels: exact agreement is correct everywhere") {
  DisparityMap left(4, 2, 0.0f);
  DisparityMap right(4, 2, 0.0f);
  const LabelMap labels = lr_check(left, right, 4);
  for (LrLabel l : labels.labels) CHECK(l == LrLabel::correct);
}

TEST_CASE("lr labels: rule order gives mismatch before occlusion") {
  DisparityMap left(8, 1, 20.0f);
  DisparityMap right(8, 1, 20.0f);
  left.at(7, 0) = 5.0f;
  right.at(2, 0) = 9.0f;  // fails the correct rule: |5 - 9| > 1
  right.at(0, 0) = 7.0f;  // d = 7 lands here and agrees
  const LabelMap labels = lr_check(left, right, 8);
  CHECK(labels.at(7, 0) == LrLabel::mismatch);
}

TEST_CASE("lr labels: occlusion when every disparity fails") {
  DisparityMap left(8, 1, 5.0f);
  DisparityMap right(8, 1, 20.0f);
  const LabelMap labels = lr_check(left, right, 8);
  CHECK(labels.at(7, 0) == LrLabel::occlusion);
}

TEST_CASE("interpolation is the identity on all-correct maps") {
  DisparityMap dm(5, 3, 2.0f);
  LabelMap labels;
  labels.width = 5;
  labels.height = 3;
  labels.labels.assign(15, LrLabel::correct);
  CHECK(interpolate(dm, labels).data == dm.data);
}

TEST_CASE("occluded pixels copy the nearest correct value to the left") {
  DisparityMap dm(5, 1, 9.0f);
  dm.at(2, 0) = 1.0f;
  dm.at(1, 0) = 7.0f;
  LabelMap labels;
  labels.width = 5;
  labels.height = 1;
  labels.labels.assign(5, LrLabel::correct);
  labels.at(2, 0) = LrLabel::occlusion;
  const DisparityMap out = interpolate(dm, labels);
  CHECK(out.at(2, 0) == 7.0f);
  CHECK(out.at(1, 0) == 7.0f);
  CHECK(out.at(3, 0) == 9.0f);
}

TEST_CASE("occluded pixels fall back to the right when the left has no correct pixel") {
  DisparityMap dm(4, 1);
  dm.data = {3.0f, 4.0f, 5.0f, 6.0f};
  LabelMap labels;
  labels.width = 4;
  labels.height = 1;
  labels.labels = {LrLabel::occlusion, LrLabel::occlusion, LrLabel::correct, LrLabel::correct};
  const DisparityMap out = interpolate(dm, labels);
  CHECK(out.at(0, 0) == 5.0f);
  CHECK(out.at(1, 0) == 5.0f);
}

TEST_CASE("mismatch pixels take the 16-ray median, enumerated by hand") {
  // 9x9 fixture, values x + 10y; the hand walk of the 16 rays from (4, 4)
  // hits 45, 45, 55, 54, 54, 54, 53, 43, 43, 43, 33, 34, 34, 34, 35, 45,
  // whose upper median is 45.
  DisparityMap dm(9, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) dm.at(x, y) = static_cast<float>(x + 10 * y);
  LabelMap labels;
  labels.width = 9;
  labels.height = 9;
  labels.labels.assign(81, LrLabel::correct);
  labels.at(4, 4) = LrLabel::mismatch;
  const DisparityMap out = interpolate(dm, labels);
  CHECK(out.at(4, 4) == 45.0f);
}

TEST_CASE("interpolation needs at least one correct pixel") {
  DisparityMap dm(3, 1, 1.0f);
  LabelMap labels;
  labels.width = 3;
  labels.height = 1;
  labels.labels.assign(3, LrLabel::occlusion);
  try {
    interpolate(dm, labels);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_input);
  }
}

TEST_CASE("subpixel keeps d on symmetric neighbors") {
  CostVolume vol(1, 1, 3);
  vol.at(0, 0, 0) = 2.0f;
  vol.at(0, 0, 1) = 1.0f;
  vol.at(0, 0, 2) = 2.0f;
  DisparityMap dm(1, 1, 1.0f);
  CHECK(subpixel(dm, vol).at(0, 0) == 1.0f);
}

TEST_CASE("subpixel lands on the parabola vertex") {
  // Parabola through (4, 3), (5, 1), (6, 2) has its vertex at 5 + 1/6.
  CostVolume vol(1, 1, 8, 10.0f);
  vol.at(0, 0, 4) = 3.0f;
  vol.at(0, 0, 5) = 1.0f;
  vol.at(0, 0, 6) = 2.0f;
  DisparityMap dm(1, 1, 5.0f);
  CHECK(subpixel(dm, vol).at(0, 0) == doctest::Approx(5.0 + 1.0 / 6.0).epsilon(1e-6));
}

TEST_CASE("subpixel keeps range-edge disparities and invalid pixels") {
  CostVolume vol(2, 1, 3, 1.0f);
  DisparityMap dm(2, 1);
  dm.at(0, 0) = 0.0f;
  dm.at(1, 0) = kInvalidDisparity;
  const DisparityMap out = subpixel(dm, vol);
  CHECK(out.at(0, 0) == 0.0f);
  CHECK(out.at(1, 0) == kInvalidDisparity);
}

TEST_CASE("subpixel offset stays inside (-1/2, 1/2) at strict minima") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const int dmax = 5;
    CostVolume vol(1, 1, dmax);
    for (float& v : vol.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    const DisparityMap dm = wta(vol);
    const int d = static_cast<int>(dm.at(0, 0));
    if (d == 0 || d == dmax - 1) continue;
    const float c = vol.at(0, 0, d);
    if (!(c < vol.at(0, 0, d - 1) && c < vol.at(0, 0, d + 1))) continue;
    const float refined = subpixel(dm, vol).at(0, 0);
    CHECK(std::fabs(refined - static_cast<float>(d)) < 0.5f);
  }
}

TEST_CASE("median filter maps constants to constants and kills impulses") {
  DisparityMap constant(6, 5, 3.0f);
  CHECK(median5(constant).data == constant.data);

  DisparityMap impulse(6, 5, 3.0f);
  impulse.at(3, 2) = 9.0f;
  CHECK(median5(impulse).at(3, 2) == 3.0f);
}

TEST_CASE("median filter against a hand-sorted fixture") {
  DisparityMap dm(5, 5);
  for (int i = 0; i < 25; ++i) dm.data[i] = static_cast<float>(i);
  const DisparityMap out = median5(dm);
  CHECK(out.at(2, 2) == 12.0f);  // middle of 0..24
  CHECK(out.at(0, 0) == 2.0f);   // clamped window: 0 x9, 1 x3, 2 x3, 5 x3, 6, 7, 10 x3, 11, 12
}

TEST_CASE("median filter passes invalid centers through and skips invalid samples") {
  DisparityMap dm(5, 1, 2.0f);
  dm.at(2, 0) = kInvalidDisparity;
  const DisparityMap out = median5(dm);
  CHECK(out.at(2, 0) == kInvalidDisparity);
  CHECK(out.at(1, 0) == 2.0f);
}

TEST_CASE("bilateral filter keeps constants and never crosses strong edges") {
  Image img(8, 1, 0.0f);
  for (int x = 4; x < 8; ++x) img.at(x, 0) = 10.0f;
  DisparityMap dm(8, 1);
  for (int x = 0; x < 8; ++x) dm.at(x, 0) = x < 4 ? 1.0f : 5.0f;
  const DisparityMap out = bilateral(dm, img, 1.0f, 2.0f);
  for (int x = 0; x < 8; ++x) CHECK(out.at(x, 0) == doctest::Approx(dm.at(x, 0)).epsilon(1e-6));
}

TEST_CASE("bilateral filter matches a hand-evaluated 1-D weighting") {
  Image img(5, 1, 0.0f);
  DisparityMap dm(5, 1);
  dm.data = {0.0f, 1.0f, 4.0f, 1.0f, 0.0f};
  const DisparityMap out = bilateral(dm, img, 1.0f, 100.0f);
  // weights at |dx| = 0, 1, 2: 1, e^-1/2 = 0.60653066, e^-2 = 0.13533528
  const double expected = (4.0 + 2.0 * 0.60653066 * 1.0 + 2.0 * 0.13533528 * 0.0) /
                          (1.0 + 2.0 * 0.60653066 + 2.0 * 0.13533528);
  CHECK(out.at(2, 0) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("filters never leave the window range") {
  Rng rng(43);
  DisparityMap dm(9, 7);
  for (float& v : dm.data) v = static_cast<float>(rng.uniform(0.0, 20.0));
  Image img = testsupport::random_image(9, 7, rng);
  float lo = 1e9f, hi = -1e9f;
  for (float v : dm.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (const DisparityMap& out : {median5(dm), bilateral(dm, img, 1.5f, 100.0f)}) {
    for (float v : out.data) {
      CHECK(v >= lo - 1e-5f);
      CHECK(v <= hi + 1e-5f);
    }
  }
}

TEST_SUITE_END();
