#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "learn.hpp"
#include "net.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace stereo;

namespace {

NetworkSpec small_spec(Arch arch) {
  NetworkSpec spec;
  spec.arch = arch;
  spec.num_conv_layers = 2;
  spec.conv_kernel_size = 3;
  spec.num_conv_feature_maps = 4;
  spec.input_patch_size = 5;
  if (arch == Arch::accurate) {
    spec.num_fc_layers = 2;
    spec.num_fc_units = 6;
  }
  return spec;
}

}  // namespace

TEST_SUITE_BEGIN("net");

TEST_CASE("conv of ones with a ones kernel sums the window") {
  TensorT<float> in(1, 3, 3, 1.0f);
  ConvLayerT<float> layer;
  layer.out_channels = 1;
  layer.in_channels = 1;
  layer.kernel = 3;
  layer.kernels.assign(9, 1.0f);
  layer.bias.assign(1, 0.0f);
  const TensorT<float> out = conv_valid(in, layer);
  CHECK(out.height == 1);
  CHECK(out.width == 1);
  CHECK(out.at(0, 0, 0) == doctest::Approx(9.0));
}

TEST_CASE("identity kernel crops the input") {
  Rng rng(51);
  TensorT<float> in(1, 4, 5);
  for (float& v : in.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  ConvLayerT<float> layer;
  layer.out_channels = 1;
  layer.in_channels = 1;
  layer.kernel = 3;
  layer.kernels.assign(9, 0.0f);
  layer.kernels[4] = 1.0f;  // center tap
  layer.bias.assign(1, 0.0f);
  const TensorT<float> out = conv_valid(in, layer);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) CHECK(out.at(0, y, x) == doctest::Approx(in.at(0, y + 1, x + 1)));
}

TEST_CASE("zero kernels give a constant bias plane") {
  TensorT<float> in(1, 5, 5, 0.3f);
  ConvLayerT<float> layer;
  layer.out_channels = 2;
  layer.in_channels = 1;
  layer.kernel = 3;
  layer.kernels.assign(18, 0.0f);
  layer.bias = {1.5f, -2.0f};
  const TensorT<float> out = conv_valid(in, layer);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      CHECK(out.at(0, y, x) == 1.5f);
      CHECK(out.at(1, y, x) == -2.0f);
    }
}

TEST_CASE("relu clamps negatives only") {
  TensorT<float> t(1, 1, 3);
  t.v = {-1.0f, 0.0f, 2.5f};
  const TensorT<float> out = relu(t);
  CHECK(out.v[0] == 0.0f);
  CHECK(out.v[1] == 0.0f);
  CHECK(out.v[2] == 2.5f);
}

TEST_CASE("describe_patch with zero weights is the zero vector") {
  const NetworkSpec spec = small_spec(Arch::fast);
  NetworkWeights weights = init_weights(spec, 1);
  for (auto& l : weights.conv) {
    std::fill(l.kernels.begin(), l.kernels.end(), 0.0f);
    std::fill(l.bias.begin(), l.bias.end(), 0.0f);
  }
  Rng rng(52);
  const Image patch = testsupport::random_image(5, 5, rng);
  for (float v : describe_patch(spec, weights, patch)) CHECK(v == 0.0f);
}

TEST_CASE("describe_patch reduces the preset geometry to a feature vector") {
  NetworkSpec spec;
  spec.arch = Arch::fast;
  spec.num_conv_layers = 4;
  spec.conv_kernel_size = 3;
  spec.num_conv_feature_maps = 8;
  spec.input_patch_size = 9;  // 4 layers of 3x3 valid convolutions end at 1x1
  const NetworkWeights weights = init_weights(spec, 2);
  Rng rng(53);
  const Image patch = testsupport::random_image(9, 9, rng);
  CHECK(describe_patch(spec, weights, patch).size() == 8);
  const Image wrong = testsupport::random_image(7, 7, rng);
  CHECK_THROWS_AS(describe_patch(spec, weights, wrong), Error);
}

TEST_CASE("describe_patch is translation-consistent on interior regions") {
  const NetworkSpec spec = small_spec(Arch::fast);
  const NetworkWeights weights = init_weights(spec, 3);
  Rng rng(54);
  const Image img = testsupport::random_image(12, 9, rng);
  Image shifted(11, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 11; ++x) shifted.at(x, y) = img.at(x + 1, y);
  const FeatureMaps a = extractor_forward(spec, weights, img);
  const FeatureMaps b = extractor_forward(spec, weights, shifted);
  for (int c = 0; c < b.channels; ++c)
    for (int y = 0; y < b.height; ++y)
      for (int x = 0; x < b.width; ++x) CHECK(b.at(c, y, x) == a.at(c, y, x + 1));
}

TEST_CASE("score_fast endpoints") {
  std::vector<float> a = {1.0f, 2.0f, -3.0f};
  std::vector<float> b = {-1.0f, -2.0f, 3.0f};
  CHECK(score_fast(a, a) == doctest::Approx(1.0));
  CHECK(score_fast(a, b) == doctest::Approx(-1.0));
  std::vector<float> e1 = {1.0f, 0.0f};
  std::vector<float> e2 = {0.0f, 1.0f};
  CHECK(score_fast(e1, e2) == doctest::Approx(0.0));
  std::vector<float> zero = {0.0f, 0.0f};
  CHECK_THROWS_AS(score_fast(e1, zero), Error);
}

TEST_CASE("score_accurate of the zero network is one half") {
  const NetworkSpec spec = small_spec(Arch::accurate);
  NetworkWeights weights = init_weights(spec, 4);
  for (auto& l : weights.fc) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0f);
    std::fill(l.bias.begin(), l.bias.end(), 0.0f);
  }
  std::vector<float> f(4, 0.7f);
  CHECK(score_accurate(spec, weights, f, f) == doctest::Approx(0.5));

  weights.fc.back().bias[0] = 20.0f;  // saturate the sigmoid
  CHECK(score_accurate(spec, weights, f, f) > 0.999f);
}

TEST_CASE("score_accurate with a hand-set single fc layer") {
  NetworkSpec spec;
  spec.arch = Arch::accurate;
  spec.num_conv_layers = 1;
  spec.conv_kernel_size = 3;
  spec.num_conv_feature_maps = 1;
  spec.input_patch_size = 3;
  spec.num_fc_layers = 1;
  spec.num_fc_units = 0;
  NetworkWeights weights = init_weights(spec, 5);
  weights.fc[0].weight = {0.3f, -0.1f};
  weights.fc[0].bias = {0.05f};
  std::vector<float> f(1, 1.0f);
  // sigmoid(0.3 - 0.1 + 0.05)
  CHECK(score_accurate(spec, weights, f, f) == doctest::Approx(1.0 / (1.0 + std::exp(-0.25))).epsilon(1e-6));
}

TEST_CASE("full-image pass equals the per-patch path on interior pixels") {
  Rng rng(55);
  for (Arch arch : {Arch::fast, Arch::accurate}) {
    const NetworkSpec spec = small_spec(arch);
    const NetworkWeights weights = init_weights(spec, 6 + static_cast<int>(arch));
    const Image left = testsupport::random_image(12, 10, rng);
    const Image right = testsupport::random_image(12, 10, rng);
    const CostVolume full = cost_volume_from_network(spec, weights, left, right, 4);
    const CostVolume naive = oracle::network_volume_per_patch(spec, weights, left, right, 4);
    int compared = 0;
    for (size_t i = 0; i < full.data.size(); ++i) {
      if (naive.data[i] == kSentinelCost) continue;
      const float denom = std::max({1.0f, std::fabs(full.data[i]), std::fabs(naive.data[i])});
      CHECK(std::fabs(full.data[i] - naive.data[i]) / denom <= 1e-4f);
      ++compared;
    }
    CHECK(compared > 100);
  }
}

TEST_CASE("fast cost volume stays in [-1, 1] and is -1 on self-match") {
  const NetworkSpec spec = small_spec(Arch::fast);
  const NetworkWeights weights = init_weights(spec, 8);
  Rng rng(56);
  const Image img = testsupport::random_image(10, 8, rng);
  const CostVolume vol = cost_volume_from_network(spec, weights, img, img, 3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x) {
      CHECK(vol.at(x, y, 0) == doctest::Approx(-1.0).epsilon(1e-5));
      for (int d = 0; d < 3; ++d) {
        const float v = vol.at(x, y, d);
        if (v == kSentinelCost) {
          CHECK(x - d < 0);
          continue;
        }
        CHECK(v >= -1.0f);
        CHECK(v <= 1.0f);
      }
    }
}

TEST_CASE("accurate cost volume stays in (-1, 0)") {
  const NetworkSpec spec = small_spec(Arch::accurate);
  const NetworkWeights weights = init_weights(spec, 9);
  Rng rng(57);
  const Image left = testsupport::random_image(9, 7, rng);
  const Image right = testsupport::random_image(9, 7, rng);
  const CostVolume vol = cost_volume_from_network(spec, weights, left, right, 3);
  for (float v : vol.data) {
    if (v == kSentinelCost) continue;
    CHECK(v > -1.0f);
    CHECK(v < 0.0f);
  }
}

TEST_CASE("weight files round-trip bit-identically") {
  const std::string dir = testsupport::make_temp_dir("net");
  for (Arch arch : {Arch::fast, Arch::accurate}) {
    const NetworkSpec spec = small_spec(arch);
    const NetworkWeights weights = init_weights(spec, 10 + static_cast<int>(arch));
    const std::string path = dir + "/w.bin";
    save_weights(spec, weights, path);
    const auto [spec2, weights2] = load_weights(path);
    CHECK(spec2.arch == spec.arch);
    CHECK(spec2.input_patch_size == spec.input_patch_size);
    REQUIRE(weights2.conv.size() == weights.conv.size());
    for (size_t i = 0; i < weights.conv.size(); ++i) {
      CHECK(weights2.conv[i].kernels == weights.conv[i].kernels);
      CHECK(weights2.conv[i].bias == weights.conv[i].bias);
    }
    REQUIRE(weights2.fc.size() == weights.fc.size());
    for (size_t i = 0; i < weights.fc.size(); ++i) {
      CHECK(weights2.fc[i].weight == weights.fc[i].weight);
      CHECK(weights2.fc[i].bias == weights.fc[i].bias);
    }
  }
}

TEST_CASE("truncated weight files are rejected") {
  const std::string dir = testsupport::make_temp_dir("net");
  const NetworkSpec spec = small_spec(Arch::fast);
  save_weights(spec, init_weights(spec, 12), dir + "/w.bin");
  const auto size = std::filesystem::file_size(dir + "/w.bin");
  std::filesystem::resize_file(dir + "/w.bin", size - 5);
  try {
    load_weights(dir + "/w.bin");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::format);
  }
}

TEST_CASE("weight files violating the patch-size invariant are rejected") {
  const std::string dir = testsupport::make_temp_dir("net");
  const NetworkSpec spec = small_spec(Arch::fast);
  const std::string path = dir + "/w.bin";
  save_weights(spec, init_weights(spec, 13), path);
  // input_patch_size lives at byte offset 32; 11 does not fit 2 layers of 3x3.
  std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
  f.seekp(32);
  const uint32_t bad = 11;
  f.write(reinterpret_cast<const char*>(&bad), 4);
  f.close();
  try {
    load_weights(path);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::format);
  }
}

TEST_CASE("reflect padding mirrors about the border pixel") {
  Image img(3, 2);
  img.data = {1, 2, 3, 4, 5, 6};
  const Image out = reflect_pad(img, 1);
  CHECK(out.width == 5);
  CHECK(out.height == 4);
  CHECK(out.at(0, 1) == 2.0f);  // (-1, 0) -> (1, 0)
  CHECK(out.at(1, 0) == 4.0f);  // (0, -1) -> (0, 1)
  CHECK(out.at(4, 1) == 2.0f);  // (3, 0) -> (1, 0)
  CHECK(out.at(1, 3) == 1.0f);  // (0, 2) -> (0, 0)
}

TEST_SUITE_END();
