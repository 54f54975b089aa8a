#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "classic_costs.hpp"
#include "image.hpp"

namespace stereo {

enum class Arch : uint8_t { fast = 0, accurate = 1 };

const char* arch_name(Arch arch);
Arch arch_from_name(const std::string& name);

// Layered description of either architecture. The convolutional stack uses
// valid convolutions, so input_patch_size = num_conv_layers * (kernel - 1) + 1
// reduces a patch to a single feature vector.
struct NetworkSpec {
  Arch arch = Arch::fast;
  int num_conv_layers = 4;
  int conv_kernel_size = 3;
  int num_conv_feature_maps = 64;
  int num_fc_layers = 0;  // accurate only; includes the final 1-unit layer
  int num_fc_units = 0;   // accurate only
  int input_patch_size = 9;
};

void validate_spec(const NetworkSpec& spec);

// [c][y][x] feature planes; templated so the trainer can run in double.
template <typename T>
struct TensorT {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> v;

  TensorT() = default;
  TensorT(int c, int h, int w, T fill = T{}) : channels(c), height(h), width(w) {
    v.assign(static_cast<size_t>(c) * h * w, fill);
  }
  size_t index(int c, int y, int x) const {
    return (static_cast<size_t>(c) * height + y) * width + x;
  }
  T at(int c, int y, int x) const { return v[index(c, y, x)]; }
  T& at(int c, int y, int x) { return v[index(c, y, x)]; }
};

using FeatureMaps = TensorT<float>;

template <typename T>
struct ConvLayerT {
  int out_channels = 0;
  int in_channels = 0;
  int kernel = 0;
  std::vector<T> kernels;  // [out][in][ky][kx]
  std::vector<T> bias;     // [out]

  size_t kernel_index(int oc, int ic, int ky, int kx) const {
    return ((static_cast<size_t>(oc) * in_channels + ic) * kernel + ky) * kernel + kx;
  }
};

template <typename T>
struct FcLayerT {
  int out_units = 0;
  int in_units = 0;
  std::vector<T> weight;  // [out][in]
  std::vector<T> bias;    // [out]
};

template <typename T>
struct WeightsT {
  std::vector<ConvLayerT<T>> conv;
  std::vector<FcLayerT<T>> fc;
};

using NetworkWeights = WeightsT<float>;

void validate_weights(const NetworkSpec& spec, const NetworkWeights& weights);

template <typename From, typename To>
WeightsT<To> convert_weights(const WeightsT<From>& in) {
  WeightsT<To> out;
  out.conv.reserve(in.conv.size());
  for (const auto& l : in.conv) {
    ConvLayerT<To> o;
    o.out_channels = l.out_channels;
    o.in_channels = l.in_channels;
    o.kernel = l.kernel;
    o.kernels.assign(l.kernels.begin(), l.kernels.end());
    o.bias.assign(l.bias.begin(), l.bias.end());
    out.conv.push_back(std::move(o));
  }
  out.fc.reserve(in.fc.size());
  for (const auto& l : in.fc) {
    FcLayerT<To> o;
    o.out_units = l.out_units;
    o.in_units = l.in_units;
    o.weight.assign(l.weight.begin(), l.weight.end());
    o.bias.assign(l.bias.begin(), l.bias.end());
    out.fc.push_back(std::move(o));
  }
  return out;
}

// Exact cross-correlation plus bias; output shrinks by kernel - 1 per axis.
template <typename T>
TensorT<T> conv_valid(const TensorT<T>& in, const ConvLayerT<T>& layer) {
  if (in.channels != layer.in_channels) throw Error(Errc::invalid_argument, "conv input channels mismatch");
  if (in.height < layer.kernel || in.width < layer.kernel)
    throw Error(Errc::invalid_argument, "conv input smaller than kernel");
  const int oh = in.height - layer.kernel + 1;
  const int ow = in.width - layer.kernel + 1;
  TensorT<T> out(layer.out_channels, oh, ow);
  for (int oc = 0; oc < layer.out_channels; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T acc = layer.bias[oc];
        for (int ic = 0; ic < layer.in_channels; ++ic) {
          for (int ky = 0; ky < layer.kernel; ++ky) {
            const T* row = &in.v[in.index(ic, oy + ky, ox)];
            const T* ker = &layer.kernels[layer.kernel_index(oc, ic, ky, 0)];
            for (int kx = 0; kx < layer.kernel; ++kx) acc += row[kx] * ker[kx];
          }
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  }
  return out;
}

template <typename T>
void relu_inplace(TensorT<T>& t) {
  for (T& v : t.v)
    if (v < T{}) v = T{};
}

template <typename T>
TensorT<T> relu(const TensorT<T>& t) {
  TensorT<T> out = t;
  relu_inplace(out);
  return out;
}

template <typename T>
std::vector<T> fc_forward(const FcLayerT<T>& layer, const std::vector<T>& in) {
  if (static_cast<int>(in.size()) != layer.in_units)
    throw Error(Errc::invalid_argument, "fc input size mismatch");
  std::vector<T> out(layer.out_units);
  for (int o = 0; o < layer.out_units; ++o) {
    T acc = layer.bias[o];
    const T* w = &layer.weight[static_cast<size_t>(o) * layer.in_units];
    for (int i = 0; i < layer.in_units; ++i) acc += w[i] * in[i];
    out[o] = acc;
  }
  return out;
}

template <typename T>
T sigmoid(T z) {
  return T{1} / (T{1} + std::exp(-z));
}

// Does layer i of the conv stack take a ReLU? The fast architecture skips it
// after the last layer; the accurate architecture applies it after every one.
inline bool conv_layer_has_relu(const NetworkSpec& spec, int layer_index) {
  return spec.arch == Arch::accurate || layer_index + 1 < spec.num_conv_layers;
}

// Chain of valid convolutions reducing an input_patch_size patch to a
// feature vector of length num_conv_feature_maps.
std::vector<float> describe_patch(const NetworkSpec& spec, const NetworkWeights& weights, const Image& patch);

// Cosine similarity of two feature vectors, in [-1, 1].
float score_fast(std::span<const float> feat_left, std::span<const float> feat_right);

// Concatenation followed by the fully-connected stack and a sigmoid; in (0, 1).
float score_accurate(const NetworkSpec& spec, const NetworkWeights& weights, std::span<const float> feat_left,
                     std::span<const float> feat_right);

// Mirror about the border pixel (the edge sample is not duplicated).
Image reflect_pad(const Image& img, int pad);

// Full conv-stack pass over an already padded frame.
FeatureMaps extractor_forward(const NetworkSpec& spec, const NetworkWeights& weights, const Image& padded);

// C(p, d) = -s(P_L(p), P_R(p - d)) computed with one sub-network pass per
// image over reflect-padded frames; the accurate head runs once per disparity
// as 1x1 convolutions. Out-of-frame disparities get the sentinel cost.
CostVolume cost_volume_from_network(const NetworkSpec& spec, const NetworkWeights& weights, const Image& left,
                                    const Image& right, int max_disparity);

// Weight file: "STNW", u32 version, spec header, then per-layer float32
// payloads, all little-endian. Round-trips bit-identically.
void save_weights(const NetworkSpec& spec, const NetworkWeights& weights, const std::string& path);
std::pair<NetworkSpec, NetworkWeights> load_weights(const std::string& path);

}  // namespace stereo
