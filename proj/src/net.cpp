#include "net.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "parallel.hpp"

namespace stereo {

const char* arch_name(Arch arch) { return arch == Arch::fast ? "fast" : "accurate"; }

Arch arch_from_name(const std::string& name) {
  if (name == "fast") return Arch::fast;
  if (name == "accurate") return Arch::accurate;
  throw Error(Errc::config, "unknown architecture '" + name + "'");
}

void validate_spec(const NetworkSpec& spec) {
  if (spec.num_conv_layers < 1) throw Error(Errc::invalid_argument, "need at least one conv layer");
  if (spec.conv_kernel_size < 1 || spec.conv_kernel_size % 2 == 0)
    throw Error(Errc::invalid_argument, "conv kernel size must be odd");
  if (spec.num_conv_feature_maps < 1) throw Error(Errc::invalid_argument, "need at least one feature map");
  if (spec.input_patch_size != spec.num_conv_layers * (spec.conv_kernel_size - 1) + 1)
    throw Error(Errc::invalid_argument, "input_patch_size inconsistent with conv stack");
  if (spec.arch == Arch::accurate) {
    if (spec.num_fc_layers < 1) throw Error(Errc::invalid_argument, "accurate arch needs fc layers");
    if (spec.num_fc_layers > 1 && spec.num_fc_units < 1)
      throw Error(Errc::invalid_argument, "accurate arch needs fc units");
  }
}

void validate_weights(const NetworkSpec& spec, const NetworkWeights& weights) {
  validate_spec(spec);
  if (static_cast<int>(weights.conv.size()) != spec.num_conv_layers)
    throw Error(Errc::invalid_argument, "conv layer count mismatch");
  for (int i = 0; i < spec.num_conv_layers; ++i) {
    const auto& l = weights.conv[i];
    const int expect_in = i == 0 ? 1 : spec.num_conv_feature_maps;
    if (l.in_channels != expect_in || l.out_channels != spec.num_conv_feature_maps ||
        l.kernel != spec.conv_kernel_size)
      throw Error(Errc::invalid_argument, "conv layer shape mismatch");
    if (l.kernels.size() != static_cast<size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel ||
        l.bias.size() != static_cast<size_t>(l.out_channels))
      throw Error(Errc::invalid_argument, "conv layer payload mismatch");
  }
  if (spec.arch == Arch::fast) {
    if (!weights.fc.empty()) throw Error(Errc::invalid_argument, "fast arch carries no fc layers");
    return;
  }
  if (static_cast<int>(weights.fc.size()) != spec.num_fc_layers)
    throw Error(Errc::invalid_argument, "fc layer count mismatch");
  for (int i = 0; i < spec.num_fc_layers; ++i) {
    const auto& l = weights.fc[i];
    const int expect_in = i == 0 ? 2 * spec.num_conv_feature_maps : spec.num_fc_units;
    const int expect_out = i + 1 == spec.num_fc_layers ? 1 : spec.num_fc_units;
    if (l.in_units != expect_in || l.out_units != expect_out)
      throw Error(Errc::invalid_argument, "fc layer shape mismatch");
    if (l.weight.size() != static_cast<size_t>(l.out_units) * l.in_units ||
        l.bias.size() != static_cast<size_t>(l.out_units))
      throw Error(Errc::invalid_argument, "fc layer payload mismatch");
  }
}

std::vector<float> describe_patch(const NetworkSpec& spec, const NetworkWeights& weights, const Image& patch) {
  if (patch.width != spec.input_patch_size || patch.height != spec.input_patch_size)
    throw Error(Errc::invalid_argument, "patch does not match input_patch_size");
  TensorT<float> t(1, patch.height, patch.width);
  t.v = patch.data;
  for (int i = 0; i < spec.num_conv_layers; ++i) {
    t = conv_valid(t, weights.conv[i]);
    if (conv_layer_has_relu(spec, i)) relu_inplace(t);
  }
  return t.v;  // spatial dims are 1x1 by the spec invariant
}

float score_fast(std::span<const float> feat_left, std::span<const float> feat_right) {
  if (feat_left.size() != feat_right.size())
    throw Error(Errc::invalid_argument, "feature vector lengths differ");
  double dot = 0.0, nl = 0.0, nr = 0.0;
  for (size_t i = 0; i < feat_left.size(); ++i) {
    dot += static_cast<double>(feat_left[i]) * feat_right[i];
    nl += static_cast<double>(feat_left[i]) * feat_left[i];
    nr += static_cast<double>(feat_right[i]) * feat_right[i];
  }
  if (nl == 0.0 || nr == 0.0) throw Error(Errc::degenerate_input, "zero-norm feature vector");
  return static_cast<float>(std::clamp(dot / std::sqrt(nl * nr), -1.0, 1.0));
}

float score_accurate(const NetworkSpec& spec, const NetworkWeights& weights, std::span<const float> feat_left,
                     std::span<const float> feat_right) {
  if (spec.arch != Arch::accurate) throw Error(Errc::invalid_argument, "not an accurate-architecture spec");
  if (static_cast<int>(feat_left.size()) != spec.num_conv_feature_maps ||
      static_cast<int>(feat_right.size()) != spec.num_conv_feature_maps)
    throw Error(Errc::invalid_argument, "feature vector length mismatch");
  std::vector<float> act(feat_left.begin(), feat_left.end());
  act.insert(act.end(), feat_right.begin(), feat_right.end());
  for (size_t i = 0; i < weights.fc.size(); ++i) {
    act = fc_forward(weights.fc[i], act);
    if (i + 1 < weights.fc.size()) {
      for (float& v : act)
        if (v < 0.0f) v = 0.0f;
    }
  }
  return sigmoid(act[0]);
}

Image reflect_pad(const Image& img, int pad) {
  if (pad < 0) throw Error(Errc::invalid_argument, "pad must be >= 0");
  if (pad >= img.width || pad >= img.height)
    throw Error(Errc::invalid_argument, "pad too large for image");
  Image out(img.width + 2 * pad, img.height + 2 * pad);
  auto mirror = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
  for (int y = 0; y < out.height; ++y) {
    const int sy = mirror(y - pad, img.height);
    for (int x = 0; x < out.width; ++x) {
      out.at(x, y) = img.at(mirror(x - pad, img.width), sy);
    }
  }
  return out;
}

namespace {

// Row-split wrapper around the conv recurrence so full frames use all cores.
TensorT<float> conv_valid_parallel(const TensorT<float>& in, const ConvLayerT<float>& layer) {
  const int oh = in.height - layer.kernel + 1;
  const int ow = in.width - layer.kernel + 1;
  TensorT<float> out(layer.out_channels, oh, ow);
  parallel_for(0, oh, [&](int oy) {
    for (int oc = 0; oc < layer.out_channels; ++oc) {
      for (int ox = 0; ox < ow; ++ox) {
        float acc = layer.bias[oc];
        for (int ic = 0; ic < layer.in_channels; ++ic) {
          for (int ky = 0; ky < layer.kernel; ++ky) {
            const float* row = &in.v[in.index(ic, oy + ky, ox)];
            const float* ker = &layer.kernels[layer.kernel_index(oc, ic, ky, 0)];
            for (int kx = 0; kx < layer.kernel; ++kx) acc += row[kx] * ker[kx];
          }
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  });
  return out;
}

}  // namespace

FeatureMaps extractor_forward(const NetworkSpec& spec, const NetworkWeights& weights, const Image& padded) {
  TensorT<float> t(1, padded.height, padded.width);
  t.v = padded.data;
  for (int i = 0; i < spec.num_conv_layers; ++i) {
    if (t.channels != weights.conv[i].in_channels)
      throw Error(Errc::invalid_argument, "conv input channels mismatch");
    if (t.height < weights.conv[i].kernel || t.width < weights.conv[i].kernel)
      throw Error(Errc::invalid_argument, "conv input smaller than kernel");
    t = conv_valid_parallel(t, weights.conv[i]);
    if (conv_layer_has_relu(spec, i)) relu_inplace(t);
  }
  return t;
}

CostVolume cost_volume_from_network(const NetworkSpec& spec, const NetworkWeights& weights, const Image& left,
                                    const Image& right, int max_disparity) {
  validate_weights(spec, weights);
  if (!left.same_size(right)) throw Error(Errc::invalid_argument, "left/right dimensions differ");
  if (max_disparity < 1) throw Error(Errc::invalid_argument, "max_disparity must be >= 1");

  const int pad = (spec.input_patch_size - 1) / 2;
  FeatureMaps fl = extractor_forward(spec, weights, reflect_pad(left, pad));
  FeatureMaps fr = extractor_forward(spec, weights, reflect_pad(right, pad));
  const int w = left.width;
  const int h = left.height;
  const int f = spec.num_conv_feature_maps;
  CostVolume vol(w, h, max_disparity);

  if (spec.arch == Arch::fast) {
    // Normalization happens once per position, the dot product once per
    // disparity. Zero-norm positions (possible only with degenerate weights)
    // normalize to the zero vector, giving similarity 0.
    auto normalize_maps = [&](FeatureMaps& m) {
      parallel_for(0, h, [&](int y) {
        for (int x = 0; x < w; ++x) {
          double sq = 0.0;
          for (int c = 0; c < f; ++c) {
            const float v = m.at(c, y, x);
            sq += static_cast<double>(v) * v;
          }
          const float inv = sq > 0.0 ? static_cast<float>(1.0 / std::sqrt(sq)) : 0.0f;
          for (int c = 0; c < f; ++c) m.at(c, y, x) *= inv;
        }
      });
    };
    normalize_maps(fl);
    normalize_maps(fr);
    parallel_for(0, h, [&](int y) {
      for (int x = 0; x < w; ++x) {
        for (int d = 0; d < max_disparity; ++d) {
          if (x - d < 0) {
            vol.at(x, y, d) = kSentinelCost;
            continue;
          }
          float dot = 0.0f;
          for (int c = 0; c < f; ++c) dot += fl.at(c, y, x) * fr.at(c, y, x - d);
          vol.at(x, y, d) = -std::clamp(dot, -1.0f, 1.0f);
        }
      }
    });
    return vol;
  }

  // Accurate head: each fully-connected layer acts as a 1x1 convolution over
  // the concatenated feature planes, run once per disparity.
  parallel_for(0, max_disparity, [&](int d) {
    std::vector<float> act;
    std::vector<float> next;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (x - d < 0) {
          vol.at(x, y, d) = kSentinelCost;
          continue;
        }
        act.resize(2 * static_cast<size_t>(f));
        for (int c = 0; c < f; ++c) {
          act[c] = fl.at(c, y, x);
          act[f + c] = fr.at(c, y, x - d);
        }
        for (size_t i = 0; i < weights.fc.size(); ++i) {
          const auto& layer = weights.fc[i];
          next.assign(layer.out_units, 0.0f);
          for (int o = 0; o < layer.out_units; ++o) {
            float acc = layer.bias[o];
            const float* wrow = &layer.weight[static_cast<size_t>(o) * layer.in_units];
            for (int j = 0; j < layer.in_units; ++j) acc += wrow[j] * act[j];
            next[o] = i + 1 < weights.fc.size() && acc < 0.0f ? 0.0f : acc;
          }
          act.swap(next);
        }
        vol.at(x, y, d) = -sigmoid(act[0]);
      }
    }
  });
  return vol;
}

namespace {

constexpr char kWeightsMagic[4] = {'S', 'T', 'N', 'W'};
constexpr uint32_t kWeightsVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<uint8_t>& out, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(out, u);
}

struct Reader {
  const std::vector<uint8_t>& bytes;
  size_t pos = 0;

  uint32_t u32() {
    if (bytes.size() - pos < 4) throw Error(Errc::format, "truncated weight file");
    uint32_t v = static_cast<uint32_t>(bytes[pos]) | (static_cast<uint32_t>(bytes[pos + 1]) << 8) |
                 (static_cast<uint32_t>(bytes[pos + 2]) << 16) | (static_cast<uint32_t>(bytes[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  float f32() {
    const uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  void floats(std::vector<float>& out, size_t n) {
    out.resize(n);
    for (size_t i = 0; i < n; ++i) out[i] = f32();
  }
};

}  // namespace

void save_weights(const NetworkSpec& spec, const NetworkWeights& weights, const std::string& path) {
  validate_weights(spec, weights);
  std::vector<uint8_t> out;
  out.insert(out.end(), kWeightsMagic, kWeightsMagic + 4);
  put_u32(out, kWeightsVersion);
  put_u32(out, static_cast<uint32_t>(spec.arch));
  put_u32(out, static_cast<uint32_t>(spec.num_conv_layers));
  put_u32(out, static_cast<uint32_t>(spec.conv_kernel_size));
  put_u32(out, static_cast<uint32_t>(spec.num_conv_feature_maps));
  put_u32(out, static_cast<uint32_t>(spec.num_fc_layers));
  put_u32(out, static_cast<uint32_t>(spec.num_fc_units));
  put_u32(out, static_cast<uint32_t>(spec.input_patch_size));
  for (const auto& l : weights.conv) {
    for (float v : l.kernels) put_f32(out, v);
    for (float v : l.bias) put_f32(out, v);
  }
  for (const auto& l : weights.fc) {
    for (float v : l.weight) put_f32(out, v);
    for (float v : l.bias) put_f32(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io, "cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(Errc::io, "write failed for " + path);
}

std::pair<NetworkSpec, NetworkWeights> load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kWeightsMagic, 4) != 0)
    throw Error(Errc::format, "not a weight file");
  Reader r{bytes, 4};
  if (r.u32() != kWeightsVersion) throw Error(Errc::format, "unsupported weight file version");

  NetworkSpec spec;
  const uint32_t arch = r.u32();
  if (arch > 1) throw Error(Errc::format, "bad architecture tag");
  spec.arch = static_cast<Arch>(arch);
  spec.num_conv_layers = static_cast<int>(r.u32());
  spec.conv_kernel_size = static_cast<int>(r.u32());
  spec.num_conv_feature_maps = static_cast<int>(r.u32());
  spec.num_fc_layers = static_cast<int>(r.u32());
  spec.num_fc_units = static_cast<int>(r.u32());
  spec.input_patch_size = static_cast<int>(r.u32());
  try {
    validate_spec(spec);
  } catch (const Error& e) {
    throw Error(Errc::format, std::string("invalid spec in weight file: ") + e.what());
  }

  NetworkWeights weights;
  for (int i = 0; i < spec.num_conv_layers; ++i) {
    ConvLayerT<float> l;
    l.in_channels = i == 0 ? 1 : spec.num_conv_feature_maps;
    l.out_channels = spec.num_conv_feature_maps;
    l.kernel = spec.conv_kernel_size;
    r.floats(l.kernels, static_cast<size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel);
    r.floats(l.bias, static_cast<size_t>(l.out_channels));
    weights.conv.push_back(std::move(l));
  }
  if (spec.arch == Arch::accurate) {
    for (int i = 0; i < spec.num_fc_layers; ++i) {
      FcLayerT<float> l;
      l.in_units = i == 0 ? 2 * spec.num_conv_feature_maps : spec.num_fc_units;
      l.out_units = i + 1 == spec.num_fc_layers ? 1 : spec.num_fc_units;
      r.floats(l.weight, static_cast<size_t>(l.out_units) * l.in_units);
      r.floats(l.bias, static_cast<size_t>(l.out_units));
      weights.fc.push_back(std::move(l));
    }
  }
  if (r.pos != bytes.size()) throw Error(Errc::format, "trailing bytes in weight file");
  return {spec, weights};
}

}  // namespace stereo
