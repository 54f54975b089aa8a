#include "learn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <thread>

namespace stereo {

namespace {

Image crop_int(const Image& img, int cx, int cy, int half) {
  Image out(2 * half + 1, 2 * half + 1);
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx) out.at(dx + half, dy + half) = img.at(cx + dx, cy + dy);
  return out;
}

Image crop_bilinear(const Image& img, double cx, double cy, int half) {
  Image out(2 * half + 1, 2 * half + 1);
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx)
      out.at(dx + half, dy + half) =
          bilinear_sample(img, static_cast<float>(cx + dx), static_cast<float>(cy + dy));
  return out;
}

}  // namespace

PatchPairDataset extract_examples(const Image& left, const Image& right, const DisparityMap& gt,
                                  const DatasetParams& params, Rng& rng) {
  if (!left.same_size(right) || gt.width != left.width || gt.height != left.height)
    throw Error(Errc::invalid_argument, "image/ground-truth dimensions differ");
  if (params.dataset_pos < 0 || params.dataset_neg_low < 0 || params.dataset_neg_high < params.dataset_neg_low)
    throw Error(Errc::invalid_argument, "bad offset ranges");
  if (params.input_patch_size < 1 || params.input_patch_size % 2 == 0)
    throw Error(Errc::invalid_argument, "input_patch_size must be odd");
  if (params.guard < 0) throw Error(Errc::invalid_argument, "guard must be >= 0");

  bool any_valid = false;
  for (float v : gt.data) {
    if (disparity_valid(v)) {
      any_valid = true;
      break;
    }
  }
  if (!any_valid) throw Error(Errc::degenerate_input, "ground truth has no valid pixels");

  const int reach = params.input_patch_size / 2 + params.guard;
  const double max_offset = std::max(params.dataset_pos, params.dataset_neg_high);

  PatchPairDataset out;
  out.patch_size = params.input_patch_size + 2 * params.guard;
  out.guard = params.guard;

  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      const float d = gt.at(x, y);
      if (!disparity_valid(d)) continue;
      if (y - reach < 0 || y + reach >= gt.height) continue;
      if (x - reach < 0 || x + reach >= gt.width) continue;
      const double center = static_cast<double>(x) - d;
      if (center - max_offset - reach < 0.0) continue;
      if (center + max_offset + reach > gt.width - 1.0) continue;

      const double o_pos = rng.uniform(-params.dataset_pos, params.dataset_pos);
      const double sign = rng.coin() ? 1.0 : -1.0;
      const double o_neg = sign * rng.uniform(params.dataset_neg_low, params.dataset_neg_high);

      PatchPairExample pos;
      pos.left_patch = crop_int(left, x, y, reach);
      pos.right_patch = crop_bilinear(right, center + o_pos, y, reach);
      pos.positive = true;
      pos.x = x;
      pos.y = y;
      pos.d = d;
      pos.offset = static_cast<float>(o_pos);
      pos.guard = params.guard;

      PatchPairExample neg = pos;
      neg.right_patch = crop_bilinear(right, center + o_neg, y, reach);
      neg.positive = false;
      neg.offset = static_cast<float>(o_neg);

      out.examples.push_back(std::move(pos));
      out.examples.push_back(std::move(neg));
    }
  }
  return out;
}

namespace {

bool range_identity(const AugmentRange& r, double id) { return r.lo == id && r.hi == id; }

void check_range(const AugmentRange& r, bool positive, const char* name) {
  if (r.lo > r.hi) throw Error(Errc::invalid_argument, std::string("range not well-ordered: ") + name);
  if (positive && r.lo <= 0) throw Error(Errc::invalid_argument, std::string("range must be positive: ") + name);
}

void check_params(const AugmentParams& p) {
  check_range(p.rotate_deg, false, "rotate");
  check_range(p.rotate_diff, false, "rotate_diff");
  check_range(p.scale, true, "scale");
  check_range(p.scale_diff, true, "scale_diff");
  check_range(p.horizontal_scale, true, "horizontal_scale");
  check_range(p.horizontal_scale_diff, true, "horizontal_scale_diff");
  check_range(p.horizontal_shear, false, "horizontal_shear");
  check_range(p.horizontal_shear_diff, false, "horizontal_shear_diff");
  check_range(p.brightness, false, "brightness");
  check_range(p.brightness_diff, false, "brightness_diff");
  check_range(p.contrast, true, "contrast");
  check_range(p.contrast_diff, true, "contrast_diff");
  check_range(p.vertical_disparity, false, "vertical_disparity");
}

struct SideTransform {
  double rot_deg = 0, scale = 1, hscale = 1, shear = 0, vshift = 0;
  double contrast = 1, brightness = 0;

  bool geometric_identity() const {
    return rot_deg == 0 && scale == 1 && hscale == 1 && shear == 0 && vshift == 0;
  }
};

// Inverse-mapped warp about the patch center. Positive rotations turn
// clockwise in image coordinates (y points down).
Image warp_patch(const Image& src, const SideTransform& t, int out_size) {
  const int guard = (src.width - out_size) / 2;
  Image out(out_size, out_size);
  if (t.geometric_identity()) {
    for (int y = 0; y < out_size; ++y)
      for (int x = 0; x < out_size; ++x) out.at(x, y) = src.at(x + guard, y + guard);
  } else {
    const double theta = t.rot_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double src_center = (src.width - 1) / 2.0;
    const double out_center = (out_size - 1) / 2.0;
    for (int y = 0; y < out_size; ++y) {
      for (int x = 0; x < out_size; ++x) {
        const double u = x - out_center;
        const double v = y - out_center;
        double px = u - t.shear * v;  // undo shear, then the scales, then rotation
        double py = v;
        px /= t.hscale;
        px /= t.scale;
        py /= t.scale;
        const double rx = c * px + s * py;
        const double ry = -s * px + c * py;
        out.at(x, y) = bilinear_sample(src, static_cast<float>(src_center + rx),
                                       static_cast<float>(src_center + ry + t.vshift));
      }
    }
  }
  for (float& v : out.data) v = v * static_cast<float>(t.contrast) + static_cast<float>(t.brightness);
  return out;
}

}  // namespace

bool is_identity(const AugmentParams& p) {
  return range_identity(p.rotate_deg, 0) && range_identity(p.rotate_diff, 0) && range_identity(p.scale, 1) &&
         range_identity(p.scale_diff, 1) && range_identity(p.horizontal_scale, 1) &&
         range_identity(p.horizontal_scale_diff, 1) && range_identity(p.horizontal_shear, 0) &&
         range_identity(p.horizontal_shear_diff, 0) && range_identity(p.brightness, 0) &&
         range_identity(p.brightness_diff, 0) && range_identity(p.contrast, 1) &&
         range_identity(p.contrast_diff, 1) && range_identity(p.vertical_disparity, 0);
}

int guard_margin(const AugmentParams& p, int patch_size) {
  check_params(p);
  if (is_identity(p)) return 0;  // degenerate ranges take the exact-crop path
  const double half = (patch_size - 1) / 2.0;

  auto combine_mul = [](const AugmentRange& a, const AugmentRange& b) {
    return std::array<double, 6>{a.lo, a.hi, a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  };
  auto combine_add = [](const AugmentRange& a, const AugmentRange& b) {
    return std::array<double, 6>{a.lo, a.hi, a.lo + b.lo, a.lo + b.hi, a.hi + b.lo, a.hi + b.hi};
  };
  const auto scales = combine_mul(p.scale, p.scale_diff);
  const auto hscales = combine_mul(p.horizontal_scale, p.horizontal_scale_diff);
  const auto shears = combine_add(p.horizontal_shear, p.horizontal_shear_diff);
  const auto rotations = combine_add(p.rotate_deg, p.rotate_diff);
  bool has_rotation = false;
  for (double r : rotations) has_rotation = has_rotation || r != 0.0;

  // Extremes of the pre-rotation inverse map; a rotation can point that
  // vector anywhere, so its Euclidean length bounds the reach.
  double reach = 0.0;
  for (double sx : {-half, half}) {
    for (double sy : {-half, half}) {
      for (double sc : scales) {
        for (double hs : hscales) {
          for (double sh : shears) {
            const double px = (sx - sh * sy) / (hs * sc);
            const double py = sy / sc;
            reach = std::max(reach, has_rotation ? std::hypot(px, py) : std::max(std::fabs(px), std::fabs(py)));
          }
        }
      }
    }
  }
  reach += std::max(std::fabs(p.vertical_disparity.lo), std::fabs(p.vertical_disparity.hi));
  return std::max(0, static_cast<int>(std::ceil(reach)) + 1 - static_cast<int>(half));
}

PatchPairExample augment_pair(const PatchPairExample& example, const AugmentParams& p, Rng& rng) {
  check_params(p);
  const int out_size = example.left_patch.width - 2 * example.guard;
  if (out_size < 1 || example.left_patch.width != example.left_patch.height ||
      !example.left_patch.same_size(example.right_patch))
    throw Error(Errc::invalid_argument, "malformed example patches");

  const double rotate = rng.uniform(p.rotate_deg.lo, p.rotate_deg.hi);
  const double rotate_diff = rng.uniform(p.rotate_diff.lo, p.rotate_diff.hi);
  const double scale = rng.uniform(p.scale.lo, p.scale.hi);
  const double scale_diff = rng.uniform(p.scale_diff.lo, p.scale_diff.hi);
  const double hscale = rng.uniform(p.horizontal_scale.lo, p.horizontal_scale.hi);
  const double hscale_diff = rng.uniform(p.horizontal_scale_diff.lo, p.horizontal_scale_diff.hi);
  const double shear = rng.uniform(p.horizontal_shear.lo, p.horizontal_shear.hi);
  const double shear_diff = rng.uniform(p.horizontal_shear_diff.lo, p.horizontal_shear_diff.hi);
  const double brightness = rng.uniform(p.brightness.lo, p.brightness.hi);
  const double brightness_diff = rng.uniform(p.brightness_diff.lo, p.brightness_diff.hi);
  const double contrast = rng.uniform(p.contrast.lo, p.contrast.hi);
  const double contrast_diff = rng.uniform(p.contrast_diff.lo, p.contrast_diff.hi);
  const double vdisp = rng.uniform(p.vertical_disparity.lo, p.vertical_disparity.hi);

  SideTransform left{rotate, scale, hscale, shear, 0.0, contrast, brightness};
  SideTransform right{rotate + rotate_diff, scale * scale_diff, hscale * hscale_diff,
                      shear + shear_diff,   vdisp,              contrast * contrast_diff,
                      brightness + brightness_diff};

  PatchPairExample out = example;
  out.left_patch = warp_patch(example.left_patch, left, out_size);
  out.right_patch = warp_patch(example.right_patch, right, out_size);
  out.guard = 0;
  return out;
}

HingeResult hinge_loss(double s_plus, double s_minus, double margin) {
  if (!(margin > 0)) throw Error(Errc::invalid_argument, "margin must be positive");
  const double loss = margin + s_minus - s_plus;
  if (loss > 0) return {loss, -1.0, 1.0};
  return {0.0, 0.0, 0.0};
}

BceResult bce_loss(double s, int target) {
  if (target != 0 && target != 1) throw Error(Errc::invalid_argument, "target must be 0 or 1");
  constexpr double eps = 1e-7;
  const double sc = std::clamp(s, eps, 1.0 - eps);
  const double t = target;
  return {-(t * std::log(sc) + (1.0 - t) * std::log(1.0 - sc)), -t / sc + (1.0 - t) / (1.0 - sc)};
}

void sgd_momentum_step(std::span<float> params, std::span<const float> grads, std::span<float> velocity,
                       float learning_rate, float momentum) {
  if (params.size() != grads.size() || params.size() != velocity.size())
    throw Error(Errc::invalid_argument, "parameter/gradient/velocity sizes differ");
  for (size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] - learning_rate * grads[i];
    params[i] += velocity[i];
  }
}

NetworkWeights init_weights(const NetworkSpec& spec, uint64_t seed) {
  validate_spec(spec);
  Rng rng(seed);
  NetworkWeights w;
  for (int i = 0; i < spec.num_conv_layers; ++i) {
    ConvLayerT<float> l;
    l.in_channels = i == 0 ? 1 : spec.num_conv_feature_maps;
    l.out_channels = spec.num_conv_feature_maps;
    l.kernel = spec.conv_kernel_size;
    const double bound = std::sqrt(1.0 / (l.in_channels * l.kernel * l.kernel));
    l.kernels.resize(static_cast<size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel);
    for (float& v : l.kernels) v = static_cast<float>(rng.uniform(-bound, bound));
    l.bias.assign(static_cast<size_t>(l.out_channels), 0.0f);
    w.conv.push_back(std::move(l));
  }
  if (spec.arch == Arch::accurate) {
    for (int i = 0; i < spec.num_fc_layers; ++i) {
      FcLayerT<float> l;
      l.in_units = i == 0 ? 2 * spec.num_conv_feature_maps : spec.num_fc_units;
      l.out_units = i + 1 == spec.num_fc_layers ? 1 : spec.num_fc_units;
      const double bound = std::sqrt(1.0 / l.in_units);
      l.weight.resize(static_cast<size_t>(l.out_units) * l.in_units);
      for (float& v : l.weight) v = static_cast<float>(rng.uniform(-bound, bound));
      l.bias.assign(static_cast<size_t>(l.out_units), 0.0f);
      w.fc.push_back(std::move(l));
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Patch-level forward/backward, templated so the gradient check runs the same
// code in double precision.

namespace {

template <typename T>
WeightsT<T> zeros_like(const WeightsT<T>& w) {
  WeightsT<T> out = w;
  for (auto& l : out.conv) {
    std::fill(l.kernels.begin(), l.kernels.end(), T{});
    std::fill(l.bias.begin(), l.bias.end(), T{});
  }
  for (auto& l : out.fc) {
    std::fill(l.weight.begin(), l.weight.end(), T{});
    std::fill(l.bias.begin(), l.bias.end(), T{});
  }
  return out;
}

template <typename T>
void accumulate(WeightsT<T>& into, const WeightsT<T>& from) {
  for (size_t i = 0; i < into.conv.size(); ++i) {
    for (size_t j = 0; j < into.conv[i].kernels.size(); ++j) into.conv[i].kernels[j] += from.conv[i].kernels[j];
    for (size_t j = 0; j < into.conv[i].bias.size(); ++j) into.conv[i].bias[j] += from.conv[i].bias[j];
  }
  for (size_t i = 0; i < into.fc.size(); ++i) {
    for (size_t j = 0; j < into.fc[i].weight.size(); ++j) into.fc[i].weight[j] += from.fc[i].weight[j];
    for (size_t j = 0; j < into.fc[i].bias.size(); ++j) into.fc[i].bias[j] += from.fc[i].bias[j];
  }
}

template <typename T, typename Fn>
void for_each_array(WeightsT<T>& w, Fn&& fn) {
  for (auto& l : w.conv) {
    fn(l.kernels);
    fn(l.bias);
  }
  for (auto& l : w.fc) {
    fn(l.weight);
    fn(l.bias);
  }
}

template <typename T>
struct ConvTrace {
  std::vector<TensorT<T>> inputs;  // input fed to layer i
  std::vector<TensorT<T>> pre;     // conv output of layer i before ReLU
};

template <typename T>
std::vector<T> forward_conv_stack(const NetworkSpec& spec, const WeightsT<T>& w, const TensorT<T>& patch,
                                  ConvTrace<T>* trace) {
  TensorT<T> t = patch;
  for (int i = 0; i < spec.num_conv_layers; ++i) {
    if (trace) trace->inputs.push_back(t);
    t = conv_valid(t, w.conv[i]);
    if (trace) trace->pre.push_back(t);
    if (conv_layer_has_relu(spec, i)) relu_inplace(t);
  }
  return t.v;
}

template <typename T>
void backward_conv_stack(const NetworkSpec& spec, const WeightsT<T>& w, const ConvTrace<T>& trace,
                         const std::vector<T>& d_feature, WeightsT<T>& grads) {
  TensorT<T> g(spec.num_conv_feature_maps, 1, 1);
  g.v = d_feature;
  for (int i = spec.num_conv_layers - 1; i >= 0; --i) {
    const ConvLayerT<T>& layer = w.conv[i];
    const TensorT<T>& in = trace.inputs[i];
    const TensorT<T>& pre = trace.pre[i];
    if (conv_layer_has_relu(spec, i)) {
      for (size_t j = 0; j < g.v.size(); ++j)
        if (pre.v[j] <= T{}) g.v[j] = T{};
    }
    ConvLayerT<T>& gl = grads.conv[i];
    const int oh = pre.height;
    const int ow = pre.width;
    for (int oc = 0; oc < layer.out_channels; ++oc) {
      T bias_acc{};
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) bias_acc += g.at(oc, oy, ox);
      gl.bias[oc] += bias_acc;
      for (int ic = 0; ic < layer.in_channels; ++ic) {
        for (int ky = 0; ky < layer.kernel; ++ky) {
          for (int kx = 0; kx < layer.kernel; ++kx) {
            T acc{};
            for (int oy = 0; oy < oh; ++oy)
              for (int ox = 0; ox < ow; ++ox) acc += in.at(ic, oy + ky, ox + kx) * g.at(oc, oy, ox);
            gl.kernels[layer.kernel_index(oc, ic, ky, kx)] += acc;
          }
        }
      }
    }
    if (i == 0) break;  // gradient w.r.t. the raw patch is never needed
    TensorT<T> d_in(in.channels, in.height, in.width);
    for (int ic = 0; ic < in.channels; ++ic) {
      for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
          T acc{};
          for (int oc = 0; oc < layer.out_channels; ++oc) {
            for (int ky = 0; ky < layer.kernel; ++ky) {
              const int oy = y - ky;
              if (oy < 0 || oy >= oh) continue;
              for (int kx = 0; kx < layer.kernel; ++kx) {
                const int ox = x - kx;
                if (ox < 0 || ox >= ow) continue;
                acc += layer.kernels[layer.kernel_index(oc, ic, ky, kx)] * g.at(oc, oy, ox);
              }
            }
          }
          d_in.at(ic, y, x) = acc;
        }
      }
    }
    g = std::move(d_in);
  }
}

template <typename T>
struct FcTrace {
  std::vector<std::vector<T>> inputs;
  std::vector<std::vector<T>> pre;
  T s{};  // sigmoid output
};

template <typename T>
T forward_fc_stack(const WeightsT<T>& w, std::vector<T> act, FcTrace<T>* trace) {
  for (size_t i = 0; i < w.fc.size(); ++i) {
    if (trace) trace->inputs.push_back(act);
    act = fc_forward(w.fc[i], act);
    if (trace) trace->pre.push_back(act);
    if (i + 1 < w.fc.size()) {
      for (T& v : act)
        if (v < T{}) v = T{};
    }
  }
  const T s = sigmoid(act[0]);
  if (trace) trace->s = s;
  return s;
}

// Returns the gradient w.r.t. the concatenated feature vector.
template <typename T>
std::vector<T> backward_fc_stack(const WeightsT<T>& w, const FcTrace<T>& trace, T d_z, WeightsT<T>& grads) {
  std::vector<T> g{d_z};
  for (int i = static_cast<int>(w.fc.size()) - 1; i >= 0; --i) {
    const FcLayerT<T>& layer = w.fc[i];
    const std::vector<T>& in = trace.inputs[i];
    FcLayerT<T>& gl = grads.fc[i];
    for (int o = 0; o < layer.out_units; ++o) {
      gl.bias[o] += g[o];
      T* grow = &gl.weight[static_cast<size_t>(o) * layer.in_units];
      for (int j = 0; j < layer.in_units; ++j) grow[j] += g[o] * in[j];
    }
    std::vector<T> d_in(layer.in_units, T{});
    for (int o = 0; o < layer.out_units; ++o) {
      const T* wrow = &layer.weight[static_cast<size_t>(o) * layer.in_units];
      for (int j = 0; j < layer.in_units; ++j) d_in[j] += wrow[j] * g[o];
    }
    if (i > 0) {
      const std::vector<T>& pre_prev = trace.pre[i - 1];
      for (size_t j = 0; j < d_in.size(); ++j)
        if (pre_prev[j] <= T{}) d_in[j] = T{};
    }
    g = std::move(d_in);
  }
  return g;
}

template <typename T>
struct CosineResult {
  T s;
  std::vector<T> d_a;  // ds/da
  std::vector<T> d_b;
};

template <typename T>
CosineResult<T> cosine_with_grad(const std::vector<T>& a, const std::vector<T>& b) {
  T dot{}, na2{}, nb2{};
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na2 += a[i] * a[i];
    nb2 += b[i] * b[i];
  }
  if (na2 == T{} || nb2 == T{}) throw Error(Errc::degenerate_input, "zero-norm feature vector");
  const T na = std::sqrt(na2);
  const T nb = std::sqrt(nb2);
  const T s = dot / (na * nb);
  CosineResult<T> out;
  out.s = s;
  out.d_a.resize(a.size());
  out.d_b.resize(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    out.d_a[i] = b[i] / (na * nb) - s * a[i] / na2;
    out.d_b[i] = a[i] / (na * nb) - s * b[i] / nb2;
  }
  return out;
}

template <typename T>
TensorT<T> patch_tensor(const Image& patch) {
  TensorT<T> t(1, patch.height, patch.width);
  for (size_t i = 0; i < patch.data.size(); ++i) t.v[i] = static_cast<T>(patch.data[i]);
  return t;
}

template <typename T>
struct PreparedPair {
  TensorT<T> pos_left, pos_right, neg_left, neg_right;
};

// Hinge loss over one (positive, negative) pair; gradients accumulate when
// grads is non-null.
template <typename T>
T hinge_pair_unit(const NetworkSpec& spec, const WeightsT<T>& w, const PreparedPair<T>& pair, T margin,
                  WeightsT<T>* grads) {
  ConvTrace<T> tpl, tpr, tnl, tnr;
  ConvTrace<T>* cpl = grads ? &tpl : nullptr;
  ConvTrace<T>* cpr = grads ? &tpr : nullptr;
  ConvTrace<T>* cnl = grads ? &tnl : nullptr;
  ConvTrace<T>* cnr = grads ? &tnr : nullptr;
  const std::vector<T> fpl = forward_conv_stack(spec, w, pair.pos_left, cpl);
  const std::vector<T> fpr = forward_conv_stack(spec, w, pair.pos_right, cpr);
  const std::vector<T> fnl = forward_conv_stack(spec, w, pair.neg_left, cnl);
  const std::vector<T> fnr = forward_conv_stack(spec, w, pair.neg_right, cnr);
  const CosineResult<T> pos = cosine_with_grad(fpl, fpr);
  const CosineResult<T> neg = cosine_with_grad(fnl, fnr);
  const HingeResult h = hinge_loss(static_cast<double>(pos.s), static_cast<double>(neg.s), static_cast<double>(margin));
  if (grads && h.loss > 0) {
    std::vector<T> d(fpl.size());
    auto scaled = [&](const std::vector<T>& src, T k) {
      for (size_t i = 0; i < src.size(); ++i) d[i] = k * src[i];
      return d;
    };
    backward_conv_stack(spec, w, tpl, scaled(pos.d_a, static_cast<T>(h.d_s_plus)), *grads);
    backward_conv_stack(spec, w, tpr, scaled(pos.d_b, static_cast<T>(h.d_s_plus)), *grads);
    backward_conv_stack(spec, w, tnl, scaled(neg.d_a, static_cast<T>(h.d_s_minus)), *grads);
    backward_conv_stack(spec, w, tnr, scaled(neg.d_b, static_cast<T>(h.d_s_minus)), *grads);
  }
  return static_cast<T>(h.loss);
}

// Cross-entropy loss over one example of the accurate architecture.
template <typename T>
T bce_example_unit(const NetworkSpec& spec, const WeightsT<T>& w, const TensorT<T>& left, const TensorT<T>& right,
                   int target, WeightsT<T>* grads) {
  ConvTrace<T> tl, tr;
  ConvTrace<T>* ctl = grads ? &tl : nullptr;
  ConvTrace<T>* ctr = grads ? &tr : nullptr;
  std::vector<T> fl = forward_conv_stack(spec, w, left, ctl);
  const std::vector<T> fr = forward_conv_stack(spec, w, right, ctr);
  std::vector<T> act = fl;
  act.insert(act.end(), fr.begin(), fr.end());
  FcTrace<T> ft;
  const T s = forward_fc_stack(w, std::move(act), grads ? &ft : nullptr);
  const BceResult b = bce_loss(static_cast<double>(s), target);
  if (grads) {
    const T d_z = static_cast<T>(b.d_s) * s * (T{1} - s);
    const std::vector<T> d_concat = backward_fc_stack(w, ft, d_z, *grads);
    const size_t f = fl.size();
    std::vector<T> part(d_concat.begin(), d_concat.begin() + f);
    backward_conv_stack(spec, w, tl, part, *grads);
    part.assign(d_concat.begin() + f, d_concat.end());
    backward_conv_stack(spec, w, tr, part, *grads);
  }
  return static_cast<T>(b.loss);
}

template <typename T>
T batch_mean_loss(const NetworkSpec& spec, const WeightsT<T>& w, const std::vector<PreparedPair<T>>& pairs,
                  T margin, WeightsT<T>* grads) {
  T total{};
  size_t units = 0;
  for (const auto& pair : pairs) {
    if (spec.arch == Arch::fast) {
      total += hinge_pair_unit(spec, w, pair, margin, grads);
      units += 1;
    } else {
      total += bce_example_unit(spec, w, pair.pos_left, pair.pos_right, 1, grads);
      total += bce_example_unit(spec, w, pair.neg_left, pair.neg_right, 0, grads);
      units += 2;
    }
  }
  if (grads) {
    const T inv = T{1} / static_cast<T>(units);
    for_each_array(*grads, [&](std::vector<T>& a) {
      for (T& v : a) v *= inv;
    });
  }
  return total / static_cast<T>(units);
}

template <typename T>
std::vector<PreparedPair<T>> prepare_batch(const std::vector<PatchPairExample>& batch) {
  if (batch.empty() || batch.size() % 2 != 0)
    throw Error(Errc::invalid_argument, "batch must hold (positive, negative) pairs");
  std::vector<PreparedPair<T>> out;
  out.reserve(batch.size() / 2);
  for (size_t i = 0; i < batch.size(); i += 2) {
    if (!batch[i].positive || batch[i + 1].positive)
      throw Error(Errc::invalid_argument, "pairs must alternate positive/negative");
    out.push_back({patch_tensor<T>(batch[i].left_patch), patch_tensor<T>(batch[i].right_patch),
                   patch_tensor<T>(batch[i + 1].left_patch), patch_tensor<T>(batch[i + 1].right_patch)});
  }
  return out;
}

}  // namespace

double gradient_check(const NetworkSpec& spec, const NetworkWeights& weights,
                      const std::vector<PatchPairExample>& batch, double margin) {
  validate_weights(spec, weights);
  WeightsT<double> w = convert_weights<float, double>(weights);
  const std::vector<PreparedPair<double>> pairs = prepare_batch<double>(batch);

  WeightsT<double> analytic = zeros_like(w);
  batch_mean_loss<double>(spec, w, pairs, margin, &analytic);

  constexpr double h = 1e-5;
  double max_rel = 0.0;

  auto probe = [&](std::vector<double>& params, const std::vector<double>& grad) {
    for (size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + h;
      const double up = batch_mean_loss<double>(spec, w, pairs, margin, nullptr);
      params[i] = saved - h;
      const double down = batch_mean_loss<double>(spec, w, pairs, margin, nullptr);
      params[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double rel = std::fabs(grad[i] - numeric) / std::max({std::fabs(grad[i]), std::fabs(numeric), 1e-3});
      max_rel = std::max(max_rel, rel);
    }
  };
  for (size_t i = 0; i < w.conv.size(); ++i) {
    probe(w.conv[i].kernels, analytic.conv[i].kernels);
    probe(w.conv[i].bias, analytic.conv[i].bias);
  }
  for (size_t i = 0; i < w.fc.size(); ++i) {
    probe(w.fc[i].weight, analytic.fc[i].weight);
    probe(w.fc[i].bias, analytic.fc[i].bias);
  }
  return max_rel;
}

namespace {

// Margins that keep a finite-difference probe away from ReLU, hinge and
// cosine kinks. A batch violating them is redrawn from the next sub-seed.
template <typename T>
bool batch_is_clean(const NetworkSpec& spec, const WeightsT<T>& w, const std::vector<PreparedPair<T>>& pairs,
                    T margin) {
  constexpr double relu_margin = 1e-3;
  constexpr double hinge_margin = 1e-3;
  auto stack_clean = [&](const TensorT<T>& patch, std::vector<T>& feature) {
    ConvTrace<T> trace;
    feature = forward_conv_stack(spec, w, patch, &trace);
    for (const auto& pre : trace.pre)
      for (const T v : pre.v)
        if (std::fabs(static_cast<double>(v)) < relu_margin) return false;
    return true;
  };
  for (const auto& pair : pairs) {
    std::vector<T> fpl, fpr, fnl, fnr;
    if (!stack_clean(pair.pos_left, fpl) || !stack_clean(pair.pos_right, fpr) ||
        !stack_clean(pair.neg_left, fnl) || !stack_clean(pair.neg_right, fnr))
      return false;
    if (spec.arch == Arch::fast) {
      const T sp = cosine_with_grad(fpl, fpr).s;
      const T sn = cosine_with_grad(fnl, fnr).s;
      const double active = static_cast<double>(margin + sn - sp);
      if (active < hinge_margin) return false;  // keep the hinge active and off its kink
    } else {
      auto head_clean = [&](const std::vector<T>& a, const std::vector<T>& b) {
        std::vector<T> act = a;
        act.insert(act.end(), b.begin(), b.end());
        FcTrace<T> ft;
        forward_fc_stack(w, std::move(act), &ft);
        for (size_t i = 0; i + 1 < ft.pre.size(); ++i)
          for (const T v : ft.pre[i])
            if (std::fabs(static_cast<double>(v)) < relu_margin) return false;
        return std::fabs(static_cast<double>(ft.pre.back()[0])) < 10.0;
      };
      if (!head_clean(fpl, fpr) || !head_clean(fnl, fnr)) return false;
    }
  }
  return true;
}

}  // namespace

double gradient_check_arch(Arch arch, uint64_t seed) {
  NetworkSpec spec;
  spec.arch = arch;
  spec.num_conv_layers = 2;
  spec.conv_kernel_size = 3;
  spec.num_conv_feature_maps = arch == Arch::fast ? 6 : 5;
  spec.input_patch_size = 5;
  if (arch == Arch::accurate) {
    spec.num_fc_layers = 2;
    spec.num_fc_units = 8;
  }

  for (uint64_t attempt = 0;; ++attempt) {
    const uint64_t sub_seed = seed * 0x9e3779b97f4a7c15ull + attempt;
    const NetworkWeights weights = init_weights(spec, sub_seed);
    Rng rng(sub_seed ^ 0x5851f42d4c957f2dull);

    std::vector<PatchPairExample> batch;
    for (int p = 0; p < 4; ++p) {
      for (int side = 0; side < 2; ++side) {
        PatchPairExample ex;
        ex.positive = side == 0;
        ex.left_patch = Image(spec.input_patch_size, spec.input_patch_size);
        ex.right_patch = Image(spec.input_patch_size, spec.input_patch_size);
        for (float& v : ex.left_patch.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        for (float& v : ex.right_patch.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        batch.push_back(std::move(ex));
      }
    }
    const WeightsT<double> wd = convert_weights<float, double>(weights);
    if (!batch_is_clean<double>(spec, wd, prepare_batch<double>(batch), 0.2)) continue;
    return gradient_check(spec, weights, batch);
  }
}

double learning_rate_for_epoch(const TrainConfig& config, int epoch) {
  return epoch >= config.decay_epoch ? config.learning_rate / config.decay_factor : config.learning_rate;
}

TrainResult train(const NetworkSpec& spec, const PatchPairDataset& dataset, const TrainConfig& config,
                  const AugmentParams& augment) {
  validate_spec(spec);
  check_params(augment);
  if (dataset.examples.empty()) throw Error(Errc::degenerate_input, "empty dataset");
  if (dataset.examples.size() % 2 != 0)
    throw Error(Errc::invalid_argument, "dataset must hold (positive, negative) pairs");
  if (dataset.patch_size - 2 * dataset.guard != spec.input_patch_size)
    throw Error(Errc::invalid_argument, "dataset patch size does not match the network input");
  for (size_t i = 0; i + 1 < dataset.examples.size(); i += 2) {
    if (!dataset.examples[i].positive || dataset.examples[i + 1].positive)
      throw Error(Errc::invalid_argument, "examples must alternate positive/negative");
  }
  if (dataset.guard < guard_margin(augment, spec.input_patch_size))
    throw Error(Errc::invalid_argument, "dataset guard too small for the configured augmentation");
  if (config.epochs < 1 || config.batch_size < 2 || config.decay_epoch < 1 ||
      !(config.learning_rate > 0) || !(config.decay_factor > 0) || config.momentum < 0)
    throw Error(Errc::invalid_argument, "bad training configuration");

  NetworkWeights weights = init_weights(spec, config.seed);
  NetworkWeights velocity = zeros_like(weights);
  Rng rng(config.seed ^ 0x6a09e667f3bcc908ull);  // stream distinct from the init draw

  const size_t num_pairs = dataset.examples.size() / 2;
  const size_t pairs_per_batch = std::max<size_t>(1, static_cast<size_t>(config.batch_size) / 2);
  std::vector<size_t> order(num_pairs);
  for (size_t i = 0; i < num_pairs; ++i) order[i] = i;

  // Gradients accumulate into a fixed number of chunks, each sequential in
  // unit order and combined in chunk order, so results do not depend on how
  // many threads actually run.
  constexpr int kChunks = 8;
  std::array<NetworkWeights, kChunks> chunk_grads;
  std::array<double, kChunks> chunk_loss{};
  for (auto& g : chunk_grads) g = zeros_like(weights);

  TrainResult result;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = learning_rate_for_epoch(config, epoch);

    for (size_t i = num_pairs; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_loss_sum = 0.0;
    size_t epoch_units = 0;
    for (size_t start = 0; start < num_pairs; start += pairs_per_batch) {
      const size_t count = std::min(pairs_per_batch, num_pairs - start);
      std::vector<PreparedPair<float>> prepared;
      prepared.reserve(count);
      for (size_t j = 0; j < count; ++j) {
        const size_t pair = order[start + j];
        const PatchPairExample pos = augment_pair(dataset.examples[2 * pair], augment, rng);
        const PatchPairExample neg = augment_pair(dataset.examples[2 * pair + 1], augment, rng);
        prepared.push_back({patch_tensor<float>(pos.left_patch), patch_tensor<float>(pos.right_patch),
                            patch_tensor<float>(neg.left_patch), patch_tensor<float>(neg.right_patch)});
      }
      const size_t units = spec.arch == Arch::fast ? count : 2 * count;

      for (int c = 0; c < kChunks; ++c) {
        chunk_grads[c] = zeros_like(chunk_grads[c]);
        chunk_loss[c] = 0.0;
      }
      const float margin = static_cast<float>(config.margin);
      std::array<std::exception_ptr, kChunks> chunk_error{};
      auto run_chunk = [&](int c) {
        try {
          const size_t lo = count * c / kChunks;
          const size_t hi = count * (c + 1) / kChunks;
          double loss = 0.0;
          for (size_t j = lo; j < hi; ++j) {
            if (spec.arch == Arch::fast) {
              loss += hinge_pair_unit<float>(spec, weights, prepared[j], margin, &chunk_grads[c]);
            } else {
              loss += bce_example_unit<float>(spec, weights, prepared[j].pos_left, prepared[j].pos_right, 1,
                                              &chunk_grads[c]);
              loss += bce_example_unit<float>(spec, weights, prepared[j].neg_left, prepared[j].neg_right, 0,
                                              &chunk_grads[c]);
            }
          }
          chunk_loss[c] = loss;
        } catch (...) {
          chunk_error[c] = std::current_exception();
        }
      };
      const int threads = std::min<int>(kChunks, static_cast<int>(std::thread::hardware_concurrency()));
      if (threads > 1) {
        std::vector<std::thread> pool;
        pool.reserve(kChunks);
        for (int c = 0; c < kChunks; ++c) pool.emplace_back(run_chunk, c);
        for (auto& t : pool) t.join();
      } else {
        for (int c = 0; c < kChunks; ++c) run_chunk(c);
      }
      for (const auto& err : chunk_error) {
        if (err) std::rethrow_exception(err);
      }

      NetworkWeights& total = chunk_grads[0];
      for (int c = 1; c < kChunks; ++c) accumulate(total, chunk_grads[c]);
      const float inv_units = 1.0f / static_cast<float>(units);
      for_each_array(total, [&](std::vector<float>& a) {
        for (float& v : a) v *= inv_units;
      });

      auto update = [&](std::vector<float>& p, std::vector<float>& g, std::vector<float>& v) {
        sgd_momentum_step(p, g, v, static_cast<float>(lr), static_cast<float>(config.momentum));
      };
      for (size_t i = 0; i < weights.conv.size(); ++i) {
        update(weights.conv[i].kernels, total.conv[i].kernels, velocity.conv[i].kernels);
        update(weights.conv[i].bias, total.conv[i].bias, velocity.conv[i].bias);
      }
      for (size_t i = 0; i < weights.fc.size(); ++i) {
        update(weights.fc[i].weight, total.fc[i].weight, velocity.fc[i].weight);
        update(weights.fc[i].bias, total.fc[i].bias, velocity.fc[i].bias);
      }

      for (int c = 0; c < kChunks; ++c) epoch_loss_sum += chunk_loss[c];
      epoch_units += units;
    }
    result.epoch_loss.push_back(epoch_loss_sum / static_cast<double>(epoch_units));
  }
  result.weights = std::move(weights);
  return result;
}

// ---------------------------------------------------------------------------
// Dataset serialization

namespace {

constexpr char kDatasetMagic[4] = {'S', 'T', 'D', 'S'};
constexpr uint32_t kDatasetVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<uint8_t>& out, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(out, u);
}

struct ByteReader {
  const std::vector<uint8_t>& bytes;
  size_t pos = 0;

  uint32_t u32() {
    if (bytes.size() - pos < 4) throw Error(Errc::format, "truncated dataset file");
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
  uint8_t u8() {
    if (pos >= bytes.size()) throw Error(Errc::format, "truncated dataset file");
    return bytes[pos++];
  }
};

}  // namespace

void save_dataset(const PatchPairDataset& dataset, const std::string& path) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kDatasetMagic, kDatasetMagic + 4);
  put_u32(out, kDatasetVersion);
  put_u32(out, static_cast<uint32_t>(dataset.patch_size));
  put_u32(out, static_cast<uint32_t>(dataset.guard));
  put_u32(out, static_cast<uint32_t>(dataset.examples.size()));
  for (const auto& ex : dataset.examples) {
    out.push_back(ex.positive ? 1 : 0);
    put_u32(out, static_cast<uint32_t>(ex.x));
    put_u32(out, static_cast<uint32_t>(ex.y));
    put_f32(out, ex.d);
    put_f32(out, ex.offset);
    for (float v : ex.left_patch.data) put_f32(out, v);
    for (float v : ex.right_patch.data) put_f32(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io, "cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(Errc::io, "write failed for " + path);
}

PatchPairDataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kDatasetMagic, 4) != 0)
    throw Error(Errc::format, "not a dataset file");
  ByteReader r{bytes, 4};
  if (r.u32() != kDatasetVersion) throw Error(Errc::format, "unsupported dataset version");
  PatchPairDataset out;
  out.patch_size = static_cast<int>(r.u32());
  out.guard = static_cast<int>(r.u32());
  if (out.patch_size < 1 || out.guard < 0 || out.patch_size <= 2 * out.guard)
    throw Error(Errc::format, "bad dataset geometry");
  const uint32_t count = r.u32();
  out.examples.reserve(count);
  const size_t pixels = static_cast<size_t>(out.patch_size) * out.patch_size;
  for (uint32_t i = 0; i < count; ++i) {
    PatchPairExample ex;
    ex.positive = r.u8() != 0;
    ex.x = static_cast<int>(r.u32());
    ex.y = static_cast<int>(r.u32());
    ex.d = r.f32();
    ex.offset = r.f32();
    ex.guard = out.guard;
    ex.left_patch = Image(out.patch_size, out.patch_size);
    for (size_t j = 0; j < pixels; ++j) ex.left_patch.data[j] = r.f32();
    ex.right_patch = Image(out.patch_size, out.patch_size);
    for (size_t j = 0; j < pixels; ++j) ex.right_patch.data[j] = r.f32();
    out.examples.push_back(std::move(ex));
  }
  return out;
}

}  // namespace stereo
