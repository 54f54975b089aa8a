#pragma once

#include <span>
#include <string>
#include <vector>

#include "image.hpp"
#include "net.hpp"
#include "rng.hpp"

namespace stereo {

// One labeled patch pair. Stored patches are (input_patch_size + 2 * guard)
// wide so augmentation can warp from real context; the network consumes the
// central input_patch_size crop.
struct PatchPairExample {
  Image left_patch;
  Image right_patch;
  bool positive = false;
  int x = 0;  // source pixel in the left image
  int y = 0;
  float d = 0.0f;       // ground-truth disparity at (x, y)
  float offset = 0.0f;  // o_pos or o_neg applied to the right center
  int guard = 0;
};

// Examples come in (positive, negative) pairs drawn from the same pixel:
// positive at even indices, its negative right after. Balance holds by
// construction.
struct PatchPairDataset {
  int patch_size = 0;  // stored side, input_patch_size + 2 * guard
  int guard = 0;
  std::vector<PatchPairExample> examples;
};

struct DatasetParams {
  double dataset_pos = 1.0;
  double dataset_neg_low = 4.0;
  double dataset_neg_high = 10.0;
  int input_patch_size = 9;
  int guard = 0;
};

// At every valid ground-truth pixel far enough from the borders (accounting
// for patch reach and the largest possible offset), emit one positive with
// offset uniform in [-dataset_pos, dataset_pos] and one negative with offset
// magnitude uniform in [neg_low, neg_high] and a fair sign. Fractional right
// centers are sampled bilinearly.
PatchPairDataset extract_examples(const Image& left, const Image& right, const DisparityMap& gt,
                                  const DatasetParams& params, Rng& rng);

struct AugmentRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Transform ranges; *_diff entries perturb the right patch relative to the
// left. Degenerate ranges give the identity.
struct AugmentParams {
  AugmentRange rotate_deg{0, 0};
  AugmentRange rotate_diff{0, 0};
  AugmentRange scale{1, 1};
  AugmentRange scale_diff{1, 1};
  AugmentRange horizontal_scale{1, 1};
  AugmentRange horizontal_scale_diff{1, 1};
  AugmentRange horizontal_shear{0, 0};
  AugmentRange horizontal_shear_diff{0, 0};
  AugmentRange brightness{0, 0};
  AugmentRange brightness_diff{0, 0};
  AugmentRange contrast{1, 1};
  AugmentRange contrast_diff{1, 1};
  AugmentRange vertical_disparity{0, 0};
};

bool is_identity(const AugmentParams& params);

// Guard pixels needed so the inverse-mapped crop of any transform within the
// configured ranges stays inside the stored patch.
int guard_margin(const AugmentParams& params, int patch_size);

// Applies freshly drawn parameters: the left patch gets (rotate, scale, ...),
// the right patch the *_diff-composed counterparts plus the vertical
// translation. Geometric transforms warp about the patch center with
// inverse-mapped bilinear sampling; intensities then map through
// v * contrast + brightness. The label never changes.
PatchPairExample augment_pair(const PatchPairExample& example, const AugmentParams& params, Rng& rng);

struct HingeResult {
  double loss;
  double d_s_plus;
  double d_s_minus;
};

// max(0, margin + s_minus - s_plus) with subgradient (-1, +1) when active.
HingeResult hinge_loss(double s_plus, double s_minus, double margin);

struct BceResult {
  double loss;
  double d_s;
};

// Negated log-likelihood -[t log s + (1 - t) log(1 - s)], s clamped to
// [1e-7, 1 - 1e-7].
BceResult bce_loss(double s, int target);

// Classical momentum: v <- momentum * v - lr * g; p <- p + v.
void sgd_momentum_step(std::span<float> params, std::span<const float> grads, std::span<float> velocity,
                       float learning_rate, float momentum);

// Uniform in +/- sqrt(1 / fan_in), biases zero.
NetworkWeights init_weights(const NetworkSpec& spec, uint64_t seed);

// Analytic gradients vs central finite differences (h = 1e-5, double
// precision) of the mean batch loss, over every parameter. Returns the
// largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-3). The batch
// holds (positive, negative) pairs with guard 0.
double gradient_check(const NetworkSpec& spec, const NetworkWeights& weights,
                      const std::vector<PatchPairExample>& batch, double margin = 0.2);

// Self-contained check on a small network: random weights and a random batch
// chosen (deterministically from seed) away from ReLU/hinge kinks.
double gradient_check_arch(Arch arch, uint64_t seed);

struct TrainConfig {
  int epochs = 14;
  double learning_rate = 0.002;  // 0.003 for the accurate architecture
  int decay_epoch = 11;          // 1-based; learning rate divided from here on
  double decay_factor = 10.0;
  double momentum = 0.9;
  int batch_size = 128;  // examples per batch; pairs stay adjacent
  double margin = 0.2;
  uint64_t seed = 0;
};

struct TrainResult {
  NetworkWeights weights;
  std::vector<double> epoch_loss;  // mean unit loss per epoch
};

// Step schedule: the base rate until decay_epoch (1-based), divided by
// decay_factor from then on.
double learning_rate_for_epoch(const TrainConfig& config, int epoch);

// Shuffled minibatch SGD with momentum. Pairs are shuffled as units; the fast
// architecture consumes each (positive, negative) pair through the hinge
// loss, the accurate architecture feeds both examples to the cross-entropy
// loss. Augmentation parameters are redrawn at every presentation. Fixed
// seeds give bit-identical weights.
TrainResult train(const NetworkSpec& spec, const PatchPairDataset& dataset, const TrainConfig& config,
                  const AugmentParams& augment);

// "STDS" dump of an extracted dataset; round-trips exactly.
void save_dataset(const PatchPairDataset& dataset, const std::string& path);
PatchPairDataset load_dataset(const std::string& path);

}  // namespace stereo
