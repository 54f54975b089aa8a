#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cbca.hpp"
#include "hyperparams.hpp"
#include "refine.hpp"
#include "sgm.hpp"

namespace stereo {

enum class CostSource { sad, census, ncc, cnn_fast, cnn_accurate };

CostSource cost_source_from_name(const std::string& name);
const char* cost_source_name(CostSource source);

// Optional capture of intermediate stage outputs (left-reference path only)
// plus per-stage wall times.
struct PipelineTrace {
  bool capture = false;
  CostVolume raw;
  CostVolume post_cbca1;
  CostVolume post_sgm;
  CostVolume post_cbca2;
  DisparityMap wta_left;
  DisparityMap wta_right;
  LabelMap labels;
  DisparityMap interpolated;
  DisparityMap subpixeled;
  DisparityMap medianed;
  std::vector<std::pair<std::string, double>> timings;
};

// Right-reference raw volume derived from the left one via
// C_R(p, d) = C_L(p + d, d), already mirrored horizontally so the
// left-reference kernels (and their x - d < 0 sentinel convention) apply
// unchanged. Mirror the resulting disparity map back afterwards.
CostVolume mirrored_right_volume(const CostVolume& left_volume);

// Full stereo method on a raw (unnormalized) pair, in order: cost ->
// CBCA(iterations_1) -> SGM -> CBCA(iterations_2) -> WTA both references ->
// consistency labels -> interpolation -> subpixel -> median -> bilateral,
// honoring the stage toggles.
DisparityMap run_pipeline(const Image& left_raw, const Image& right_raw, const Hyperparams& hp,
                          CostSource source, int max_disparity, const NetworkSpec* weight_spec,
                          const NetworkWeights* weights, PipelineTrace* trace = nullptr);

}  // namespace stereo
