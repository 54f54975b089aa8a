#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pipeline.hpp"

namespace stereo {

struct EvalReport {
  double error_percent = 0.0;
  double threshold = 0.0;
  long long evaluated = 0;
  std::vector<std::pair<std::string, double>> stage_timings;
};

// Percentage of valid (and masked-in, mask intensity > 0) ground-truth
// pixels whose prediction is missing or differs by more than threshold.
EvalReport error_rate(const DisparityMap& predicted, const DisparityMap& truth, double threshold,
                      const Image* mask = nullptr);

struct StereoPair {
  std::string name;
  Image left;
  Image right;
  DisparityMap gt;
};

// Directory of triples: either subdirectories each holding left.pgm,
// right.pgm and gt.pfm, or a single such triple directly in dir. Sorted by
// name.
std::vector<StereoPair> load_stereo_dir(const std::string& dir);

// Smallest disparity range covering the valid ground truth, plus headroom.
int derive_max_disparity(const DisparityMap& gt);

// Extracts examples from every triple under data_dir (with the guard margin
// the preset's augmentation needs) and runs the training loop.
struct TrainRun {
  NetworkSpec spec;
  TrainResult result;
};
TrainRun train_on_directory(const std::string& data_dir, const Hyperparams& hp, const TrainConfig& config);

struct AblationRow {
  std::string excluded;  // none | cbca | sgm | interpolation | subpixel | median | bilateral | all
  double error_percent;
};

// Mean error over the pairs with each post-processing stage singly removed,
// bracketed by the full method ("none") and raw WTA ("all"). Excluding
// interpolation removes the consistency check it depends on.
// max_disparity <= 0 derives the range from each pair's ground truth.
std::vector<AblationRow> ablation_run(const std::vector<StereoPair>& pairs, const Hyperparams& hp,
                                      CostSource source, int max_disparity, const NetworkSpec* weight_spec,
                                      const NetworkWeights* weights);

}  // namespace stereo
