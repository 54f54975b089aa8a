#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iterator>

#include "image_io.hpp"

namespace stereo {

EvalReport error_rate(const DisparityMap& predicted, const DisparityMap& truth, double threshold,
                      const Image* mask) {
  if (!predicted.same_size(truth)) throw Error(Errc::invalid_argument, "prediction/ground-truth dimensions differ");
  if (mask && (mask->width != truth.width || mask->height != truth.height))
    throw Error(Errc::invalid_argument, "mask dimensions differ");

  long long evaluated = 0;
  long long errors = 0;
  for (int y = 0; y < truth.height; ++y) {
    for (int x = 0; x < truth.width; ++x) {
      const float gt = truth.at(x, y);
      if (!disparity_valid(gt)) continue;
      if (mask && !(mask->at(x, y) > 0.0f)) continue;
      ++evaluated;
      const float pred = predicted.at(x, y);
      if (!disparity_valid(pred) || std::fabs(pred - gt) > threshold) ++errors;
    }
  }
  if (evaluated == 0) throw Error(Errc::degenerate_input, "no valid ground-truth pixels to evaluate");
  EvalReport report;
  report.error_percent = 100.0 * static_cast<double>(errors) / static_cast<double>(evaluated);
  report.threshold = threshold;
  report.evaluated = evaluated;
  return report;
}

namespace {

namespace fs = std::filesystem;

bool has_triple(const fs::path& dir) {
  return fs::exists(dir / "left.pgm") && fs::exists(dir / "right.pgm") && fs::exists(dir / "gt.pfm");
}

StereoPair load_triple(const fs::path& dir) {
  StereoPair pair;
  pair.name = dir.filename().string();
  pair.left = load_image((dir / "left.pgm").string());
  pair.right = load_image((dir / "right.pgm").string());
  pair.gt = load_pfm((dir / "gt.pfm").string());
  if (!pair.left.same_size(pair.right) || pair.gt.width != pair.left.width ||
      pair.gt.height != pair.left.height)
    throw Error(Errc::format, "mismatched dimensions in " + dir.string());
  return pair;
}

}  // namespace

std::vector<StereoPair> load_stereo_dir(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw Error(Errc::io, dir + " is not a directory");
  std::vector<StereoPair> pairs;
  if (has_triple(root)) {
    pairs.push_back(load_triple(root));
    return pairs;
  }
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && has_triple(entry.path())) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& sub : subdirs) pairs.push_back(load_triple(sub));
  if (pairs.empty()) throw Error(Errc::io, "no (left.pgm, right.pgm, gt.pfm) triples under " + dir);
  return pairs;
}

int derive_max_disparity(const DisparityMap& gt) {
  float max_d = 0.0f;
  for (float v : gt.data)
    if (disparity_valid(v)) max_d = std::max(max_d, v);
  return std::max(2, static_cast<int>(std::floor(max_d)) + 2);
}

TrainRun train_on_directory(const std::string& data_dir, const Hyperparams& hp, const TrainConfig& config) {
  const std::vector<StereoPair> pairs = load_stereo_dir(data_dir);
  const DatasetParams dp = dataset_params(hp, /*with_augment_guard=*/true);

  Rng rng(config.seed ^ 0x243f6a8885a308d3ull);
  PatchPairDataset dataset;
  for (const auto& pair : pairs) {
    PatchPairDataset part = extract_examples(normalize(pair.left), normalize(pair.right), pair.gt, dp, rng);
    if (dataset.examples.empty()) {
      dataset = std::move(part);
    } else {
      dataset.examples.insert(dataset.examples.end(), std::make_move_iterator(part.examples.begin()),
                              std::make_move_iterator(part.examples.end()));
    }
  }
  if (dataset.examples.empty()) throw Error(Errc::degenerate_input, "no usable training pixels in " + data_dir);

  TrainRun run;
  run.spec = network_spec(hp);
  run.result = train(run.spec, dataset, config, hp.augment);
  return run;
}

std::vector<AblationRow> ablation_run(const std::vector<StereoPair>& pairs, const Hyperparams& hp,
                                      CostSource source, int max_disparity, const NetworkSpec* weight_spec,
                                      const NetworkWeights* weights) {
  if (pairs.empty()) throw Error(Errc::invalid_argument, "no stereo pairs");

  auto mean_error = [&](const Hyperparams& variant) {
    double sum = 0.0;
    for (const auto& pair : pairs) {
      const int dmax = max_disparity > 0 ? max_disparity : derive_max_disparity(pair.gt);
      const DisparityMap disp =
          run_pipeline(pair.left, pair.right, variant, source, dmax, weight_spec, weights);
      sum += error_rate(disp, pair.gt, variant.default_error_threshold).error_percent;
    }
    return sum / static_cast<double>(pairs.size());
  };

  std::vector<AblationRow> rows;
  rows.push_back({"none", mean_error(hp)});
  static const char* kStages[] = {"cbca", "sgm", "interpolation", "subpixel", "median", "bilateral"};
  for (const char* stage : kStages) {
    Hyperparams variant = hp;
    disable_stage(variant, stage);
    if (std::string(stage) == "interpolation") disable_stage(variant, "lr_check");
    rows.push_back({stage, mean_error(variant)});
  }
  Hyperparams none = hp;
  none.stages = StageToggles{false, false, false, false, false, false, false};
  rows.push_back({"all", mean_error(none)});
  return rows;
}

}  // namespace stereo
