// Command-line front end. Talks to the engine exclusively through the C API.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stereo/stereo.h"

namespace {

struct ImageDeleter {
  void operator()(stereo_image* p) const { stereo_image_free(p); }
};
struct DisparityDeleter {
  void operator()(stereo_disparity* p) const { stereo_disparity_free(p); }
};
struct ParamsDeleter {
  void operator()(stereo_params* p) const { stereo_params_free(p); }
};
struct WeightsDeleter {
  void operator()(stereo_weights* p) const { stereo_weights_free(p); }
};
struct DatasetDeleter {
  void operator()(stereo_dataset* p) const { stereo_dataset_free(p); }
};

using ImagePtr = std::unique_ptr<stereo_image, ImageDeleter>;
using DisparityPtr = std::unique_ptr<stereo_disparity, DisparityDeleter>;
using ParamsPtr = std::unique_ptr<stereo_params, ParamsDeleter>;
using WeightsPtr = std::unique_ptr<stereo_weights, WeightsDeleter>;
using DatasetPtr = std::unique_ptr<stereo_dataset, DatasetDeleter>;

// Any API failure aborts the command with one machine-readable stderr line.
[[noreturn]] void die(stereo_status status) {
  std::fprintf(stderr, "error: %s: %s\n", stereo_status_name(status), stereo_last_error());
  std::exit(status == STEREO_OK ? 1 : static_cast<int>(status));
}

void check(stereo_status status) {
  if (status != STEREO_OK) die(status);
}

[[noreturn]] void die_config(const std::string& message) {
  std::fprintf(stderr, "error: config: %s\n", message.c_str());
  std::exit(static_cast<int>(STEREO_ERR_CONFIG));
}

// Presets are dataset-arch combos; a bare dataset name picks up the suffix
// from the architecture in play (--arch, or the cnn-* cost source).
std::string resolve_preset(const std::string& preset, const std::string& arch_hint) {
  if (preset.find('-') != std::string::npos) {
    if (!arch_hint.empty()) {
      const bool is_fast = preset.size() >= 4 && preset.substr(preset.size() - 4) == "-fst";
      if ((arch_hint == "fast") != is_fast)
        die_config("preset '" + preset + "' conflicts with architecture '" + arch_hint + "'");
    }
    return preset;
  }
  if (arch_hint == "fast") return preset + "-fst";
  if (arch_hint == "accurate") return preset + "-acrt";
  die_config("preset '" + preset + "' needs an architecture suffix (-fst/-acrt)");
}

ParamsPtr make_params(const std::string& preset, const std::string& arch_hint, const std::string& config_path,
                      const std::vector<std::string>& disabled) {
  stereo_params* raw = nullptr;
  check(stereo_params_create(resolve_preset(preset, arch_hint).c_str(), &raw));
  ParamsPtr params(raw);
  if (!config_path.empty()) check(stereo_params_load_file(params.get(), config_path.c_str()));
  for (const auto& stage : disabled) check(stereo_params_disable_stage(params.get(), stage.c_str()));
  return params;
}

ImagePtr load_image_arg(const std::string& path) {
  stereo_image* raw = nullptr;
  check(stereo_image_load(path.c_str(), &raw));
  return ImagePtr(raw);
}

DisparityPtr load_pfm_arg(const std::string& path) {
  stereo_disparity* raw = nullptr;
  check(stereo_disparity_load_pfm(path.c_str(), &raw));
  return DisparityPtr(raw);
}

WeightsPtr load_weights_arg(const std::string& path) {
  stereo_weights* raw = nullptr;
  check(stereo_weights_load(path.c_str(), &raw));
  return WeightsPtr(raw);
}

std::string arch_of_cost(const std::string& cost) {
  if (cost == "cnn-fast") return "fast";
  if (cost == "cnn-acrt" || cost == "cnn-accurate") return "accurate";
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense two-frame stereo matching"};
  app.require_subcommand(1);

  // --- compute ---
  auto* compute = app.add_subcommand("compute", "Compute a disparity map for a rectified pair");
  std::string c_left, c_right, c_cost, c_weights, c_preset, c_config, c_out, c_color, c_gt, c_mask, c_dump;
  int c_maxdisp = 0;
  double c_threshold = -1.0;
  bool c_timings = false;
  std::vector<std::string> c_disabled;
  compute->add_option("--left", c_left, "Left image (PGM/PPM)")->required();
  compute->add_option("--right", c_right, "Right image (PGM/PPM)")->required();
  compute->add_option("--cost", c_cost, "sad | census | ncc | cnn-fast | cnn-acrt")->required();
  compute->add_option("--weights", c_weights, "Weight file for cnn-* costs");
  compute->add_option("--max-disparity", c_maxdisp, "Number of disparity levels")->required();
  compute->add_option("--preset", c_preset, "Hyperparameter preset")->required();
  compute->add_option("--config", c_config, "key = value hyperparameter file (overrides preset)");
  compute->add_option("--disable", c_disabled, "Disable a stage (repeatable)");
  compute->add_option("--out", c_out, "Output PFM path")->required();
  compute->add_option("--color", c_color, "Also write a colorized PPM");
  compute->add_option("--gt", c_gt, "Ground-truth PFM for evaluation");
  compute->add_option("--threshold", c_threshold, "Error threshold in pixels (default: preset)");
  compute->add_option("--mask", c_mask, "Evaluation mask (PGM, nonzero = evaluate)");
  compute->add_option("--dump-cost", c_dump, "Dump the raw cost volume");
  compute->add_flag("--timings", c_timings, "Print per-stage wall times");

  // --- train ---
  auto* train = app.add_subcommand("train", "Train a matching network on a directory of triples");
  std::string t_arch, t_data, t_preset, t_config, t_out;
  int t_epochs = 0;
  double t_lr = 0.0;
  uint64_t t_seed = 0;
  train->add_option("--arch", t_arch, "fast | accurate")->required()->check(CLI::IsMember({"fast", "accurate"}));
  train->add_option("--data", t_data, "Directory of left.pgm/right.pgm/gt.pfm triples")->required();
  train->add_option("--preset", t_preset, "Hyperparameter preset")->required();
  train->add_option("--config", t_config, "key = value hyperparameter file");
  train->add_option("--epochs", t_epochs, "Override the preset epoch count");
  train->add_option("--lr", t_lr, "Override the preset learning rate");
  train->add_option("--seed", t_seed, "Random seed");
  train->add_option("--out", t_out, "Output weight file")->required();

  // --- extract ---
  auto* extract = app.add_subcommand("extract", "Build a patch-pair dataset from one pair");
  std::string e_left, e_right, e_gt, e_preset, e_config, e_out;
  extract->add_option("--left", e_left, "Left image")->required();
  extract->add_option("--right", e_right, "Right image")->required();
  extract->add_option("--gt", e_gt, "Ground-truth PFM")->required();
  extract->add_option("--preset", e_preset, "Hyperparameter preset")->required();
  extract->add_option("--config", e_config, "key = value hyperparameter file");
  extract->add_option("--out", e_out, "Output dataset file")->required();

  // --- gradcheck ---
  auto* gradcheck = app.add_subcommand("gradcheck", "Verify analytic gradients with finite differences");
  std::string g_arch;
  uint64_t g_seed = 0;
  gradcheck->add_option("--arch", g_arch, "fast | accurate")
      ->required()
      ->check(CLI::IsMember({"fast", "accurate"}));
  gradcheck->add_option("--seed", g_seed, "Random seed");

  // --- ablate ---
  auto* ablate = app.add_subcommand("ablate", "Error table with each stage singly removed");
  std::string a_data, a_preset, a_config, a_cost, a_weights;
  int a_maxdisp = 0;
  ablate->add_option("--data", a_data, "Directory of left.pgm/right.pgm/gt.pfm triples")->required();
  ablate->add_option("--preset", a_preset, "Hyperparameter preset")->required();
  ablate->add_option("--config", a_config, "key = value hyperparameter file");
  ablate->add_option("--cost", a_cost, "sad | census | ncc | cnn-fast | cnn-acrt")->required();
  ablate->add_option("--weights", a_weights, "Weight file for cnn-* costs");
  ablate->add_option("--max-disparity", a_maxdisp, "Disparity levels (default: from ground truth)");

  CLI11_PARSE(app, argc, argv);

  if (compute->parsed()) {
    ParamsPtr params = make_params(c_preset, arch_of_cost(c_cost), c_config, c_disabled);
    ImagePtr left = load_image_arg(c_left);
    ImagePtr right = load_image_arg(c_right);
    WeightsPtr weights;
    if (!c_weights.empty()) weights = load_weights_arg(c_weights);

    stereo_compute_options options{};
    options.cost_source = c_cost.c_str();
    options.max_disparity = c_maxdisp;
    options.weights = weights.get();
    options.dump_cost_path = c_dump.empty() ? nullptr : c_dump.c_str();
    options.report_timings = c_timings ? 1 : 0;

    stereo_disparity* raw = nullptr;
    check(stereo_compute(left.get(), right.get(), params.get(), &options, &raw));
    DisparityPtr disp(raw);
    check(stereo_disparity_save_pfm(disp.get(), c_out.c_str()));
    if (!c_color.empty()) check(stereo_disparity_save_color(disp.get(), c_maxdisp, c_color.c_str()));

    if (!c_gt.empty()) {
      DisparityPtr gt = load_pfm_arg(c_gt);
      ImagePtr mask;
      if (!c_mask.empty()) mask = load_image_arg(c_mask);
      double threshold = c_threshold;
      if (threshold < 0) check(stereo_params_get(params.get(), "default_error_threshold", &threshold));
      stereo_eval_report report{};
      check(stereo_error_rate(disp.get(), gt.get(), threshold, mask.get(), &report));
      std::printf("error_rate %.4f threshold %g evaluated %lld\n", report.error_percent, report.threshold,
                  static_cast<long long>(report.evaluated_pixels));
    }
    return 0;
  }

  if (train->parsed()) {
    ParamsPtr params = make_params(t_preset, t_arch, t_config, {});
    stereo_train_options options{};
    options.data_dir = t_data.c_str();
    options.epochs = t_epochs;
    options.learning_rate = t_lr;
    options.seed = t_seed;
    auto print_epoch = [](int32_t epoch, double loss, void*) { std::printf("epoch %d loss %.6f\n", epoch, loss); };
    stereo_weights* raw = nullptr;
    check(stereo_train(&options, params.get(), print_epoch, nullptr, &raw));
    WeightsPtr weights(raw);
    check(stereo_weights_save(weights.get(), t_out.c_str()));
    std::printf("weights %s\n", t_out.c_str());
    return 0;
  }

  if (extract->parsed()) {
    ParamsPtr params = make_params(e_preset, "", e_config, {});
    ImagePtr left = load_image_arg(e_left);
    ImagePtr right = load_image_arg(e_right);
    DisparityPtr gt = load_pfm_arg(e_gt);
    stereo_dataset* raw = nullptr;
    check(stereo_extract(left.get(), right.get(), gt.get(), params.get(), &raw));
    DatasetPtr dataset(raw);
    check(stereo_dataset_save(dataset.get(), e_out.c_str()));
    int64_t count = 0;
    check(stereo_dataset_size(dataset.get(), &count));
    std::printf("examples %lld out %s\n", static_cast<long long>(count), e_out.c_str());
    return 0;
  }

  if (gradcheck->parsed()) {
    double max_rel = 0.0;
    check(stereo_gradient_check(g_arch.c_str(), g_seed, &max_rel));
    const bool ok = max_rel < 1e-4;
    std::printf("gradcheck %s max_relative_error %.3g %s\n", g_arch.c_str(), max_rel, ok ? "pass" : "fail");
    return ok ? 0 : 1;
  }

  if (ablate->parsed()) {
    ParamsPtr params = make_params(a_preset, arch_of_cost(a_cost), a_config, {});
    WeightsPtr weights;
    if (!a_weights.empty()) weights = load_weights_arg(a_weights);
    char* report = nullptr;
    check(stereo_ablate(a_data.c_str(), params.get(), a_cost.c_str(), weights.get(), a_maxdisp, &report));
    std::fputs(report, stdout);
    stereo_string_free(report);
    return 0;
  }

  return 1;
}
