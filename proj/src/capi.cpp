// extern-C surface over the core. Handles are thin structs around the C++
// value types; every entry point converts exceptions to status codes and
// stashes the message in a thread-local slot.

#include "stereo/stereo.h"

#include <cstdio>
#include <cstring>
#include <sstream>
#include <string>

#include "classic_costs.hpp"
#include "eval.hpp"
#include "image_io.hpp"
#include "learn.hpp"

struct stereo_image {
  stereo::Image value;
};
struct stereo_disparity {
  stereo::DisparityMap value;
};
struct stereo_params {
  stereo::Hyperparams value;
};
struct stereo_weights {
  stereo::NetworkSpec spec;
  stereo::NetworkWeights value;
};
struct stereo_dataset {
  stereo::PatchPairDataset value;
};

namespace {

thread_local std::string g_last_error;

stereo_status status_of(stereo::Errc code) {
  switch (code) {
    case stereo::Errc::io:
      return STEREO_ERR_IO;
    case stereo::Errc::format:
      return STEREO_ERR_FORMAT;
    case stereo::Errc::invalid_argument:
      return STEREO_ERR_INVALID_ARGUMENT;
    case stereo::Errc::degenerate_input:
      return STEREO_ERR_DEGENERATE_INPUT;
    case stereo::Errc::config:
      return STEREO_ERR_CONFIG;
    case stereo::Errc::internal:
      return STEREO_ERR_INTERNAL;
  }
  return STEREO_ERR_INTERNAL;
}

template <typename Fn>
stereo_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return STEREO_OK;
  } catch (const stereo::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return STEREO_ERR_INTERNAL;
  }
}

stereo_status require(bool ok, const char* what) {
  if (ok) return STEREO_OK;
  g_last_error = what;
  return STEREO_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* stereo_status_name(stereo_status status) {
  switch (status) {
    case STEREO_OK:
      return "ok";
    case STEREO_ERR_IO:
      return "io";
    case STEREO_ERR_FORMAT:
      return "format";
    case STEREO_ERR_INVALID_ARGUMENT:
      return "invalid-argument";
    case STEREO_ERR_DEGENERATE_INPUT:
      return "degenerate-input";
    case STEREO_ERR_CONFIG:
      return "config";
    case STEREO_ERR_INTERNAL:
      return "internal";
  }
  return "unknown";
}

const char* stereo_last_error(void) { return g_last_error.c_str(); }

stereo_status stereo_image_load(const char* path, stereo_image** out) {
  if (stereo_status s = require(path && out, "null argument")) return s;
  return guarded([&] { *out = new stereo_image{stereo::load_image(path)}; });
}

stereo_status stereo_image_size(const stereo_image* image, int32_t* width, int32_t* height) {
  if (stereo_status s = require(image && width && height, "null argument")) return s;
  *width = image->value.width;
  *height = image->value.height;
  return STEREO_OK;
}

void stereo_image_free(stereo_image* image) { delete image; }

stereo_status stereo_disparity_load_pfm(const char* path, stereo_disparity** out) {
  if (stereo_status s = require(path && out, "null argument")) return s;
  return guarded([&] { *out = new stereo_disparity{stereo::load_pfm(path)}; });
}

stereo_status stereo_disparity_save_pfm(const stereo_disparity* map, const char* path) {
  if (stereo_status s = require(map && path, "null argument")) return s;
  return guarded([&] { stereo::save_pfm(map->value, path); });
}

stereo_status stereo_disparity_save_color(const stereo_disparity* map, double max_disparity, const char* path) {
  if (stereo_status s = require(map && path, "null argument")) return s;
  return guarded([&] {
    stereo::write_file(path, stereo::colorize(map->value, static_cast<float>(max_disparity)));
  });
}

void stereo_disparity_free(stereo_disparity* map) { delete map; }

stereo_status stereo_params_create(const char* preset, stereo_params** out) {
  if (stereo_status s = require(preset && out, "null argument")) return s;
  return guarded([&] { *out = new stereo_params{stereo::preset(preset)}; });
}

stereo_status stereo_params_load_file(stereo_params* params, const char* path) {
  if (stereo_status s = require(params && path, "null argument")) return s;
  return guarded([&] { stereo::load_config_file(params->value, path); });
}

stereo_status stereo_params_set(stereo_params* params, const char* key, const char* value) {
  if (stereo_status s = require(params && key && value, "null argument")) return s;
  return guarded([&] { stereo::set_param(params->value, key, value); });
}

stereo_status stereo_params_get(const stereo_params* params, const char* key, double* out) {
  if (stereo_status s = require(params && key && out, "null argument")) return s;
  return guarded([&] { *out = stereo::get_param(params->value, key); });
}

stereo_status stereo_params_disable_stage(stereo_params* params, const char* stage) {
  if (stereo_status s = require(params && stage, "null argument")) return s;
  return guarded([&] { stereo::disable_stage(params->value, stage); });
}

void stereo_params_free(stereo_params* params) { delete params; }

stereo_status stereo_weights_load(const char* path, stereo_weights** out) {
  if (stereo_status s = require(path && out, "null argument")) return s;
  return guarded([&] {
    auto [spec, weights] = stereo::load_weights(path);
    *out = new stereo_weights{spec, std::move(weights)};
  });
}

stereo_status stereo_weights_save(const stereo_weights* weights, const char* path) {
  if (stereo_status s = require(weights && path, "null argument")) return s;
  return guarded([&] { stereo::save_weights(weights->spec, weights->value, path); });
}

void stereo_weights_free(stereo_weights* weights) { delete weights; }

stereo_status stereo_compute(const stereo_image* left, const stereo_image* right, const stereo_params* params,
                             const stereo_compute_options* options, stereo_disparity** out) {
  if (stereo_status s = require(left && right && params && options && out, "null argument")) return s;
  if (stereo_status s = require(options->cost_source, "null cost_source")) return s;
  return guarded([&] {
    const stereo::CostSource source = stereo::cost_source_from_name(options->cost_source);
    const stereo::NetworkSpec* spec = options->weights ? &options->weights->spec : nullptr;
    const stereo::NetworkWeights* w = options->weights ? &options->weights->value : nullptr;
    stereo::PipelineTrace trace;
    trace.capture = options->dump_cost_path != nullptr;
    stereo::DisparityMap disp = stereo::run_pipeline(left->value, right->value, params->value, source,
                                                     options->max_disparity, spec, w, &trace);
    if (options->dump_cost_path) stereo::save_cost_volume(trace.raw, options->dump_cost_path);
    if (options->report_timings) {
      for (const auto& [stage, seconds] : trace.timings)
        std::printf("stage_time %s %.4f\n", stage.c_str(), seconds);
    }
    *out = new stereo_disparity{std::move(disp)};
  });
}

stereo_status stereo_error_rate(const stereo_disparity* predicted, const stereo_disparity* truth,
                                double threshold, const stereo_image* mask, stereo_eval_report* out) {
  if (stereo_status s = require(predicted && truth && out, "null argument")) return s;
  return guarded([&] {
    const stereo::EvalReport report =
        stereo::error_rate(predicted->value, truth->value, threshold, mask ? &mask->value : nullptr);
    out->error_percent = report.error_percent;
    out->threshold = report.threshold;
    out->evaluated_pixels = report.evaluated;
  });
}

stereo_status stereo_extract(const stereo_image* left, const stereo_image* right, const stereo_disparity* truth,
                             const stereo_params* params, stereo_dataset** out) {
  if (stereo_status s = require(left && right && truth && params && out, "null argument")) return s;
  return guarded([&] {
    const stereo::DatasetParams dp = stereo::dataset_params(params->value, /*with_augment_guard=*/true);
    stereo::Rng rng(0x243f6a8885a308d3ull);  // extraction is deterministic by contract
    *out = new stereo_dataset{stereo::extract_examples(stereo::normalize(left->value),
                                                       stereo::normalize(right->value), truth->value, dp, rng)};
  });
}

stereo_status stereo_dataset_save(const stereo_dataset* dataset, const char* path) {
  if (stereo_status s = require(dataset && path, "null argument")) return s;
  return guarded([&] { stereo::save_dataset(dataset->value, path); });
}

stereo_status stereo_dataset_load(const char* path, stereo_dataset** out) {
  if (stereo_status s = require(path && out, "null argument")) return s;
  return guarded([&] { *out = new stereo_dataset{stereo::load_dataset(path)}; });
}

stereo_status stereo_dataset_size(const stereo_dataset* dataset, int64_t* count) {
  if (stereo_status s = require(dataset && count, "null argument")) return s;
  *count = static_cast<int64_t>(dataset->value.examples.size());
  return STEREO_OK;
}

void stereo_dataset_free(stereo_dataset* dataset) { delete dataset; }

stereo_status stereo_train(const stereo_train_options* options, const stereo_params* params,
                           stereo_epoch_callback callback, void* user, stereo_weights** out) {
  if (stereo_status s = require(options && params && out, "null argument")) return s;
  if (stereo_status s = require(options->data_dir, "null data_dir")) return s;
  return guarded([&] {
    stereo::TrainConfig config = params->value.train;
    if (options->epochs > 0) config.epochs = options->epochs;
    if (options->learning_rate > 0) config.learning_rate = options->learning_rate;
    config.seed = options->seed;
    stereo::TrainRun run = stereo::train_on_directory(options->data_dir, params->value, config);
    if (callback) {
      for (size_t i = 0; i < run.result.epoch_loss.size(); ++i)
        callback(static_cast<int32_t>(i + 1), run.result.epoch_loss[i], user);
    }
    *out = new stereo_weights{run.spec, std::move(run.result.weights)};
  });
}

stereo_status stereo_gradient_check(const char* arch, uint64_t seed, double* max_relative_error) {
  if (stereo_status s = require(arch && max_relative_error, "null argument")) return s;
  return guarded(
      [&] { *max_relative_error = stereo::gradient_check_arch(stereo::arch_from_name(arch), seed); });
}

stereo_status stereo_ablate(const char* data_dir, const stereo_params* params, const char* cost_source,
                            const stereo_weights* weights, int32_t max_disparity, char** report) {
  if (stereo_status s = require(data_dir && params && cost_source && report, "null argument")) return s;
  return guarded([&] {
    const stereo::CostSource source = stereo::cost_source_from_name(cost_source);
    const std::vector<stereo::StereoPair> pairs = stereo::load_stereo_dir(data_dir);
    const std::vector<stereo::AblationRow> rows =
        stereo::ablation_run(pairs, params->value, source, max_disparity,
                             weights ? &weights->spec : nullptr, weights ? &weights->value : nullptr);
    std::ostringstream text;
    text << "excluded_stage error_percent\n";
    for (const auto& row : rows) {
      text << row.excluded << " " << row.error_percent << "\n";
    }
    const std::string s = text.str();
    char* buf = new char[s.size() + 1];
    std::memcpy(buf, s.c_str(), s.size() + 1);
    *report = buf;
  });
}

void stereo_string_free(char* text) { delete[] text; }

}  // extern "C"
