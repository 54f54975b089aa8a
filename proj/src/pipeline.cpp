#include "pipeline.hpp"

#include <chrono>

namespace stereo {

namespace {

// Fixed baseline windows.
constexpr int kSadPatch = 9;
constexpr int kCensusWindow = 9;
constexpr int kNccWindow = 11;

class StageClock {
public:
  explicit StageClock(PipelineTrace* trace) : trace_(trace) {}

  template <typename Fn>
  auto time(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    auto result = fn();
    if (trace_) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      trace_->timings.emplace_back(name, elapsed.count());
    }
    return result;
  }

private:
  PipelineTrace* trace_;
};

CostVolume build_cost(const Image& left, const Image& right, CostSource source, int max_disparity,
                      const NetworkSpec* weight_spec, const NetworkWeights* weights) {
  switch (source) {
    case CostSource::sad:
      return sad_volume(left, right, max_disparity, kSadPatch);
    case CostSource::census:
      return census_volume(census_transform(left, kCensusWindow), census_transform(right, kCensusWindow),
                           max_disparity);
    case CostSource::ncc:
      return ncc_volume(left, right, max_disparity, kNccWindow);
    case CostSource::cnn_fast:
    case CostSource::cnn_accurate: {
      if (!weight_spec || !weights) throw Error(Errc::config, "network cost source needs weights");
      const Arch want = source == CostSource::cnn_fast ? Arch::fast : Arch::accurate;
      if (weight_spec->arch != want)
        throw Error(Errc::config,
                    std::string("weights are for the ") + arch_name(weight_spec->arch) + " architecture");
      return cost_volume_from_network(*weight_spec, *weights, left, right, max_disparity);
    }
  }
  throw Error(Errc::internal, "unreachable cost source");
}

}  // namespace

CostVolume mirrored_right_volume(const CostVolume& left_vol) {
  const int w = left_vol.width;
  CostVolume out(w, left_vol.height, left_vol.max_disparity);
  for (int y = 0; y < left_vol.height; ++y)
    for (int x = 0; x < w; ++x)
      for (int d = 0; d < left_vol.max_disparity; ++d)
        out.at(x, y, d) = x - d < 0 ? kSentinelCost : left_vol.at(w - 1 - x + d, y, d);
  return out;
}

CostSource cost_source_from_name(const std::string& name) {
  if (name == "sad") return CostSource::sad;
  if (name == "census") return CostSource::census;
  if (name == "ncc") return CostSource::ncc;
  if (name == "cnn-fast") return CostSource::cnn_fast;
  if (name == "cnn-acrt" || name == "cnn-accurate") return CostSource::cnn_accurate;
  throw Error(Errc::config, "unknown cost source '" + name + "'");
}

const char* cost_source_name(CostSource source) {
  switch (source) {
    case CostSource::sad:
      return "sad";
    case CostSource::census:
      return "census";
    case CostSource::ncc:
      return "ncc";
    case CostSource::cnn_fast:
      return "cnn-fast";
    case CostSource::cnn_accurate:
      return "cnn-acrt";
  }
  return "?";
}

DisparityMap run_pipeline(const Image& left_raw, const Image& right_raw, const Hyperparams& hp,
                          CostSource source, int max_disparity, const NetworkSpec* weight_spec,
                          const NetworkWeights* weights, PipelineTrace* trace) {
  if (!left_raw.same_size(right_raw)) throw Error(Errc::invalid_argument, "left/right dimensions differ");
  if (max_disparity < 1) throw Error(Errc::invalid_argument, "max_disparity must be >= 1");
  StageClock clock(trace);
  const bool capture = trace && trace->capture;

  const Image left = normalize(left_raw);
  const Image right = normalize(right_raw);

  CostVolume vol =
      clock.time("cost", [&] { return build_cost(left, right, source, max_disparity, weight_spec, weights); });
  if (capture) trace->raw = vol;

  CostVolume right_vol;
  if (hp.stages.lr_check) {
    right_vol = clock.time("right_cost", [&] { return mirrored_right_volume(vol); });
  }

  const bool use_cbca = hp.stages.cbca;
  auto process = [&](CostVolume volume, const Image& ref, const Image& match, const std::string& prefix,
                     bool keep) {
    if (use_cbca) {
      const CrossArms arms_ref = compute_arms(ref, static_cast<float>(hp.cbca_intensity), hp.cbca_distance);
      const CrossArms arms_match = compute_arms(match, static_cast<float>(hp.cbca_intensity), hp.cbca_distance);
      volume = clock.time(prefix + "cbca_1",
                          [&] { return aggregate(volume, arms_ref, arms_match, hp.cbca_num_iterations_1); });
      if (keep && capture) trace->post_cbca1 = volume;
      if (hp.stages.sgm) {
        volume = clock.time(prefix + "sgm", [&] { return semiglobal(volume, ref, match, sgm_params(hp)); });
        if (keep && capture) trace->post_sgm = volume;
      }
      volume = clock.time(prefix + "cbca_2",
                          [&] { return aggregate(volume, arms_ref, arms_match, hp.cbca_num_iterations_2); });
      if (keep && capture) trace->post_cbca2 = volume;
    } else if (hp.stages.sgm) {
      volume = clock.time(prefix + "sgm", [&] { return semiglobal(volume, ref, match, sgm_params(hp)); });
      if (keep && capture) trace->post_sgm = volume;
    }
    return volume;
  };

  const CostVolume final_left = process(std::move(vol), left, right, "", true);
  DisparityMap disp = clock.time("wta", [&] { return wta(final_left); });
  if (capture) trace->wta_left = disp;

  if (hp.stages.lr_check) {
    const Image ref_m = flip_horizontal(right);
    const Image match_m = flip_horizontal(left);
    const CostVolume final_right = process(std::move(right_vol), ref_m, match_m, "right_", false);
    const DisparityMap disp_right = flip_horizontal(wta(final_right));
    if (capture) trace->wta_right = disp_right;
    const LabelMap labels =
        clock.time("lr_check", [&] { return lr_check(disp, disp_right, max_disparity); });
    if (capture) trace->labels = labels;
    if (hp.stages.interpolation) {
      disp = clock.time("interpolate", [&] { return interpolate(disp, labels); });
      if (capture) trace->interpolated = disp;
    }
  }
  if (hp.stages.subpixel) {
    disp = clock.time("subpixel", [&] { return subpixel(disp, final_left); });
    if (capture) trace->subpixeled = disp;
  }
  if (hp.stages.median) {
    disp = clock.time("median", [&] { return median5(disp); });
    if (capture) trace->medianed = disp;
  }
  if (hp.stages.bilateral) {
    disp = clock.time("bilateral", [&] {
      return bilateral(disp, left, static_cast<float>(hp.blur_sigma), static_cast<float>(hp.blur_threshold));
    });
  }
  return disp;
}

}  // namespace stereo
