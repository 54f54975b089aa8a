#include "hyperparams.hpp"

#include <fstream>
#include <sstream>

namespace stereo {

namespace {

AugmentParams kitti_augment() {
  AugmentParams a;
  a.rotate_deg = {-7, 7};
  a.horizontal_scale = {0.9, 1};
  a.horizontal_shear = {0, 0.1};
  a.brightness = {0, 0.7};
  a.contrast = {1, 1.3};
  a.brightness_diff = {0, 0.3};
  return a;
}

AugmentParams middlebury_augment() {
  AugmentParams a;
  a.rotate_deg = {-28, 28};
  a.scale = {0.8, 1};
  a.horizontal_scale = {0.8, 1};
  a.horizontal_shear = {0, 0.1};
  a.brightness = {0, 1.3};
  a.contrast = {1, 1.1};
  a.vertical_disparity = {0, 1};
  a.rotate_diff = {-3, 3};
  a.horizontal_scale_diff = {0.9, 1};
  a.horizontal_shear_diff = {0, 0.3};
  a.brightness_diff = {0, 0.7};
  a.contrast_diff = {1, 1.1};
  return a;
}

void apply_arch(Hyperparams& hp, Arch arch) {
  hp.arch = arch;
  hp.train.learning_rate = arch == Arch::fast ? 0.002 : 0.003;
  if (arch == Arch::fast) {
    hp.num_conv_feature_maps = 64;
    hp.num_fc_layers = 0;
    hp.num_fc_units = 0;
    hp.stages.cbca = false;  // cross-based aggregation is skipped in the fast setting
    hp.cbca_num_iterations_1 = 0;
    hp.cbca_num_iterations_2 = 0;
  } else {
    hp.num_conv_feature_maps = 112;
    hp.num_fc_units = 384;
  }
}

Hyperparams kitti2012(Arch arch) {
  Hyperparams hp;
  hp.dataset = "kitti2012";
  hp.input_patch_size = 9;
  hp.num_conv_layers = 4;
  hp.conv_kernel_size = 3;
  hp.dataset_neg_low = 4;
  hp.dataset_neg_high = 10;
  hp.dataset_pos = 1;
  hp.default_error_threshold = 3.0;
  hp.augment = kitti_augment();
  apply_arch(hp, arch);
  if (arch == Arch::fast) {
    hp.sgm_P1 = 4;
    hp.sgm_P2 = 223;
    hp.sgm_Q1 = 3;
    hp.sgm_Q2 = 7.5;
    hp.sgm_V = 1.5;
    hp.sgm_D = 0.02;
    hp.blur_sigma = 7.74;
    hp.blur_threshold = 5;
    hp.cbca_intensity = 0.13;
    hp.cbca_distance = 5;
  } else {
    hp.num_fc_layers = 4;
    hp.cbca_intensity = 0.13;
    hp.cbca_distance = 5;
    hp.cbca_num_iterations_1 = 2;
    hp.cbca_num_iterations_2 = 0;
    hp.sgm_P1 = 1.32;
    hp.sgm_P2 = 32;
    hp.sgm_Q1 = 3;
    hp.sgm_Q2 = 6;
    hp.sgm_V = 2;
    hp.sgm_D = 0.08;
    hp.blur_sigma = 6;
    hp.blur_threshold = 6;
  }
  return hp;
}

Hyperparams kitti2015(Arch arch) {
  Hyperparams hp;
  hp.dataset = "kitti2015";
  hp.input_patch_size = 9;
  hp.num_conv_layers = 4;
  hp.conv_kernel_size = 3;
  hp.dataset_neg_low = 4;
  hp.dataset_neg_high = 10;
  hp.dataset_pos = 1;
  hp.default_error_threshold = 3.0;
  hp.augment = kitti_augment();
  apply_arch(hp, arch);
  if (arch == Arch::fast) {
    hp.sgm_P1 = 2.3;
    hp.sgm_P2 = 42.3;
    hp.sgm_Q1 = 3;
    hp.sgm_Q2 = 6;
    hp.sgm_V = 1.25;
    hp.sgm_D = 0.08;
    hp.blur_sigma = 4.64;
    hp.blur_threshold = 5;
    hp.cbca_intensity = 0.03;
    hp.cbca_distance = 5;
  } else {
    hp.num_fc_layers = 4;
    hp.cbca_intensity = 0.03;
    hp.cbca_distance = 5;
    hp.cbca_num_iterations_1 = 2;
    hp.cbca_num_iterations_2 = 4;
    hp.sgm_P1 = 2.3;
    hp.sgm_P2 = 55.8;
    hp.sgm_Q1 = 3;
    hp.sgm_Q2 = 6;
    hp.sgm_V = 1.75;
    hp.sgm_D = 0.08;
    hp.blur_sigma = 6;
    hp.blur_threshold = 5;
  }
  return hp;
}

Hyperparams middlebury(Arch arch) {
  Hyperparams hp;
  hp.dataset = "middlebury";
  hp.input_patch_size = 11;
  hp.num_conv_layers = 5;
  hp.conv_kernel_size = 3;
  hp.dataset_neg_low = 1.5;
  hp.dataset_neg_high = arch == Arch::fast ? 6 : 18;
  hp.dataset_pos = 0.5;
  hp.default_error_threshold = 2.0;
  hp.augment = middlebury_augment();
  apply_arch(hp, arch);
  if (arch == Arch::fast) {
    hp.sgm_P1 = 2.3;
    hp.sgm_P2 = 55.9;
    hp.sgm_Q1 = 4;
    hp.sgm_Q2 = 8;
    hp.sgm_V = 1.5;
    hp.sgm_D = 0.08;
    hp.blur_sigma = 6;
    hp.blur_threshold = 2;
    hp.cbca_intensity = 0.02;
    hp.cbca_distance = 14;
  } else {
    hp.num_fc_layers = 3;
    hp.cbca_intensity = 0.02;
    hp.cbca_distance = 14;
    hp.cbca_num_iterations_1 = 2;
    hp.cbca_num_iterations_2 = 16;
    hp.sgm_P1 = 1.3;
    hp.sgm_P2 = 18.1;
    hp.sgm_Q1 = 4.5;
    hp.sgm_Q2 = 9;
    hp.sgm_V = 2.75;
    hp.sgm_D = 0.13;
    hp.blur_sigma = 1.7;
    hp.blur_threshold = 2;
    // The consistency check made results worse on this data set, so the
    // preset ships with it (and the fill that depends on it) disabled.
    hp.stages.lr_check = false;
    hp.stages.interpolation = false;
  }
  return hp;
}

}  // namespace

Hyperparams preset(const std::string& name, Arch arch) {
  Hyperparams hp;
  if (name == "kitti2012") {
    hp = kitti2012(arch);
  } else if (name == "kitti2015") {
    hp = kitti2015(arch);
  } else if (name == "middlebury") {
    hp = middlebury(arch);
  } else {
    throw Error(Errc::config, "unknown preset '" + name + "'");
  }
  hp.preset_name = name + (arch == Arch::fast ? "-fst" : "-acrt");
  return hp;
}

Hyperparams preset(const std::string& name) {
  const size_t dash = name.rfind('-');
  if (dash == std::string::npos)
    throw Error(Errc::config, "preset '" + name + "' needs an architecture suffix (-fst/-acrt)");
  const std::string base = name.substr(0, dash);
  const std::string suffix = name.substr(dash + 1);
  if (suffix == "fst") return preset(base, Arch::fast);
  if (suffix == "acrt") return preset(base, Arch::accurate);
  throw Error(Errc::config, "unknown preset suffix '" + suffix + "'");
}

std::vector<std::string> preset_names() {
  return {"kitti2012-fst", "kitti2012-acrt", "kitti2015-fst",
          "kitti2015-acrt", "middlebury-fst", "middlebury-acrt"};
}

NetworkSpec network_spec(const Hyperparams& hp) {
  NetworkSpec spec;
  spec.arch = hp.arch;
  spec.num_conv_layers = hp.num_conv_layers;
  spec.conv_kernel_size = hp.conv_kernel_size;
  spec.num_conv_feature_maps = hp.num_conv_feature_maps;
  spec.num_fc_layers = hp.num_fc_layers;
  spec.num_fc_units = hp.num_fc_units;
  spec.input_patch_size = hp.input_patch_size;
  validate_spec(spec);
  return spec;
}

SgmParams sgm_params(const Hyperparams& hp) {
  SgmParams p;
  p.p1 = static_cast<float>(hp.sgm_P1);
  p.p2 = static_cast<float>(hp.sgm_P2);
  p.q1 = static_cast<float>(hp.sgm_Q1);
  p.q2 = static_cast<float>(hp.sgm_Q2);
  p.d_threshold = static_cast<float>(hp.sgm_D);
  p.v = static_cast<float>(hp.sgm_V);
  return p;
}

DatasetParams dataset_params(const Hyperparams& hp, bool with_augment_guard) {
  DatasetParams p;
  p.dataset_pos = hp.dataset_pos;
  p.dataset_neg_low = hp.dataset_neg_low;
  p.dataset_neg_high = hp.dataset_neg_high;
  p.input_patch_size = hp.input_patch_size;
  p.guard = with_augment_guard ? guard_margin(hp.augment, hp.input_patch_size) : 0;
  return p;
}

namespace {

double parse_number(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    while (used < value.size() && (value[used] == ' ' || value[used] == '\t')) ++used;
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::config, "bad value '" + value + "' for " + key);
  }
}

bool* stage_toggle(Hyperparams& hp, const std::string& name) {
  if (name == "cbca") return &hp.stages.cbca;
  if (name == "sgm") return &hp.stages.sgm;
  if (name == "lr_check") return &hp.stages.lr_check;
  if (name == "interpolation") return &hp.stages.interpolation;
  if (name == "subpixel") return &hp.stages.subpixel;
  if (name == "median") return &hp.stages.median;
  if (name == "bilateral") return &hp.stages.bilateral;
  return nullptr;
}

}  // namespace

void set_param(Hyperparams& hp, const std::string& key, const std::string& value) {
  if (bool* toggle = stage_toggle(hp, key)) {
    if (value == "on" || value == "1" || value == "true") {
      *toggle = true;
    } else if (value == "off" || value == "0" || value == "false") {
      *toggle = false;
    } else {
      throw Error(Errc::config, "bad toggle value '" + value + "' for " + key);
    }
    return;
  }

  const double v = parse_number(key, value);
  auto as_int = [&](int lo) {
    const int i = static_cast<int>(v);
    if (v != i || i < lo) throw Error(Errc::config, "bad value '" + value + "' for " + key);
    return i;
  };
  if (key == "input_patch_size") {
    hp.input_patch_size = as_int(1);
  } else if (key == "num_conv_layers") {
    hp.num_conv_layers = as_int(1);
  } else if (key == "num_conv_feature_maps") {
    hp.num_conv_feature_maps = as_int(1);
  } else if (key == "conv_kernel_size") {
    hp.conv_kernel_size = as_int(1);
  } else if (key == "num_fc_layers") {
    hp.num_fc_layers = as_int(0);
  } else if (key == "num_fc_units") {
    hp.num_fc_units = as_int(0);
  } else if (key == "dataset_neg_low") {
    hp.dataset_neg_low = v;
  } else if (key == "dataset_neg_high") {
    hp.dataset_neg_high = v;
  } else if (key == "dataset_pos") {
    hp.dataset_pos = v;
  } else if (key == "cbca_intensity") {
    hp.cbca_intensity = v;
  } else if (key == "cbca_distance") {
    hp.cbca_distance = as_int(1);
  } else if (key == "cbca_num_iterations_1") {
    hp.cbca_num_iterations_1 = as_int(0);
  } else if (key == "cbca_num_iterations_2") {
    hp.cbca_num_iterations_2 = as_int(0);
  } else if (key == "sgm_P1") {
    hp.sgm_P1 = v;
  } else if (key == "sgm_P2") {
    hp.sgm_P2 = v;
  } else if (key == "sgm_Q1") {
    hp.sgm_Q1 = v;
  } else if (key == "sgm_Q2") {
    hp.sgm_Q2 = v;
  } else if (key == "sgm_V") {
    hp.sgm_V = v;
  } else if (key == "sgm_D") {
    hp.sgm_D = v;
  } else if (key == "blur_sigma") {
    hp.blur_sigma = v;
  } else if (key == "blur_threshold") {
    hp.blur_threshold = v;
  } else {
    throw Error(Errc::config, "unknown hyperparameter '" + key + "'");
  }
}

double get_param(const Hyperparams& hp, const std::string& key) {
  if (key == "input_patch_size") return hp.input_patch_size;
  if (key == "num_conv_layers") return hp.num_conv_layers;
  if (key == "num_conv_feature_maps") return hp.num_conv_feature_maps;
  if (key == "conv_kernel_size") return hp.conv_kernel_size;
  if (key == "num_fc_layers") return hp.num_fc_layers;
  if (key == "num_fc_units") return hp.num_fc_units;
  if (key == "dataset_neg_low") return hp.dataset_neg_low;
  if (key == "dataset_neg_high") return hp.dataset_neg_high;
  if (key == "dataset_pos") return hp.dataset_pos;
  if (key == "cbca_intensity") return hp.cbca_intensity;
  if (key == "cbca_distance") return hp.cbca_distance;
  if (key == "cbca_num_iterations_1") return hp.cbca_num_iterations_1;
  if (key == "cbca_num_iterations_2") return hp.cbca_num_iterations_2;
  if (key == "sgm_P1") return hp.sgm_P1;
  if (key == "sgm_P2") return hp.sgm_P2;
  if (key == "sgm_Q1") return hp.sgm_Q1;
  if (key == "sgm_Q2") return hp.sgm_Q2;
  if (key == "sgm_V") return hp.sgm_V;
  if (key == "sgm_D") return hp.sgm_D;
  if (key == "blur_sigma") return hp.blur_sigma;
  if (key == "blur_threshold") return hp.blur_threshold;
  if (key == "default_error_threshold") return hp.default_error_threshold;
  const Hyperparams& chp = hp;
  if (const bool* toggle = stage_toggle(const_cast<Hyperparams&>(chp), key)) return *toggle ? 1.0 : 0.0;
  throw Error(Errc::config, "unknown hyperparameter '" + key + "'");
}

void disable_stage(Hyperparams& hp, const std::string& stage) {
  bool* toggle = stage_toggle(hp, stage);
  if (!toggle) throw Error(Errc::config, "unknown stage '" + stage + "'");
  *toggle = false;
}

void load_config_file(Hyperparams& hp, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::io, "cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const size_t b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const size_t e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const size_t eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::config, path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    if (key.empty() || value.empty())
      throw Error(Errc::config, path + ":" + std::to_string(lineno) + ": expected key = value");
    set_param(hp, key, value);
  }
}

}  // namespace stereo
