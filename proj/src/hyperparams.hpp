#pragma once

#include <string>
#include <vector>

#include "learn.hpp"
#include "net.hpp"
#include "sgm.hpp"

namespace stereo {

struct StageToggles {
  bool cbca = true;
  bool sgm = true;
  bool lr_check = true;
  bool interpolation = true;
  bool subpixel = true;
  bool median = true;
  bool bilateral = true;
};

// Everything a preset pins: network shape, dataset sampling offsets, the
// post-processing constants and the stage switches, plus the training and
// augmentation defaults of the dataset the preset belongs to.
struct Hyperparams {
  std::string preset_name;
  std::string dataset;  // kitti2012 | kitti2015 | middlebury
  Arch arch = Arch::fast;

  int input_patch_size = 9;
  int num_conv_layers = 4;
  int num_conv_feature_maps = 64;
  int conv_kernel_size = 3;
  int num_fc_layers = 0;
  int num_fc_units = 0;

  double dataset_neg_low = 4;
  double dataset_neg_high = 10;
  double dataset_pos = 1;

  double cbca_intensity = 0.13;
  int cbca_distance = 5;
  int cbca_num_iterations_1 = 2;
  int cbca_num_iterations_2 = 0;

  double sgm_P1 = 4;
  double sgm_P2 = 223;
  double sgm_Q1 = 3;
  double sgm_Q2 = 7.5;
  double sgm_V = 1.5;
  double sgm_D = 0.02;

  double blur_sigma = 7.74;
  double blur_threshold = 5;

  StageToggles stages;
  double default_error_threshold = 3.0;  // pixels
  AugmentParams augment;
  TrainConfig train;
};

// Canonical presets: {kitti2012, kitti2015, middlebury} x {fst, acrt},
// named e.g. "kitti2012-fst". A bare dataset name resolves when an
// architecture is supplied.
Hyperparams preset(const std::string& name);
Hyperparams preset(const std::string& name, Arch arch);
std::vector<std::string> preset_names();

NetworkSpec network_spec(const Hyperparams& hp);
SgmParams sgm_params(const Hyperparams& hp);
DatasetParams dataset_params(const Hyperparams& hp, bool with_augment_guard);

// Table-named keys ("sgm_P1" = value) and stage toggles ("cbca" = on/off).
void set_param(Hyperparams& hp, const std::string& key, const std::string& value);
double get_param(const Hyperparams& hp, const std::string& key);
void disable_stage(Hyperparams& hp, const std::string& stage);

// key = value lines, '#' comments.
void load_config_file(Hyperparams& hp, const std::string& path);

}  // namespace stereo
