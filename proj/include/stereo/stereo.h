/*
 * Dense two-frame stereo matching engine.
 *
 * C API over the C++ core: opaque handles, status-code returns, and a
 * thread-local detail message (stereo_last_error). Every object returned
 * through an out-parameter is owned by the caller and released with the
 * matching *_free function. Handles are never shared between calls that
 * could run concurrently on different threads unless stated otherwise;
 * all inputs are treated as immutable.
 */

#ifndef STEREO_STEREO_H
#define STEREO_STEREO_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef STEREO_API
#if defined(_WIN32)
#define STEREO_API __declspec(dllexport)
#else
#define STEREO_API __attribute__((visibility("default")))
#endif
#endif

typedef enum stereo_status {
  STEREO_OK = 0,
  STEREO_ERR_IO = 1,
  STEREO_ERR_FORMAT = 2,
  STEREO_ERR_INVALID_ARGUMENT = 3,
  STEREO_ERR_DEGENERATE_INPUT = 4,
  STEREO_ERR_CONFIG = 5,
  STEREO_ERR_INTERNAL = 6
} stereo_status;

typedef struct stereo_image stereo_image;         /* single-channel intensity grid  */
typedef struct stereo_disparity stereo_disparity; /* per-pixel disparity map        */
typedef struct stereo_params stereo_params;       /* hyperparameters + stage toggles */
typedef struct stereo_weights stereo_weights;     /* network spec + parameters      */
typedef struct stereo_dataset stereo_dataset;     /* labeled patch-pair examples    */

STEREO_API const char* stereo_status_name(stereo_status status);
/* Detail message of the last failing call on this thread ("" if none). */
STEREO_API const char* stereo_last_error(void);

/* ---- images (binary PGM P5 / PPM P6, intensities scaled to [0, 1]) ---- */
STEREO_API stereo_status stereo_image_load(const char* path, stereo_image** out);
STEREO_API stereo_status stereo_image_size(const stereo_image* image, int32_t* width, int32_t* height);
STEREO_API void stereo_image_free(stereo_image* image);

/* ---- disparity maps (PFM "Pf", bottom-up rows, scale sign = endianness) ---- */
STEREO_API stereo_status stereo_disparity_load_pfm(const char* path, stereo_disparity** out);
STEREO_API stereo_status stereo_disparity_save_pfm(const stereo_disparity* map, const char* path);
/* Jet-style PPM rendering; invalid pixels black. */
STEREO_API stereo_status stereo_disparity_save_color(const stereo_disparity* map, double max_disparity,
                                                     const char* path);
STEREO_API void stereo_disparity_free(stereo_disparity* map);

/* ---- hyperparameters ----
 * Presets: kitti2012-fst, kitti2012-acrt, kitti2015-fst, kitti2015-acrt,
 * middlebury-fst, middlebury-acrt. Config files hold "key = value" lines;
 * stereo_params_set accepts the same keys plus stage toggles. */
STEREO_API stereo_status stereo_params_create(const char* preset, stereo_params** out);
STEREO_API stereo_status stereo_params_load_file(stereo_params* params, const char* path);
STEREO_API stereo_status stereo_params_set(stereo_params* params, const char* key, const char* value);
STEREO_API stereo_status stereo_params_get(const stereo_params* params, const char* key, double* out);
/* stage: cbca | sgm | lr_check | interpolation | subpixel | median | bilateral */
STEREO_API stereo_status stereo_params_disable_stage(stereo_params* params, const char* stage);
STEREO_API void stereo_params_free(stereo_params* params);

/* ---- network weights ---- */
STEREO_API stereo_status stereo_weights_load(const char* path, stereo_weights** out);
STEREO_API stereo_status stereo_weights_save(const stereo_weights* weights, const char* path);
STEREO_API void stereo_weights_free(stereo_weights* weights);

/* ---- disparity computation ---- */
typedef struct stereo_compute_options {
  const char* cost_source; /* sad | census | ncc | cnn-fast | cnn-acrt */
  int32_t max_disparity;
  const stereo_weights* weights; /* required for cnn-* sources, else NULL */
  const char* dump_cost_path;    /* optional raw cost-volume dump, else NULL */
  int32_t report_timings;        /* nonzero: print per-stage wall times to stdout */
} stereo_compute_options;

STEREO_API stereo_status stereo_compute(const stereo_image* left, const stereo_image* right,
                                        const stereo_params* params, const stereo_compute_options* options,
                                        stereo_disparity** out);

/* ---- evaluation ---- */
typedef struct stereo_eval_report {
  double error_percent;
  double threshold;
  int64_t evaluated_pixels;
} stereo_eval_report;

/* Invalid predictions count as errors; mask pixels with intensity 0 are
 * skipped (pass NULL to evaluate every valid ground-truth pixel). */
STEREO_API stereo_status stereo_error_rate(const stereo_disparity* predicted, const stereo_disparity* truth,
                                           double threshold, const stereo_image* mask,
                                           stereo_eval_report* out);

/* ---- training data ---- */
STEREO_API stereo_status stereo_extract(const stereo_image* left, const stereo_image* right,
                                        const stereo_disparity* truth, const stereo_params* params,
                                        stereo_dataset** out);
STEREO_API stereo_status stereo_dataset_save(const stereo_dataset* dataset, const char* path);
STEREO_API stereo_status stereo_dataset_load(const char* path, stereo_dataset** out);
STEREO_API stereo_status stereo_dataset_size(const stereo_dataset* dataset, int64_t* count);
STEREO_API void stereo_dataset_free(stereo_dataset* dataset);

/* ---- training ---- */
typedef struct stereo_train_options {
  const char* data_dir;  /* directory of left.pgm / right.pgm / gt.pfm triples */
  int32_t epochs;        /* <= 0 keeps the preset default */
  double learning_rate;  /* <= 0 keeps the preset default */
  uint64_t seed;
} stereo_train_options;

/* Trains the architecture selected by the preset in params. Per-epoch mean
 * losses are reported through the callback when it is non-NULL. */
typedef void (*stereo_epoch_callback)(int32_t epoch, double mean_loss, void* user);
STEREO_API stereo_status stereo_train(const stereo_train_options* options, const stereo_params* params,
                                      stereo_epoch_callback callback, void* user, stereo_weights** out);

/* ---- diagnostics ---- */
/* Max relative error between analytic and finite-difference gradients of a
 * small network of the given architecture ("fast" | "accurate"). */
STEREO_API stereo_status stereo_gradient_check(const char* arch, uint64_t seed, double* max_relative_error);

/* Error-rate table with each post-processing stage singly removed, plus
 * "none"/"all" rows. Returns a text table; release it with
 * stereo_string_free. max_disparity <= 0 derives the range from the ground
 * truth. */
STEREO_API stereo_status stereo_ablate(const char* data_dir, const stereo_params* params,
                                       const char* cost_source, const stereo_weights* weights,
                                       int32_t max_disparity, char** report);
STEREO_API void stereo_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* STEREO_STEREO_H */
