/* scnn - a from-scratch CNN training library for cooking-state classification.
 *
 * C API over the C++ core: opaque handles, status-code returns, thread-local
 * error messages. Every function returns SCNN_OK (0) on success; on failure
 * it returns a status whose message is available from scnn_last_error() on
 * the same thread. scnn_status_exit_code() maps statuses onto the CLI exit
 * code table (0 ok, 2 config, 3 data, 4 numeric divergence, 5 gradcheck
 * failure).
 */
#ifndef SCNN_H
#define SCNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SCNN_API __declspec(dllexport)
#else
#define SCNN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef int32_t scnn_status;
enum {
  SCNN_OK = 0,
  SCNN_ERR_CONFIG = 2,
  SCNN_ERR_DATA = 3,
  SCNN_ERR_NUMERIC = 4,
  SCNN_ERR_GRADCHECK = 5,
  SCNN_ERR_SHAPE = 6,
  SCNN_ERR_FORMAT = 7,
  SCNN_ERR_STATE = 8,
  SCNN_ERR_IO = 9
};

SCNN_API const char* scnn_version(void);

/* Message for the most recent failure on this thread; never NULL. */
SCNN_API const char* scnn_last_error(void);

/* CLI exit code for a status (format/shape/state fold into config errors,
 * io into data errors). */
SCNN_API int scnn_status_exit_code(scnn_status status);

/* Frees strings returned through char** out-parameters. */
SCNN_API void scnn_string_free(char* s);

/* ---- models ---------------------------------------------------------- */

typedef struct scnn_model scnn_model;

typedef struct scnn_preset_options {
  int32_t pool_h, pool_w;     /* adaptive pool output; 0,0 = preset default */
  int32_t with_batchnorm;     /* 0/1 */
  int32_t conv_dropout;       /* 0/1 */
} scnn_preset_options;

SCNN_API scnn_preset_options scnn_preset_options_default(void);

/* name: "proposed", "vgg16" or "proposed-tiny". opts may be NULL. */
SCNN_API scnn_status scnn_model_create_preset(const char* name, const scnn_preset_options* opts,
                                              uint64_t seed, scnn_model** out);

/* Builds a model from a JSON spec document (see docs/formats in README). */
SCNN_API scnn_status scnn_model_create_from_spec(const char* spec_json, uint64_t seed, scnn_model** out);

SCNN_API scnn_status scnn_model_load(const char* path, scnn_model** out);
SCNN_API scnn_status scnn_model_save(scnn_model* model, const char* path);
SCNN_API void scnn_model_free(scnn_model* model);

SCNN_API scnn_status scnn_model_param_count(const scnn_model* model, int64_t* out);
SCNN_API scnn_status scnn_model_class_count(const scnn_model* model, int64_t* out);
SCNN_API scnn_status scnn_model_spec_json(const scnn_model* model, char** out_json);

/* Eval-mode forward. input is n*c*h*w floats matching the model's declared
 * input shape; logits_out must hold n*classes floats. */
SCNN_API scnn_status scnn_model_forward(scnn_model* model, const float* input, int64_t n, int64_t c,
                                        int64_t h, int64_t w, float* logits_out, int64_t logits_capacity);

/* ---- experiment commands (what the CLI calls) ------------------------ */

typedef void (*scnn_log_fn)(void* user, const char* line);

typedef struct scnn_train_summary {
  int64_t epochs_run;
  int64_t best_epoch;
  double best_val_accuracy;
  double final_val_accuracy;
  double final_val_loss;
} scnn_train_summary;

/* Runs the training protocol from a config file; writes history.csv,
 * best.ckpt, report.txt and report.json under the output directory.
 * override_out / override_seed may be NULL. */
SCNN_API scnn_status scnn_train_run(const char* config_path, const char* override_out,
                                    const int64_t* override_seed, scnn_log_fn log, void* log_user,
                                    scnn_train_summary* out);

typedef struct scnn_eval_summary {
  double accuracy;
  double mean_loss;
  int64_t samples;
} scnn_eval_summary;

/* Evaluates a checkpoint on one dataset split ("train" or "valid"); writes
 * report.txt / report.json under out_dir (optional, may be NULL). */
SCNN_API scnn_status scnn_eval_run(const char* ckpt_path, const char* data_root, const char* split,
                                   const char* out_dir, scnn_eval_summary* out);

/* Finite-difference verification of every layer type and the tiny network.
 * Appends one "name max_rel_err PASS|FAIL" line per layer to the report.
 * Returns SCNN_ERR_GRADCHECK (with the failing layer in the error message)
 * if any layer exceeds the 1e-4 tolerance. */
SCNN_API scnn_status scnn_gradcheck_run(const char* preset, uint64_t seed, char** out_report);

/* Per-channel mean/std of the train split, written as JSON to out_path. */
SCNN_API scnn_status scnn_stats_run(const char* data_root, const char* out_path);

/* Writes original.png plus <variants> augmented PNGs under out_dir. */
SCNN_API scnn_status scnn_preview_run(const char* image_path, uint64_t seed, int32_t variants,
                                      const char* out_dir);

/* Renders a history CSV to an SVG with loss/accuracy panels. */
SCNN_API scnn_status scnn_plot_run(const char* history_csv, const char* out_svg);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SCNN_H */
