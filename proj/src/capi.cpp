#include "scnn.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "core/checkpoint.hpp"
#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/gradcheck.hpp"
#include "core/io.hpp"
#include "core/model_graph.hpp"
#include "core/plot.hpp"
#include "core/train.hpp"

namespace fs = std::filesystem;

struct scnn_model {
  scnn::ModelGraph<float> graph;
  scnn::CheckpointMeta meta;
};

namespace {

thread_local std::string g_last_error = "no error";

scnn_status status_of(scnn::ErrorCode code) { return static_cast<scnn_status>(code); }

template <typename Fn>
scnn_status guarded(Fn&& fn) {
  try {
    fn();
    return SCNN_OK;
  } catch (const scnn::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SCNN_ERR_STATE;
  }
}

scnn_status invalid(const char* msg) {
  g_last_error = msg;
  return SCNN_ERR_CONFIG;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

} // namespace

extern "C" {

const char* scnn_version(void) { return "0.1.0"; }

const char* scnn_last_error(void) { return g_last_error.c_str(); }

int scnn_status_exit_code(scnn_status status) {
  switch (status) {
    case SCNN_OK: return 0;
    case SCNN_ERR_CONFIG:
    case SCNN_ERR_SHAPE:
    case SCNN_ERR_FORMAT:
    case SCNN_ERR_STATE: return 2;
    case SCNN_ERR_DATA:
    case SCNN_ERR_IO: return 3;
    case SCNN_ERR_NUMERIC: return 4;
    case SCNN_ERR_GRADCHECK: return 5;
    default: return 2;
  }
}

void scnn_string_free(char* s) { std::free(s); }

scnn_preset_options scnn_preset_options_default(void) { return {0, 0, 1, 1}; }

scnn_status scnn_model_create_preset(const char* name, const scnn_preset_options* opts, uint64_t seed,
                                     scnn_model** out) {
  if (!name || !out) return invalid("model_create_preset: NULL argument");
  return guarded([&] {
    scnn_preset_options o = opts ? *opts : scnn_preset_options_default();
    const int64_t ph = o.pool_h > 0 ? o.pool_h : 5;
    const int64_t pw = o.pool_w > 0 ? o.pool_w : 5;
    scnn::ModelSpec spec = scnn::preset_by_name(name, ph, pw, o.with_batchnorm != 0, o.conv_dropout != 0);
    auto* model = new scnn_model{scnn::ModelGraph<float>(spec, seed), {}};
    model->meta.seed = seed;
    *out = model;
  });
}

scnn_status scnn_model_create_from_spec(const char* spec_json, uint64_t seed, scnn_model** out) {
  if (!spec_json || !out) return invalid("model_create_from_spec: NULL argument");
  return guarded([&] {
    scnn::ModelSpec spec = scnn::spec_from_json(spec_json);
    auto* model = new scnn_model{scnn::ModelGraph<float>(spec, seed), {}};
    model->meta.seed = seed;
    *out = model;
  });
}

scnn_status scnn_model_load(const char* path, scnn_model** out) {
  if (!path || !out) return invalid("model_load: NULL argument");
  return guarded([&] {
    scnn::LoadedCheckpoint loaded = scnn::load_checkpoint(path);
    *out = new scnn_model{std::move(loaded.graph), loaded.meta};
  });
}

scnn_status scnn_model_save(scnn_model* model, const char* path) {
  if (!model || !path) return invalid("model_save: NULL argument");
  return guarded([&] { scnn::save_checkpoint(model->graph, model->meta, path); });
}

void scnn_model_free(scnn_model* model) { delete model; }

scnn_status scnn_model_param_count(const scnn_model* model, int64_t* out) {
  if (!model || !out) return invalid("model_param_count: NULL argument");
  return guarded([&] { *out = const_cast<scnn_model*>(model)->graph.param_count(); });
}

scnn_status scnn_model_class_count(const scnn_model* model, int64_t* out) {
  if (!model || !out) return invalid("model_class_count: NULL argument");
  *out = model->graph.spec().classes;
  return SCNN_OK;
}

scnn_status scnn_model_spec_json(const scnn_model* model, char** out_json) {
  if (!model || !out_json) return invalid("model_spec_json: NULL argument");
  return guarded([&] { *out_json = dup_string(scnn::spec_to_json(model->graph.spec())); });
}

scnn_status scnn_model_forward(scnn_model* model, const float* input, int64_t n, int64_t c, int64_t h,
                               int64_t w, float* logits_out, int64_t logits_capacity) {
  if (!model || !input || !logits_out) return invalid("model_forward: NULL argument");
  return guarded([&] {
    if (n < 1) scnn::raise(scnn::ErrorCode::shape, "model_forward: batch size must be >= 1");
    const int64_t classes = model->graph.spec().classes;
    if (logits_capacity < n * classes)
      scnn::raise(scnn::ErrorCode::shape, "model_forward: logits buffer holds " +
                                              std::to_string(logits_capacity) + " floats, need " +
                                              std::to_string(n * classes));
    scnn::Tensor<float> x({n, c, h, w},
                          std::vector<float>(input, input + static_cast<size_t>(n * c * h * w)));
    scnn::Tensor<float> logits = model->graph.forward(x, scnn::Mode::eval);
    std::memcpy(logits_out, logits.data(), static_cast<size_t>(logits.numel()) * sizeof(float));
  });
}

scnn_status scnn_train_run(const char* config_path, const char* override_out, const int64_t* override_seed,
                           scnn_log_fn log, void* log_user, scnn_train_summary* out) {
  if (!config_path) return invalid("train_run: NULL config path");
  return guarded([&] {
    scnn::TrainConfig cfg =
        scnn::load_run_config(config_path, override_out ? override_out : "", override_seed);
    scnn::LogFn logger;
    if (log) logger = [log, log_user](const std::string& line) { log(log_user, line.c_str()); };
    scnn::ExperimentResult result = scnn::run_experiment(cfg, logger);
    if (out) {
      out->epochs_run = result.train.epochs_run;
      out->best_epoch = result.train.best_epoch;
      out->best_val_accuracy = result.train.best_val_accuracy;
      out->final_val_accuracy = result.final_report.accuracy;
      out->final_val_loss = result.final_report.mean_loss;
    }
  });
}

scnn_status scnn_eval_run(const char* ckpt_path, const char* data_root, const char* split_name,
                          const char* out_dir, scnn_eval_summary* out) {
  if (!ckpt_path || !data_root || !split_name) return invalid("eval_run: NULL argument");
  return guarded([&] {
    scnn::Split split;
    if (std::string(split_name) == "train")
      split = scnn::Split::train;
    else if (std::string(split_name) == "valid")
      split = scnn::Split::valid;
    else
      scnn::raise(scnn::ErrorCode::config, "eval: split must be 'train' or 'valid'");

    scnn::LoadedCheckpoint loaded = scnn::load_checkpoint(ckpt_path);
    scnn::Manifest manifest = scnn::scan_dataset(data_root);
    if (manifest.count(split) == 0)
      scnn::raise(scnn::ErrorCode::data, std::string("eval: split '") + split_name + "' has no samples");
    const scnn::ChannelStats stats = scnn::compute_stats(manifest, scnn::Split::train);
    scnn::EvalReport report = scnn::evaluate(loaded.graph, manifest, split, stats, 32);
    if (out_dir && *out_dir) {
      fs::create_directories(out_dir);
      std::vector<std::string> names(scnn::class_names().begin(), scnn::class_names().end());
      if (loaded.graph.spec().classes != static_cast<int64_t>(names.size())) {
        names.clear();
        for (int64_t c = 0; c < loaded.graph.spec().classes; ++c)
          names.push_back("class" + std::to_string(c));
      }
      scnn::write_text_file_atomic((fs::path(out_dir) / "report.txt").string(),
                                   scnn::report_to_text(report, names));
      scnn::write_text_file_atomic((fs::path(out_dir) / "report.json").string(),
                                   scnn::report_to_json(report, names));
    }
    if (out) {
      out->accuracy = report.accuracy;
      out->mean_loss = report.mean_loss;
      out->samples = report.total;
    }
  });
}

scnn_status scnn_gradcheck_run(const char* preset, uint64_t seed, char** out_report) {
  return guarded([&] {
    const std::string name = preset ? preset : "proposed-tiny";
    if (name != "proposed-tiny")
      scnn::raise(scnn::ErrorCode::config, "gradcheck: only the 'proposed-tiny' preset is supported");
    // test hook: corrupt one layer's analytic gradient to drive the failure path
    const char* fault = std::getenv("SCNN_GRADCHECK_FAULT");
    auto results = scnn::run_gradcheck_suite(seed, 5, fault ? fault : "");
    std::string report;
    std::string failed;
    for (const auto& r : results) {
      char line[128];
      std::snprintf(line, sizeof(line), "%-22s max_rel_err %.3e  %s\n", r.layer.c_str(), r.max_rel_err,
                    r.pass() ? "PASS" : "FAIL");
      report += line;
      if (!r.pass()) failed = failed.empty() ? r.layer : failed + ", " + r.layer;
    }
    if (out_report) *out_report = dup_string(report);
    if (!failed.empty())
      scnn::raise(scnn::ErrorCode::gradcheck, "gradient check failed for: " + failed);
  });
}

scnn_status scnn_stats_run(const char* data_root, const char* out_path) {
  if (!data_root || !out_path) return invalid("stats_run: NULL argument");
  return guarded([&] {
    scnn::Manifest manifest = scnn::scan_dataset(data_root);
    scnn::ChannelStats stats = scnn::compute_stats(manifest, scnn::Split::train);
    scnn::write_text_file_atomic(out_path, scnn::stats_to_json(stats));
  });
}

scnn_status scnn_preview_run(const char* image_path, uint64_t seed, int32_t variants, const char* out_dir) {
  if (!image_path || !out_dir) return invalid("preview_run: NULL argument");
  return guarded([&] {
    if (variants < 1) scnn::raise(scnn::ErrorCode::config, "preview: variants must be >= 1");
    scnn::Image img = scnn::resize_center_crop(scnn::decode_image_file(image_path));
    fs::create_directories(out_dir);
    scnn::encode_png(img, (fs::path(out_dir) / "original.png").string());
    scnn::AugConfig cfg;
    for (int32_t i = 0; i < variants; ++i) {
      scnn::Rng stream = scnn::Rng(seed).child(scnn::rng_label::augment, static_cast<uint64_t>(i));
      scnn::Image aug = scnn::augment(img, cfg, stream);
      scnn::encode_png(aug, (fs::path(out_dir) / ("aug_" + std::to_string(i) + ".png")).string());
    }
  });
}

scnn_status scnn_plot_run(const char* history_csv, const char* out_svg) {
  if (!history_csv || !out_svg) return invalid("plot_run: NULL argument");
  return guarded([&] { scnn::plot_history_file(history_csv, out_svg); });
}

} // extern "C"
