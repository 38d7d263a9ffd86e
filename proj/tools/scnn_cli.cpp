// Command-line front end. Everything goes through the C API in scnn.h; this
// file only parses arguments, relays log lines and maps statuses onto the
// exit-code table (0 ok, 2 config, 3 data, 4 numeric divergence, 5 gradcheck
// failure).
#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "scnn.h"

namespace {

void print_log(void*, const char* line) { std::printf("%s\n", line); }

int finish(scnn_status status) {
  if (status != SCNN_OK) std::fprintf(stderr, "error: %s\n", scnn_last_error());
  return scnn_status_exit_code(status);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"scnn - cooking-state CNN experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(scnn_version()));

  // train
  auto* train = app.add_subcommand("train", "run a training experiment from a config file");
  std::string train_config, train_out;
  int64_t train_seed = -1;
  bool train_seed_set = false;
  train->add_option("--config", train_config, "run config file (JSON)")->required();
  train->add_option("--out", train_out, "output directory (overrides the config)");
  train->add_option("--seed", train_seed, "seed override")->each([&](const std::string&) {
    train_seed_set = true;
  });

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  std::string eval_ckpt, eval_data, eval_split = "valid", eval_out = ".";
  eval->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset root")->required();
  eval->add_option("--split", eval_split, "train or valid (default valid)");
  eval->add_option("--out", eval_out, "directory for report files (default .)");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference verification of all layers");
  std::string gc_preset = "proposed-tiny";
  uint64_t gc_seed = 0;
  gradcheck->add_option("--preset", gc_preset, "network preset (proposed-tiny)");
  gradcheck->add_option("--seed", gc_seed, "base seed");

  // stats
  auto* stats = app.add_subcommand("stats", "compute train-split channel statistics");
  std::string stats_data, stats_out = "stats.json";
  stats->add_option("--data", stats_data, "dataset root")->required();
  stats->add_option("--out", stats_out, "output file (default stats.json)");

  // preview
  auto* preview = app.add_subcommand("preview", "write augmented variants of one image");
  std::string prev_image, prev_out;
  uint64_t prev_seed = 0;
  int32_t prev_count = 4;
  preview->add_option("--image", prev_image, "input image (PNG/JPEG)")->required();
  preview->add_option("--seed", prev_seed, "augmentation seed");
  preview->add_option("--count", prev_count, "number of variants (default 4)");
  preview->add_option("--out", prev_out, "output directory")->required();

  // plot
  auto* plot = app.add_subcommand("plot", "render a history CSV to SVG");
  std::string plot_history, plot_out;
  plot->add_option("--history", plot_history, "history.csv from a training run")->required();
  plot->add_option("--out", plot_out, "output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*train) {
    scnn_train_summary summary{};
    const scnn_status st =
        scnn_train_run(train_config.c_str(), train_out.empty() ? nullptr : train_out.c_str(),
                       train_seed_set ? &train_seed : nullptr, print_log, nullptr, &summary);
    if (st == SCNN_OK)
      std::printf("done: best epoch %lld, best validation accuracy %.4f\n",
                  static_cast<long long>(summary.best_epoch), summary.best_val_accuracy);
    return finish(st);
  }
  if (*eval) {
    scnn_eval_summary summary{};
    const scnn_status st =
        scnn_eval_run(eval_ckpt.c_str(), eval_data.c_str(), eval_split.c_str(), eval_out.c_str(), &summary);
    if (st == SCNN_OK)
      std::printf("accuracy %.4f  mean loss %.4f  (%lld samples)\n", summary.accuracy, summary.mean_loss,
                  static_cast<long long>(summary.samples));
    return finish(st);
  }
  if (*gradcheck) {
    char* report = nullptr;
    const scnn_status st = scnn_gradcheck_run(gc_preset.c_str(), gc_seed, &report);
    if (report) {
      std::fputs(report, stdout);
      scnn_string_free(report);
    }
    return finish(st);
  }
  if (*stats) {
    const scnn_status st = scnn_stats_run(stats_data.c_str(), stats_out.c_str());
    if (st == SCNN_OK) std::printf("wrote %s\n", stats_out.c_str());
    return finish(st);
  }
  if (*preview) {
    const scnn_status st = scnn_preview_run(prev_image.c_str(), prev_seed, prev_count, prev_out.c_str());
    if (st == SCNN_OK) std::printf("wrote original + %d variants under %s\n", prev_count, prev_out.c_str());
    return finish(st);
  }
  if (*plot) {
    const scnn_status st = scnn_plot_run(plot_history.c_str(), plot_out.c_str());
    if (st == SCNN_OK) std::printf("wrote %s\n", plot_out.c_str());
    return finish(st);
  }
  return 2;
}
