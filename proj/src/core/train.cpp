#include "core/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>

#include "core/io.hpp"

namespace scnn {

namespace fs = std::filesystem;

void validate_train_config(const TrainConfig& cfg) {
  validate_spec(cfg.spec);
  validate_optimizer_config(cfg.optimizer);
  if (cfg.batch_size < 1) raise(ErrorCode::config, "train: batch_size must be >= 1");
  if (cfg.max_epochs < 1) raise(ErrorCode::config, "train: max_epochs must be >= 1");
  if (cfg.patience < 1) raise(ErrorCode::config, "train: patience must be >= 1");
  if (cfg.data_root.empty()) raise(ErrorCode::config, "train: data_root is required");
  if (cfg.out_dir.empty()) raise(ErrorCode::config, "train: output directory is required");
}

std::string history_row_to_csv(const HistoryRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.6f,%.6f,%.6f,%.6f,%.3f",
                static_cast<long long>(row.epoch), row.lr, row.train_loss, row.train_acc, row.val_loss,
                row.val_acc, row.seconds);
  return buf;
}

std::vector<HistoryRow> history_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) raise(ErrorCode::data, "history: empty file");
  if (line != kHistoryHeader) raise(ErrorCode::data, "history: unexpected header '" + line + "'");
  std::vector<HistoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    HistoryRow row;
    long long epoch = 0;
    if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf,%lf,%lf", &epoch, &row.lr, &row.train_loss,
                    &row.train_acc, &row.val_loss, &row.val_acc, &row.seconds) != 7)
      raise(ErrorCode::data, "history: malformed row '" + line + "'");
    row.epoch = epoch;
    rows.push_back(row);
  }
  return rows;
}

EarlyStopping::EarlyStopping(int64_t patience)
    : patience_(patience), best_(-std::numeric_limits<double>::infinity()) {
  if (patience < 1) raise(ErrorCode::config, "early stopping: patience must be >= 1");
}

EarlyStopping::Update EarlyStopping::update(double val_accuracy) {
  ++epoch_;
  Update out;
  if (val_accuracy > best_) {
    best_ = val_accuracy;
    best_epoch_ = epoch_;
    bad_ = 0;
    out.is_new_best = true;
  } else {
    ++bad_;
    out.stop = bad_ >= patience_;
  }
  return out;
}

namespace {

int64_t argmax_row(const float* row, int64_t n) {
  int64_t best = 0;
  for (int64_t j = 1; j < n; ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

struct HistoryLog {
  explicit HistoryLog(const std::string& path) {
    file = std::fopen(path.c_str(), "wb");
    if (!file) raise(ErrorCode::io, "cannot open '" + path + "' for writing");
    std::fputs(kHistoryHeader, file);
    std::fputc('\n', file);
    std::fflush(file);
  }
  ~HistoryLog() {
    if (file) std::fclose(file);
  }
  void append(const HistoryRow& row) {
    std::fputs(history_row_to_csv(row).c_str(), file);
    std::fputc('\n', file);
    std::fflush(file);
  }
  FILE* file{nullptr};
};

} // namespace

EvalReport evaluate(ModelGraph<float>& graph, const Manifest& manifest, Split split,
                    const ChannelStats& stats, int64_t batch_size) {
  if (manifest.count(split) == 0) raise(ErrorCode::data, "evaluate: split has no samples");
  const int64_t classes = graph.spec().classes;
  std::vector<std::vector<int64_t>> cm(static_cast<size_t>(classes),
                                       std::vector<int64_t>(static_cast<size_t>(classes), 0));
  double loss_sum = 0.0;
  int64_t total = 0;
  Batcher batcher(manifest, split, batch_size, /*shuffle=*/false, /*seed=*/0, /*epoch=*/0, stats,
                  /*aug=*/nullptr);
  for (int64_t bi = 0; bi < batcher.batch_count(); ++bi) {
    SampleBatch batch = batcher.load(bi);
    Tensor<float> logits = graph.forward(batch.x, Mode::eval);
    SoftmaxLoss<float> sl = softmax_cross_entropy(logits, batch.labels);
    const int64_t n = batch.x.dim(0);
    loss_sum += sl.loss * static_cast<double>(n);
    total += n;
    for (int64_t i = 0; i < n; ++i) {
      const int64_t pred = argmax_row(logits.data() + i * classes, classes);
      cm[static_cast<size_t>(batch.labels[static_cast<size_t>(i)])][static_cast<size_t>(pred)]++;
    }
  }
  EvalReport report = report_from_confusion(std::move(cm));
  report.mean_loss = loss_sum / static_cast<double>(total);
  return report;
}

TrainResult train(const TrainConfig& cfg, const LogFn& log) {
  validate_train_config(cfg);
  Manifest manifest = scan_dataset(cfg.data_root);
  if (manifest.count(Split::train) == 0) raise(ErrorCode::data, "train split has no samples");
  if (manifest.count(Split::valid) == 0) raise(ErrorCode::data, "valid split has no samples");
  const ChannelStats stats =
      cfg.stats_override ? *cfg.stats_override : compute_stats(manifest, Split::train);

  fs::create_directories(cfg.out_dir);
  const std::string ckpt_path = (fs::path(cfg.out_dir) / "best.ckpt").string();

  ModelGraph<float> graph(cfg.spec, cfg.seed);
  Optimizer<float> optimizer(cfg.optimizer);
  auto param_refs = graph.params();
  std::vector<Tensor<float>*> params;
  for (auto& p : param_refs) params.push_back(p.tensor);

  HistoryLog history_log((fs::path(cfg.out_dir) / "history.csv").string());
  EarlyStopping stopper(cfg.patience);
  TrainResult result;
  result.best_checkpoint_path = ckpt_path;

  uint64_t global_step = 0;
  const AugConfig* aug = cfg.augment_enabled ? &cfg.aug : nullptr;
  for (int64_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(cfg.schedule, epoch);
    Batcher batcher(manifest, Split::train, cfg.batch_size, /*shuffle=*/true, cfg.seed, epoch, stats, aug);

    double loss_sum = 0.0;
    int64_t correct = 0, seen = 0;
    for (int64_t bi = 0; bi < batcher.batch_count(); ++bi) {
      SampleBatch batch = batcher.load(bi);
      Tensor<float> logits = graph.forward(batch.x, Mode::train, ++global_step);
      SoftmaxLoss<float> sl = softmax_cross_entropy(logits, batch.labels);
      if (!std::isfinite(sl.loss))
        raise(ErrorCode::numeric, "training diverged: non-finite loss at epoch " + std::to_string(epoch));
      const int64_t n = batch.x.dim(0);
      loss_sum += sl.loss * static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i)
        if (argmax_row(logits.data() + i * cfg.spec.classes, cfg.spec.classes) ==
            batch.labels[static_cast<size_t>(i)])
          ++correct;
      seen += n;

      auto back = graph.backward(sl.dlogits);
      std::vector<const Tensor<float>*> grads;
      for (const auto& g : back.param_grads) grads.push_back(&g);
      optimizer.step(params, grads, lr);
    }

    EvalReport val = evaluate(graph, manifest, Split::valid, stats, cfg.batch_size);
    if (!std::isfinite(val.mean_loss))
      raise(ErrorCode::numeric, "training diverged: non-finite validation loss at epoch " +
                                    std::to_string(epoch));

    HistoryRow row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_loss = loss_sum / static_cast<double>(seen);
    row.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    row.val_loss = val.mean_loss;
    row.val_acc = val.accuracy;
    row.seconds = cfg.record_timing
                      ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                      : 0.0;
    history_log.append(row);
    result.history.push_back(row);
    result.epochs_run = epoch;

    EarlyStopping::Update st = stopper.update(val.accuracy);
    if (st.is_new_best) {
      CheckpointMeta meta;
      meta.epoch = epoch;
      meta.best_val_accuracy = val.accuracy;
      meta.seed = cfg.seed;
      save_checkpoint(graph, meta, ckpt_path);
      result.best_epoch = epoch;
      result.best_val_accuracy = val.accuracy;
    }
    if (log) {
      char line[256];
      std::snprintf(line, sizeof(line),
                    "epoch %lld/%lld  lr %.1e  train loss %.4f acc %.4f  val loss %.4f acc %.4f%s",
                    static_cast<long long>(epoch), static_cast<long long>(cfg.max_epochs), lr,
                    row.train_loss, row.train_acc, row.val_loss, row.val_acc,
                    st.is_new_best ? "  *best*" : "");
      log(line);
    }
    if (st.stop) {
      if (log)
        log("early stop after " + std::to_string(cfg.patience) + " epochs without improvement (best epoch " +
            std::to_string(result.best_epoch) + ")");
      break;
    }
  }
  return result;
}

ExperimentResult run_experiment(const TrainConfig& cfg, const LogFn& log) {
  ExperimentResult out;
  out.train = train(cfg, log);
  LoadedCheckpoint best = load_checkpoint(out.train.best_checkpoint_path);
  Manifest manifest = scan_dataset(cfg.data_root);
  const ChannelStats stats =
      cfg.stats_override ? *cfg.stats_override : compute_stats(manifest, Split::train);
  out.final_report = evaluate(best.graph, manifest, Split::valid, stats, cfg.batch_size);

  std::vector<std::string> names(class_names().begin(), class_names().end());
  if (cfg.spec.classes != static_cast<int64_t>(names.size())) {
    names.clear();
    for (int64_t c = 0; c < cfg.spec.classes; ++c) names.push_back("class" + std::to_string(c));
  }
  write_text_file_atomic((fs::path(cfg.out_dir) / "report.txt").string(),
                         report_to_text(out.final_report, names));
  write_text_file_atomic((fs::path(cfg.out_dir) / "report.json").string(),
                         report_to_json(out.final_report, names));
  return out;
}

} // namespace scnn
