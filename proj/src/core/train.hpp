#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/dataset.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"
#include "core/model_graph.hpp"
#include "core/optim.hpp"

namespace scnn {

struct TrainConfig {
  ModelSpec spec;
  OptimizerConfig optimizer = default_optimizer_config(OptKind::sgd);
  LrSchedule schedule = LrSchedule::table_preset();
  int64_t batch_size{32};
  int64_t max_epochs{150};
  int64_t patience{20};
  uint64_t seed{0};
  std::string data_root;
  std::optional<ChannelStats> stats_override;
  std::string out_dir;
  AugConfig aug;
  bool augment_enabled{true};
  // "wall" writes measured epoch seconds into the history; "none" writes 0 so
  // two identically seeded runs produce byte-identical logs.
  bool record_timing{true};
};

void validate_train_config(const TrainConfig& cfg);

struct HistoryRow {
  int64_t epoch{0};
  double lr{0};
  double train_loss{0}, train_acc{0};
  double val_loss{0}, val_acc{0};
  double seconds{0};
};

inline constexpr const char* kHistoryHeader = "epoch,lr,train_loss,train_acc,val_loss,val_acc,seconds";

std::string history_row_to_csv(const HistoryRow& row);
std::vector<HistoryRow> history_from_csv(const std::string& text);

// Patience tracking on validation accuracy. Improvement is strict; ties do
// not reset the counter. `stop` fires after `patience` consecutive
// non-improving updates.
class EarlyStopping {
public:
  explicit EarlyStopping(int64_t patience);

  struct Update {
    bool is_new_best{false};
    bool stop{false};
  };
  Update update(double val_accuracy);

  double best() const { return best_; }
  int64_t best_epoch() const { return best_epoch_; }

private:
  int64_t patience_;
  double best_;
  int64_t bad_{0};
  int64_t epoch_{0};
  int64_t best_epoch_{0};
};

using LogFn = std::function<void(const std::string&)>;

struct TrainResult {
  std::vector<HistoryRow> history;
  std::string best_checkpoint_path;
  int64_t best_epoch{0};
  double best_val_accuracy{0};
  int64_t epochs_run{0};
};

// Argmax over eval-mode logits (lowest index wins ties), aggregated into the
// confusion matrix with the mean cross-entropy loss.
EvalReport evaluate(ModelGraph<float>& graph, const Manifest& manifest, Split split,
                    const ChannelStats& stats, int64_t batch_size);

// The full protocol: per epoch, set the scheduled rate, run shuffled
// augmented train batches (train forward, loss, backward, optimizer step),
// evaluate the validation split, append+flush one history row, checkpoint on
// strict improvement, stop on patience or max_epochs. A non-finite loss
// aborts with the offending epoch in the message.
TrainResult train(const TrainConfig& cfg, const LogFn& log = nullptr);

// train() plus the final artifacts: evaluates the best checkpoint on the
// validation split and writes report.txt / report.json next to history.csv
// and best.ckpt.
struct ExperimentResult {
  TrainResult train;
  EvalReport final_report;
};
ExperimentResult run_experiment(const TrainConfig& cfg, const LogFn& log = nullptr);

} // namespace scnn
