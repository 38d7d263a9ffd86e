#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "core/io.hpp"
#include "core/metrics.hpp"
#include "core/plot.hpp"
#include "core/train.hpp"
#include "testutil.hpp"

using namespace scnn;
namespace fs = std::filesystem;

namespace {

// 224-input model with tiny channel counts: cheap enough for end-to-end
// training tests while exercising the full pipeline.
ModelSpec small224(int64_t classes, bool with_bn = true) {
  ModelSpec spec;
  spec.in_channels = 3;
  spec.in_h = spec.in_w = 224;
  spec.classes = classes;
  spec.layers.push_back(LayerDesc::Conv(2, with_bn));
  spec.layers.push_back(LayerDesc::MaxPool());
  spec.layers.push_back(LayerDesc::Conv(2, with_bn));
  spec.layers.push_back(LayerDesc::MaxPool());
  spec.layers.push_back(LayerDesc::AdaptiveAvgPool(2, 2));
  spec.layers.push_back(LayerDesc::Dense(classes));
  return spec;
}

Image class_pattern(int label, uint64_t variant) {
  // distinct hue + stripe phase per class
  Image img(32, 32);
  const float hue = static_cast<float>(label) / 11.0f;
  for (int64_t y = 0; y < 32; ++y)
    for (int64_t x = 0; x < 32; ++x) {
      const bool stripe = ((x + static_cast<int64_t>(variant)) / 4) % 2 == 0;
      img.at(y, x, 0) = stripe ? hue : 1.0f - hue;
      img.at(y, x, 1) = stripe ? 1.0f - hue : hue * 0.5f;
      img.at(y, x, 2) = 0.2f + 0.6f * hue;
    }
  return img;
}

// two classes, four train / two valid images
std::string make_two_class_fixture(test::TempDir& dir) {
  for (const char* split : {"train", "valid"}) {
    for (const char* cls : {"diced", "whole"}) {
      fs::create_directories(dir.path() / split / cls);
      const int label = class_index(cls);
      const int files = std::string(split) == "train" ? 2 : 1;
      for (int i = 0; i < files; ++i)
        encode_png(class_pattern(label, static_cast<uint64_t>(i)),
                   (dir.path() / split / cls / ("p" + std::to_string(i) + ".png")).string());
    }
  }
  return dir.str();
}

TrainConfig base_config(const std::string& root, const std::string& out) {
  TrainConfig cfg;
  cfg.spec = small224(11);
  cfg.batch_size = 2;
  cfg.max_epochs = 3;
  cfg.patience = 20;
  cfg.seed = 7;
  cfg.data_root = root;
  cfg.out_dir = out;
  cfg.augment_enabled = false;
  cfg.record_timing = false;
  return cfg;
}

} // namespace

TEST_CASE("early stopping reproduces hand-traced sequences") {
  // first call is always a new best
  EarlyStopping first(5);
  CHECK(first.update(0.0).is_new_best);

  // [.5,.6,.6,.6,.6] with patience 3 stops at epoch 5, best at 2
  EarlyStopping t(3);
  auto u1 = t.update(0.5);
  CHECK(u1.is_new_best);
  auto u2 = t.update(0.6);
  CHECK(u2.is_new_best);
  CHECK(!u2.stop);
  auto u3 = t.update(0.6); // tie: non-improving
  CHECK(!u3.is_new_best);
  CHECK(!u3.stop);
  auto u4 = t.update(0.6);
  CHECK(!u4.stop);
  auto u5 = t.update(0.6);
  CHECK(u5.stop);
  CHECK(t.best_epoch() == 2);
  CHECK(t.best() == 0.6);

  // patience 1 stops at the first non-improving epoch
  EarlyStopping p1(1);
  CHECK(p1.update(0.4).is_new_best);
  CHECK(p1.update(0.4).stop);

  // an improvement resets the counter
  EarlyStopping p2(2);
  p2.update(0.1);
  CHECK(!p2.update(0.1).stop);
  CHECK(p2.update(0.3).is_new_best);
  CHECK(!p2.update(0.2).stop);
  CHECK(p2.update(0.2).stop);

  // patience 20 tolerates 19 flat epochs
  EarlyStopping p20(20);
  p20.update(0.5);
  for (int i = 0; i < 19; ++i) CHECK(!p20.update(0.5).stop);
  CHECK(p20.update(0.5).stop);

  CHECK_THROWS_AS(EarlyStopping{0}, Error);
}

TEST_CASE("classification report arithmetic") {
  // identity confusion matrix: everything 1.0
  std::vector<std::vector<int64_t>> eye = {{3, 0}, {0, 5}};
  auto m = classification_report(eye);
  CHECK(m[0].precision == 1.0);
  CHECK(m[0].recall == 1.0);
  CHECK(m[0].f1 == 1.0);
  CHECK(m[0].support == 3);
  CHECK(m[1].support == 5);

  // class never predicted: precision 0 with a flag
  std::vector<std::vector<int64_t>> never = {{0, 4}, {0, 6}};
  auto mn = classification_report(never);
  CHECK(mn[0].precision == 0.0);
  CHECK(mn[0].recall == 0.0);
  CHECK(mn[0].zero_denominator);

  // [[5,5],[0,10]]: class0 P=1.0, R=0.5, F1=2/3
  std::vector<std::vector<int64_t>> cm = {{5, 5}, {0, 10}};
  auto mc = classification_report(cm);
  CHECK(mc[0].precision == doctest::Approx(1.0));
  CHECK(mc[0].recall == doctest::Approx(0.5));
  CHECK(mc[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  // validation-report row: precision .78, recall .82 gives F1 that rounds to .80
  const double p = 0.78, r = 0.82;
  const double f1 = 2 * p * r / (p + r);
  CHECK(std::abs(f1 - 0.80) <= 0.005);

  EvalReport report = report_from_confusion(cm);
  CHECK(report.accuracy == doctest::Approx(15.0 / 20.0));
  CHECK(report.total == 20);
  // accuracy equals trace/sum exactly
  CHECK(report.accuracy == (5.0 + 10.0) / 20.0);
}

TEST_CASE("normalize_cm rows") {
  std::vector<std::vector<int64_t>> cm = {{2, 2}, {0, 4}};
  auto n = normalize_cm(cm);
  CHECK(n[0][0] == 0.5);
  CHECK(n[0][1] == 0.5);
  CHECK(n[1][0] == 0.0);
  CHECK(n[1][1] == 1.0);

  std::vector<std::vector<int64_t>> zero_row = {{0, 0}, {3, 1}};
  auto z = normalize_cm(zero_row);
  CHECK(z[0][0] == 0.0);
  CHECK(z[0][1] == 0.0);
  CHECK(z[1][0] + z[1][1] == doctest::Approx(1.0).epsilon(1e-9));

  // random counts: every nonzero row sums to 1 within 1e-9
  Rng rng(3);
  std::vector<std::vector<int64_t>> big(11, std::vector<int64_t>(11));
  for (auto& row : big)
    for (auto& v : row) v = static_cast<int64_t>(rng.next_below(50));
  auto nb = normalize_cm(big);
  for (size_t i = 0; i < nb.size(); ++i) {
    double acc = 0;
    for (double v : nb[i]) acc += v;
    CHECK(std::abs(acc - 1.0) <= 1e-9);
  }
}

TEST_CASE("report rendering") {
  std::vector<std::vector<int64_t>> cm = {{5, 5}, {0, 10}};
  EvalReport report = report_from_confusion(cm);
  report.mean_loss = 0.42;
  std::string text = report_to_text(report, {"a", "b"});
  CHECK(text.find("Precision") != std::string::npos);
  CHECK(text.find("Average") != std::string::npos);
  std::string js = report_to_json(report, {"a", "b"});
  CHECK(js.find("\"confusion\"") != std::string::npos);
  CHECK_THROWS_AS(report_to_text(report, {"a"}), Error);
}

TEST_CASE("history csv round trip") {
  std::vector<HistoryRow> rows;
  for (int i = 1; i <= 3; ++i) {
    HistoryRow r;
    r.epoch = i;
    r.lr = 1e-3;
    r.train_loss = 2.0 / i;
    r.train_acc = 0.2 * i;
    r.val_loss = 2.1 / i;
    r.val_acc = 0.15 * i;
    r.seconds = 0.0;
    rows.push_back(r);
  }
  std::string text = kHistoryHeader;
  text += "\n";
  for (const auto& r : rows) text += history_row_to_csv(r) + "\n";
  auto back = history_from_csv(text);
  REQUIRE(back.size() == 3);
  CHECK(back[1].epoch == 2);
  CHECK(back[1].train_loss == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(history_from_csv("nonsense\n1,2,3\n"), Error);
  CHECK_THROWS_AS(history_from_csv(std::string(kHistoryHeader) + "\n1,2,3\n"), Error);
}

TEST_CASE("train loop end to end on a small fixture") {
  test::TempDir data("train_data");
  test::TempDir out("train_out");
  const std::string root = make_two_class_fixture(data);
  TrainConfig cfg = base_config(root, out.str());

  TrainResult result = train(cfg);
  REQUIRE(result.epochs_run >= 1);
  REQUIRE(result.history.size() == static_cast<size_t>(result.epochs_run));

  // lr column equals the schedule everywhere
  for (const HistoryRow& row : result.history) CHECK(row.lr == lr_at_epoch(cfg.schedule, row.epoch));

  // history.csv written incrementally and parseable
  auto parsed = history_from_csv(read_text_file(out.file("history.csv")));
  REQUIRE(parsed.size() == result.history.size());
  for (size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i].epoch == result.history[i].epoch);
    CHECK(parsed[i].val_acc == doctest::Approx(result.history[i].val_acc).epsilon(1e-9));
  }

  // best checkpoint stores the max validation accuracy seen
  double best = -1;
  for (const HistoryRow& row : result.history) best = std::max(best, row.val_acc);
  CHECK(result.best_val_accuracy == best);
  LoadedCheckpoint loaded = load_checkpoint(result.best_checkpoint_path);
  CHECK(loaded.meta.best_val_accuracy == doctest::Approx(best).epsilon(1e-12));
  CHECK(loaded.meta.epoch == result.best_epoch);

  // never runs past best_epoch + patience
  CHECK(result.epochs_run <= result.best_epoch + cfg.patience);
}

TEST_CASE("train determinism: identical seeds give byte-identical artifacts") {
  test::TempDir data("det_data");
  test::TempDir out1("det_out1");
  test::TempDir out2("det_out2");
  const std::string root = make_two_class_fixture(data);

  TrainConfig cfg1 = base_config(root, out1.str());
  cfg1.augment_enabled = true; // exercise the augmentation streams too
  cfg1.max_epochs = 2;
  TrainConfig cfg2 = cfg1;
  cfg2.out_dir = out2.str();

  TrainResult r1 = train(cfg1);
  TrainResult r2 = train(cfg2);
  CHECK(read_text_file(out1.file("history.csv")) == read_text_file(out2.file("history.csv")));
  CHECK(read_binary_file(out1.file("best.ckpt")) == read_binary_file(out2.file("best.ckpt")));
  REQUIRE(r1.history.size() == r2.history.size());
  for (size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].val_acc == r2.history[i].val_acc);
  }
}

TEST_CASE("untrained model on a balanced split: loss near ln(classes)") {
  test::TempDir data("init_data");
  for (const char* split : {"train", "valid"}) {
    for (size_t c = 0; c < class_names().size(); ++c) {
      fs::create_directories(data.path() / split / class_names()[c]);
      encode_png(class_pattern(static_cast<int>(c), 0),
                 (data.path() / split / class_names()[c] / "img.png").string());
    }
  }
  Manifest manifest = scan_dataset(data.str());
  ChannelStats stats = compute_stats(manifest, Split::train);
  ModelGraph<float> graph(small224(11), 5);
  EvalReport report = evaluate(graph, manifest, Split::valid, stats, 4);
  CHECK(std::abs(report.mean_loss - std::log(11.0)) <= 0.15);
  CHECK(report.total == 11);
}

TEST_CASE("training diverges cleanly on an absurd learning rate") {
  test::TempDir data("div_data");
  test::TempDir out("div_out");
  const std::string root = make_two_class_fixture(data);
  TrainConfig cfg = base_config(root, out.str());
  cfg.spec = small224(11, /*with_bn=*/false); // batch norm would renormalize the blow-up
  cfg.schedule = LrSchedule::constant_rate(1e15);
  cfg.max_epochs = 5;
  try {
    train(cfg);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::numeric);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("train errors before any epoch on a missing dataset") {
  test::TempDir out("noop_out");
  TrainConfig cfg = base_config("/nonexistent/data", out.file("run"));
  try {
    train(cfg);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::data);
    CHECK(std::string(e.what()).find("/nonexistent/data") != std::string::npos);
  }
  CHECK(!fs::exists(out.file("run/history.csv")));
}

TEST_CASE("run_experiment writes the final report files") {
  test::TempDir data("exp_data");
  test::TempDir out("exp_out");
  const std::string root = make_two_class_fixture(data);
  TrainConfig cfg = base_config(root, out.str());
  cfg.max_epochs = 2;
  ExperimentResult result = run_experiment(cfg);
  CHECK(fs::exists(out.file("history.csv")));
  CHECK(fs::exists(out.file("best.ckpt")));
  CHECK(fs::exists(out.file("report.txt")));
  CHECK(fs::exists(out.file("report.json")));
  CHECK(result.final_report.total == 2);
  // no stray temp files after success
  for (const auto& entry : fs::directory_iterator(out.str()))
    CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("svg plot carries both curve groups, labels, and lr markers") {
  std::vector<HistoryRow> rows;
  for (int e = 1; e <= 3; ++e) {
    HistoryRow r;
    r.epoch = e;
    r.lr = e < 3 ? 1e-3 : 1e-4; // one lr change at epoch 3
    r.train_loss = 2.4 - 0.3 * e;
    r.val_loss = 2.5 - 0.25 * e;
    r.train_acc = 0.2 * e;
    r.val_acc = 0.18 * e;
    rows.push_back(r);
  }
  std::string svg = render_history_svg(rows);
  CHECK(svg.find("id=\"loss-curves\"") != std::string::npos);
  CHECK(svg.find("id=\"accuracy-curves\"") != std::string::npos);
  CHECK(svg.find(">epoch<") != std::string::npos);
  CHECK(svg.find(">loss<") != std::string::npos);
  CHECK(svg.find(">accuracy<") != std::string::npos);
  CHECK(svg.find("lr-changes") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  CHECK(svg.find("<svg") == 0);

  // byte-determinism of the renderer
  CHECK(render_history_svg(rows) == svg);
  CHECK_THROWS_AS(render_history_svg({}), Error);
}
