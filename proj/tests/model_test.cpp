#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "core/checkpoint.hpp"
#include "core/io.hpp"
#include "core/layers.hpp"
#include "core/model.hpp"
#include "core/model_graph.hpp"
#include "testutil.hpp"

using namespace scnn;

namespace {

// Independent counting oracle: walk the descriptor list with the closed-form
// per-layer formulas, tracking the flattened feature size by hand.
int64_t oracle_count(const ModelSpec& spec) {
  int64_t total = 0, cin = spec.in_channels, h = spec.in_h, w = spec.in_w;
  bool flat = false;
  int64_t f = 0;
  for (const LayerDesc& d : spec.layers) {
    switch (d.kind) {
      case LayerKind::conv:
        total += (3 * 3 * cin + 1) * d.out_channels;
        if (d.batchnorm) total += 2 * d.out_channels;
        cin = d.out_channels;
        break;
      case LayerKind::maxpool:
        h /= 2;
        w /= 2;
        break;
      case LayerKind::adaptive_avgpool:
        h = d.out_h;
        w = d.out_w;
        break;
      case LayerKind::dropout:
        break;
      case LayerKind::dense:
        if (!flat) {
          f = cin * h * w;
          flat = true;
        }
        total += (f + 1) * d.out_features;
        f = d.out_features;
        break;
    }
  }
  return total;
}

} // namespace

TEST_CASE("proposed preset counts 290283 parameters") {
  ModelSpec spec = preset_proposed();
  CHECK(count_params(spec) == 290283);
  CHECK(oracle_count(spec) == 290283);

  // per-layer breakdown against hand-computed values
  auto breakdown = param_breakdown(spec);
  int64_t conv_sum = 0, bn_sum = 0, fc_sum = 0;
  for (const auto& p : breakdown) {
    if (p.name.rfind("conv", 0) == 0) conv_sum += p.count;
    if (p.name.rfind("bn", 0) == 0) bn_sum += p.count;
    if (p.name.rfind("fc", 0) == 0) fc_sum += p.count;
  }
  CHECK(conv_sum == 254272);
  CHECK(bn_sum == 800);
  CHECK(fc_sum == 35211);
  CHECK(breakdown.front().name == "conv1");
  CHECK(breakdown.front().count == 448); // (9*3+1)*16

  // the instantiated graph carries exactly as many scalars
  ModelGraph<float> graph(spec, 1);
  CHECK(graph.param_count() == 290283);
}

TEST_CASE("preset variants recount correctly") {
  CHECK(count_params(preset_proposed(5, 5, /*bn=*/false)) == 290283 - 800);
  // pool 7x7: dense input 128*49
  ModelSpec p7 = preset_proposed(7, 7);
  CHECK(count_params(p7) == oracle_count(p7));
  CHECK(count_params(p7) == 254272 + 800 + (128 * 49 + 1) * 11);
  ModelSpec p3 = preset_proposed(3, 3);
  CHECK(count_params(p3) == 254272 + 800 + (128 * 9 + 1) * 11);
  // dropout placement carries no parameters
  CHECK(count_params(preset_proposed(5, 5, true, /*conv_dropout=*/false)) == 290283);
}

TEST_CASE("channel and spatial trace of the proposed preset") {
  ModelSpec spec = preset_proposed();
  auto trace = trace_shapes(spec);
  std::vector<int64_t> channels, spatial;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::conv) channels.push_back(trace[i].c);
    if (spec.layers[i].kind == LayerKind::maxpool) spatial.push_back(trace[i].h);
  }
  CHECK(channels == std::vector<int64_t>{16, 32, 32, 64, 128, 128});
  CHECK(spatial == std::vector<int64_t>{112, 56, 28, 14, 7, 3});
  // dense input after the 5x5 adaptive pool
  bool saw_dense = false;
  for (size_t i = 0; i < spec.layers.size(); ++i)
    if (spec.layers[i].kind == LayerKind::dense) {
      saw_dense = true;
      CHECK(trace[i - 1].c * trace[i - 1].h * trace[i - 1].w == 3200);
    }
  CHECK(saw_dense);
}

TEST_CASE("vgg16 preset is countable and matches the standard total") {
  ModelSpec vgg = preset_vgg16();
  CHECK_NOTHROW(validate_spec(vgg));
  CHECK(count_params(vgg) == 138357544);
  CHECK(oracle_count(vgg) == 138357544);
  CHECK(std::abs(static_cast<double>(count_params(vgg)) - 1.38e8) / 1.38e8 < 0.005);
  int convs = 0, pools = 0, denses = 0;
  for (const LayerDesc& d : vgg.layers) {
    convs += d.kind == LayerKind::conv;
    pools += d.kind == LayerKind::maxpool;
    denses += d.kind == LayerKind::dense;
  }
  CHECK(convs == 13);
  CHECK(pools == 5);
  CHECK(denses == 3);
}

TEST_CASE("spec validation rejects malformed layer lists") {
  ModelSpec spec = preset_proposed();
  spec.layers.pop_back(); // drop the output dense
  CHECK_THROWS_AS(validate_spec(spec), Error);

  ModelSpec two_adapt = preset_proposed();
  two_adapt.layers.insert(two_adapt.layers.begin() + 8, LayerDesc::AdaptiveAvgPool(3, 3));
  CHECK_THROWS_AS(validate_spec(two_adapt), Error);

  ModelSpec conv_after = preset_proposed();
  conv_after.layers.insert(conv_after.layers.end() - 1, LayerDesc::Conv(4, false));
  CHECK_THROWS_AS(validate_spec(conv_after), Error);

  // too small for six maxpools
  ModelSpec small = preset_proposed();
  small.in_h = small.in_w = 32;
  CHECK_THROWS_AS(trace_shapes(small), Error);
}

TEST_CASE("spec json round trip") {
  for (const ModelSpec& spec : {preset_proposed(), preset_vgg16(), preset_proposed_tiny()}) {
    ModelSpec back = spec_from_json(spec_to_json(spec));
    CHECK(back.in_channels == spec.in_channels);
    CHECK(back.in_h == spec.in_h);
    CHECK(back.classes == spec.classes);
    REQUIRE(back.layers.size() == spec.layers.size());
    CHECK(count_params(back) == count_params(spec));
  }
  CHECK_THROWS_AS(spec_from_json("{\"inpt\": [3,224,224]}"), Error);
  CHECK_THROWS_AS(spec_from_json("not json"), Error);
}

TEST_CASE("zero input with batchnorm off gives uniform logits and ln(11) loss") {
  ModelSpec spec = preset_proposed(5, 5, /*bn=*/false, /*conv_dropout=*/false);
  ModelGraph<float> graph(spec, 7);
  // zero out every parameter: logits must be exactly the zero bias row
  for (auto& p : graph.params())
    for (int64_t i = 0; i < p.tensor->numel(); ++i) (*p.tensor)[i] = 0.0f;
  Tensor<float> x({1, 3, 224, 224});
  Tensor<float> logits = graph.forward(x, Mode::eval);
  for (int64_t i = 0; i < logits.numel(); ++i) CHECK(logits[i] == 0.0f);
  SoftmaxLoss<float> sl = softmax_cross_entropy(logits, {4});
  CHECK(sl.loss == doctest::Approx(std::log(11.0)).epsilon(1e-6));
}

TEST_CASE("eval forward is pure and batch-size independent; train mode couples the batch") {
  ModelSpec spec = preset_proposed_tiny();
  ModelGraph<float> graph(spec, 21);
  Tensor<float> a = test::random_tensor<float>({1, 3, 8, 8}, 31);
  Tensor<float> b = test::random_tensor<float>({1, 3, 8, 8}, 32);

  Tensor<float> ya1 = graph.forward(a, Mode::eval);
  Tensor<float> ya2 = graph.forward(a, Mode::eval);
  CHECK(test::bit_equal(ya1, ya2));

  // eval N=2 equals the two N=1 forwards, bit-exact
  Tensor<float> ab({2, 3, 8, 8});
  std::copy(a.data(), a.data() + a.numel(), ab.data());
  std::copy(b.data(), b.data() + b.numel(), ab.data() + a.numel());
  Tensor<float> yb = graph.forward(b, Mode::eval);
  Tensor<float> yab = graph.forward(ab, Mode::eval);
  for (int64_t j = 0; j < 2; ++j) {
    CHECK(yab[j] == ya1[j]);
    CHECK(yab[2 + j] == yb[j]);
  }

  // train-mode batch statistics couple the samples
  ModelGraph<float> g1(spec, 21), g2(spec, 21);
  Tensor<float> t1 = g1.forward(a, Mode::train, 5);
  Tensor<float> t2 = g2.forward(ab, Mode::train, 5);
  bool differs = false;
  for (int64_t j = 0; j < 2; ++j) differs = differs || t1[j] != t2[j];
  CHECK(differs);
}

TEST_CASE("undersized input is a shape error") {
  ModelGraph<float> graph(preset_proposed(), 3);
  Tensor<float> x({1, 3, 32, 32});
  CHECK_THROWS_AS(graph.forward(x, Mode::eval), Error);
}

TEST_CASE("checkpoint round trip reproduces eval forward bit-exactly") {
  test::TempDir dir("ckpt");
  ModelGraph<float> graph(preset_proposed_tiny(), 17);
  // move off the init state: run a train step's worth of running-stat updates
  Tensor<float> warm = test::random_tensor<float>({4, 3, 8, 8}, 33);
  graph.forward(warm, Mode::train, 1);

  CheckpointMeta meta;
  meta.epoch = 12;
  meta.best_val_accuracy = 0.625;
  meta.seed = 17;
  const std::string path = dir.file("model.ckpt");
  save_checkpoint(graph, meta, path);

  LoadedCheckpoint loaded = load_checkpoint(path);
  CHECK(loaded.meta.epoch == 12);
  CHECK(loaded.meta.best_val_accuracy == doctest::Approx(0.625));
  CHECK(loaded.meta.seed == 17);

  Tensor<float> x = test::random_tensor<float>({2, 3, 8, 8}, 34);
  Tensor<float> y1 = graph.forward(x, Mode::eval);
  Tensor<float> y2 = loaded.graph.forward(x, Mode::eval);
  CHECK(test::bit_equal(y1, y2));

  // byte-identical re-save
  save_checkpoint(graph, meta, dir.file("again.ckpt"));
  CHECK(read_binary_file(path) == read_binary_file(dir.file("again.ckpt")));
}

TEST_CASE("checkpoint format errors: truncation, magic, version, trailing bytes") {
  test::TempDir dir("ckpt_err");
  ModelGraph<float> graph(preset_proposed_tiny(), 5);
  CheckpointMeta meta;
  const std::string path = dir.file("m.ckpt");
  save_checkpoint(graph, meta, path);
  std::vector<uint8_t> bytes = read_binary_file(path);

  // truncated at several byte positions
  for (size_t cut : {3ul, 5ul, 9ul, bytes.size() / 2, bytes.size() - 1}) {
    write_binary_file_atomic(dir.file("cut.ckpt"), bytes.data(), cut);
    CHECK_THROWS_AS(load_checkpoint(dir.file("cut.ckpt")), Error);
    try {
      load_checkpoint(dir.file("cut.ckpt"));
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::format);
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
  }

  // bad magic
  std::vector<uint8_t> bad = bytes;
  bad[0] = 'X';
  write_binary_file_atomic(dir.file("magic.ckpt"), bad.data(), bad.size());
  CHECK_THROWS_AS(load_checkpoint(dir.file("magic.ckpt")), Error);

  // unsupported version
  std::vector<uint8_t> ver = bytes;
  ver[4] = 0x63;
  write_binary_file_atomic(dir.file("ver.ckpt"), ver.data(), ver.size());
  try {
    load_checkpoint(dir.file("ver.ckpt"));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::format);
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  // trailing garbage
  std::vector<uint8_t> tail = bytes;
  tail.push_back(0);
  write_binary_file_atomic(dir.file("tail.ckpt"), tail.data(), tail.size());
  CHECK_THROWS_AS(load_checkpoint(dir.file("tail.ckpt")), Error);

  // missing file maps to a format error at the command surface
  CHECK_THROWS_AS(load_checkpoint(dir.file("absent.ckpt")), Error);
}

TEST_CASE("vgg16 forward on zeros produces finite logits") {
  ModelGraph<float> graph(preset_vgg16(), 1);
  Tensor<float> x({1, 3, 224, 224});
  Tensor<float> logits = graph.forward(x, Mode::eval);
  CHECK(logits.shape() == Shape{1, 1000});
  CHECK(logits.all_finite());
}
