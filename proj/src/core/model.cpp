#include "core/model.hpp"

#include <json.hpp>

namespace scnn {

using nlohmann::json;

LayerDesc LayerDesc::Conv(int64_t oc, bool bn, double drop) {
  LayerDesc d;
  d.kind = LayerKind::conv;
  d.out_channels = oc;
  d.batchnorm = bn;
  d.conv_dropout = drop;
  return d;
}

LayerDesc LayerDesc::MaxPool() {
  LayerDesc d;
  d.kind = LayerKind::maxpool;
  return d;
}

LayerDesc LayerDesc::AdaptiveAvgPool(int64_t h, int64_t w) {
  LayerDesc d;
  d.kind = LayerKind::adaptive_avgpool;
  d.out_h = h;
  d.out_w = w;
  return d;
}

LayerDesc LayerDesc::Dropout(double p) {
  LayerDesc d;
  d.kind = LayerKind::dropout;
  d.p = p;
  return d;
}

LayerDesc LayerDesc::Dense(int64_t out) {
  LayerDesc d;
  d.kind = LayerKind::dense;
  d.out_features = out;
  return d;
}

std::vector<TraceEntry> trace_shapes(const ModelSpec& spec) {
  if (spec.in_channels < 1 || spec.in_h < 1 || spec.in_w < 1)
    raise(ErrorCode::shape, "model: input shape must be positive");
  if (spec.classes < 2) raise(ErrorCode::config, "model: need at least 2 classes");
  if (spec.layers.empty()) raise(ErrorCode::config, "model: layer list is empty");

  std::vector<TraceEntry> trace;
  bool flat = false;
  int64_t c = spec.in_channels, h = spec.in_h, w = spec.in_w, f = 0;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerDesc& d = spec.layers[i];
    const std::string where = "layer " + std::to_string(i);
    switch (d.kind) {
      case LayerKind::conv:
        if (flat) raise(ErrorCode::shape, "model: " + where + ": conv after flatten");
        if (d.out_channels < 1) raise(ErrorCode::config, "model: " + where + ": conv needs out_channels >= 1");
        if (d.conv_dropout < 0 || d.conv_dropout >= 1)
          raise(ErrorCode::config, "model: " + where + ": conv dropout must be in [0, 1)");
        c = d.out_channels;
        break;
      case LayerKind::maxpool:
        if (flat) raise(ErrorCode::shape, "model: " + where + ": maxpool after flatten");
        if (h < 2 || w < 2)
          raise(ErrorCode::shape, "model: " + where + ": maxpool input " + std::to_string(h) + "x" +
                                      std::to_string(w) + " is below the 2x2 window");
        h /= 2;
        w /= 2;
        break;
      case LayerKind::adaptive_avgpool:
        if (flat) raise(ErrorCode::shape, "model: " + where + ": adaptive_avgpool after flatten");
        if (d.out_h < 1 || d.out_w < 1)
          raise(ErrorCode::config, "model: " + where + ": adaptive_avgpool output must be >= 1");
        h = d.out_h;
        w = d.out_w;
        break;
      case LayerKind::dropout:
        if (d.p < 0 || d.p >= 1) raise(ErrorCode::config, "model: " + where + ": dropout p must be in [0, 1)");
        break;
      case LayerKind::dense:
        if (d.out_features < 1) raise(ErrorCode::config, "model: " + where + ": dense needs out_features >= 1");
        if (!flat) {
          f = c * h * w;
          flat = true;
        }
        f = d.out_features;
        break;
    }
    TraceEntry e;
    e.layer = i;
    e.kind = d.kind;
    e.flat = flat;
    e.c = c;
    e.h = h;
    e.w = w;
    e.f = f;
    trace.push_back(e);
  }
  return trace;
}

void validate_spec(const ModelSpec& spec) {
  trace_shapes(spec);
  if (spec.layers.back().kind != LayerKind::dense ||
      spec.layers.back().out_features != spec.classes)
    raise(ErrorCode::config, "model: the final layer must be a dense layer with one output per class");
  size_t output_denses = 0, adapt = 0;
  bool seen_adapt = false;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerDesc& d = spec.layers[i];
    if (d.kind == LayerKind::dense && d.out_features == spec.classes) ++output_denses;
    if (d.kind == LayerKind::adaptive_avgpool) {
      ++adapt;
      seen_adapt = true;
    }
    if (d.kind == LayerKind::conv && seen_adapt)
      raise(ErrorCode::config, "model: conv layers must precede the adaptive average pool");
  }
  if (output_denses != 1)
    raise(ErrorCode::config, "model: exactly one dense layer may have out_features == classes");
  if (adapt > 1) raise(ErrorCode::config, "model: at most one adaptive_avgpool allowed");
}

std::vector<ParamCount> param_breakdown(const ModelSpec& spec) {
  validate_spec(spec);
  std::vector<ParamCount> out;
  int64_t cin = spec.in_channels, f_in = 0;
  bool flat = false;
  int64_t h = spec.in_h, w = spec.in_w;
  int conv_idx = 0, dense_idx = 0;
  for (const LayerDesc& d : spec.layers) {
    switch (d.kind) {
      case LayerKind::conv: {
        ++conv_idx;
        out.push_back({"conv" + std::to_string(conv_idx), (9 * cin + 1) * d.out_channels});
        if (d.batchnorm) out.push_back({"bn" + std::to_string(conv_idx), 2 * d.out_channels});
        cin = d.out_channels;
        break;
      }
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
      case LayerKind::dense: {
        if (!flat) {
          f_in = cin * h * w;
          flat = true;
        }
        ++dense_idx;
        out.push_back({"fc" + std::to_string(dense_idx), (f_in + 1) * d.out_features});
        f_in = d.out_features;
        break;
      }
    }
  }
  return out;
}

int64_t count_params(const ModelSpec& spec) {
  int64_t total = 0;
  for (const ParamCount& p : param_breakdown(spec)) total += p.count;
  return total;
}

ModelSpec preset_proposed(int64_t pool_h, int64_t pool_w, bool with_batchnorm, bool conv_dropout) {
  ModelSpec spec;
  spec.in_channels = 3;
  spec.in_h = spec.in_w = 224;
  spec.classes = 11;
  const int64_t channels[6] = {16, 32, 32, 64, 128, 128};
  for (int block = 0; block < 6; ++block) {
    spec.layers.push_back(LayerDesc::Conv(channels[block], with_batchnorm));
    spec.layers.push_back(LayerDesc::MaxPool());
    if (conv_dropout && block % 2 == 1) spec.layers.push_back(LayerDesc::Dropout(0.2));
  }
  spec.layers.push_back(LayerDesc::AdaptiveAvgPool(pool_h, pool_w));
  spec.layers.push_back(LayerDesc::Dropout(0.2));
  spec.layers.push_back(LayerDesc::Dense(11));
  validate_spec(spec);
  return spec;
}

ModelSpec preset_vgg16() {
  ModelSpec spec;
  spec.in_channels = 3;
  spec.in_h = spec.in_w = 224;
  spec.classes = 1000;
  const std::vector<std::vector<int64_t>> stages = {
      {64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
  for (const auto& stage : stages) {
    for (int64_t ch : stage) spec.layers.push_back(LayerDesc::Conv(ch, false));
    spec.layers.push_back(LayerDesc::MaxPool());
  }
  spec.layers.push_back(LayerDesc::AdaptiveAvgPool(7, 7));
  spec.layers.push_back(LayerDesc::Dense(4096));
  spec.layers.push_back(LayerDesc::Dropout(0.5));
  spec.layers.push_back(LayerDesc::Dense(4096));
  spec.layers.push_back(LayerDesc::Dropout(0.5));
  spec.layers.push_back(LayerDesc::Dense(1000));
  validate_spec(spec);
  return spec;
}

ModelSpec preset_proposed_tiny() {
  ModelSpec spec;
  spec.in_channels = 3;
  spec.in_h = spec.in_w = 8;
  spec.classes = 2;
  spec.layers.push_back(LayerDesc::Conv(2, true));
  spec.layers.push_back(LayerDesc::MaxPool());
  spec.layers.push_back(LayerDesc::Conv(2, true));
  spec.layers.push_back(LayerDesc::MaxPool());
  spec.layers.push_back(LayerDesc::Dropout(0.2));
  spec.layers.push_back(LayerDesc::AdaptiveAvgPool(2, 2));
  spec.layers.push_back(LayerDesc::Dropout(0.2));
  spec.layers.push_back(LayerDesc::Dense(2));
  validate_spec(spec);
  return spec;
}

ModelSpec preset_by_name(const std::string& name, int64_t pool_h, int64_t pool_w, bool with_batchnorm,
                         bool conv_dropout) {
  if (name == "proposed") return preset_proposed(pool_h, pool_w, with_batchnorm, conv_dropout);
  if (name == "vgg16") return preset_vgg16();
  if (name == "proposed-tiny") return preset_proposed_tiny();
  raise(ErrorCode::config, "unknown model preset '" + name + "' (known: proposed, vgg16, proposed-tiny)");
}

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) raise(ErrorCode::config, where + ": unknown key '" + it.key() + "'");
  }
}

} // namespace

std::string spec_to_json(const ModelSpec& spec) {
  json layers = json::array();
  for (const LayerDesc& d : spec.layers) {
    json l;
    switch (d.kind) {
      case LayerKind::conv:
        l["kind"] = "conv";
        l["out_channels"] = d.out_channels;
        l["batchnorm"] = d.batchnorm;
        if (d.conv_dropout > 0) l["dropout"] = d.conv_dropout;
        break;
      case LayerKind::maxpool:
        l["kind"] = "maxpool";
        break;
      case LayerKind::adaptive_avgpool:
        l["kind"] = "adaptive_avgpool";
        l["out"] = {d.out_h, d.out_w};
        break;
      case LayerKind::dropout:
        l["kind"] = "dropout";
        l["p"] = d.p;
        break;
      case LayerKind::dense:
        l["kind"] = "dense";
        l["out_features"] = d.out_features;
        break;
    }
    layers.push_back(std::move(l));
  }
  json j;
  j["input"] = {spec.in_channels, spec.in_h, spec.in_w};
  j["classes"] = spec.classes;
  j["layers"] = std::move(layers);
  return j.dump(2);
}

ModelSpec spec_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) raise(ErrorCode::config, "model spec: malformed JSON");
  if (!j.is_object()) raise(ErrorCode::config, "model spec: top level must be an object");
  check_keys(j, {"input", "classes", "layers"}, "model spec");
  ModelSpec spec;
  if (!j.contains("input") || !j["input"].is_array() || j["input"].size() != 3)
    raise(ErrorCode::config, "model spec: 'input' must be [channels, height, width]");
  spec.in_channels = j["input"][0].get<int64_t>();
  spec.in_h = j["input"][1].get<int64_t>();
  spec.in_w = j["input"][2].get<int64_t>();
  if (!j.contains("classes")) raise(ErrorCode::config, "model spec: missing 'classes'");
  spec.classes = j["classes"].get<int64_t>();
  if (!j.contains("layers") || !j["layers"].is_array())
    raise(ErrorCode::config, "model spec: 'layers' must be an array");
  for (const json& l : j["layers"]) {
    if (!l.is_object() || !l.contains("kind")) raise(ErrorCode::config, "model spec: each layer needs a 'kind'");
    const std::string kind = l["kind"].get<std::string>();
    if (kind == "conv") {
      check_keys(l, {"kind", "out_channels", "batchnorm", "dropout"}, "conv layer");
      spec.layers.push_back(LayerDesc::Conv(l.value("out_channels", int64_t{0}), l.value("batchnorm", false),
                                            l.value("dropout", 0.0)));
    } else if (kind == "maxpool") {
      check_keys(l, {"kind"}, "maxpool layer");
      spec.layers.push_back(LayerDesc::MaxPool());
    } else if (kind == "adaptive_avgpool") {
      check_keys(l, {"kind", "out"}, "adaptive_avgpool layer");
      if (!l.contains("out") || !l["out"].is_array() || l["out"].size() != 2)
        raise(ErrorCode::config, "adaptive_avgpool layer: 'out' must be [h, w]");
      spec.layers.push_back(LayerDesc::AdaptiveAvgPool(l["out"][0].get<int64_t>(), l["out"][1].get<int64_t>()));
    } else if (kind == "dropout") {
      check_keys(l, {"kind", "p"}, "dropout layer");
      if (!l.contains("p")) raise(ErrorCode::config, "dropout layer: missing 'p'");
      spec.layers.push_back(LayerDesc::Dropout(l["p"].get<double>()));
    } else if (kind == "dense") {
      check_keys(l, {"kind", "out_features"}, "dense layer");
      if (!l.contains("out_features")) raise(ErrorCode::config, "dense layer: missing 'out_features'");
      spec.layers.push_back(LayerDesc::Dense(l["out_features"].get<int64_t>()));
    } else {
      raise(ErrorCode::config, "model spec: unknown layer kind '" + kind + "'");
    }
  }
  validate_spec(spec);
  return spec;
}

} // namespace scnn
