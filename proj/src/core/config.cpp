#include "core/config.hpp"

#include <filesystem>
#include <json.hpp>

#include "core/io.hpp"

namespace scnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) raise(ErrorCode::config, where + ": unknown key '" + it.key() + "'");
  }
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

double require_number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) raise(ErrorCode::config, where + ": missing '" + std::string(key) + "'");
  if (!obj[key].is_number()) raise(ErrorCode::config, where + ": '" + std::string(key) + "' must be a number");
  return obj[key].get<double>();
}

ModelSpec parse_model(const json& m, const std::string& base_dir) {
  if (!m.is_object()) raise(ErrorCode::config, "config: 'model' must be an object");
  check_keys(m, {"preset", "pool_out", "batchnorm", "conv_dropout", "spec_file"}, "config model");
  if (m.contains("spec_file")) {
    if (m.contains("preset")) raise(ErrorCode::config, "config model: 'preset' and 'spec_file' are exclusive");
    return spec_from_json(read_text_file(resolve(base_dir, m["spec_file"].get<std::string>())));
  }
  if (!m.contains("preset")) raise(ErrorCode::config, "config model: need 'preset' or 'spec_file'");
  int64_t pool_h = 5, pool_w = 5;
  if (m.contains("pool_out")) {
    if (!m["pool_out"].is_array() || m["pool_out"].size() != 2)
      raise(ErrorCode::config, "config model: 'pool_out' must be [h, w]");
    pool_h = m["pool_out"][0].get<int64_t>();
    pool_w = m["pool_out"][1].get<int64_t>();
  }
  return preset_by_name(m["preset"].get<std::string>(), pool_h, pool_w, m.value("batchnorm", true),
                        m.value("conv_dropout", true));
}

OptimizerConfig parse_optimizer(const json& o) {
  if (!o.is_object()) raise(ErrorCode::config, "config: 'optimizer' must be an object");
  if (!o.contains("kind")) raise(ErrorCode::config, "config optimizer: missing 'kind'");
  const OptKind kind = opt_kind_from_name(o["kind"].get<std::string>());
  OptimizerConfig cfg = default_optimizer_config(kind);
  const std::string where = std::string("config optimizer (") + opt_kind_name(kind) + ")";

  auto betas = [&](const json& obj) {
    if (!obj["betas"].is_array() || obj["betas"].size() != 2)
      raise(ErrorCode::config, where + ": 'betas' must be [beta1, beta2]");
    cfg.beta1 = obj["betas"][0].get<double>();
    cfg.beta2 = obj["betas"][1].get<double>();
  };

  switch (kind) {
    case OptKind::sgd:
      check_keys(o, {"kind", "momentum", "weight_decay"}, where);
      if (o.contains("momentum")) cfg.momentum = o["momentum"].get<double>();
      break;
    case OptKind::asgd:
      check_keys(o, {"kind", "lambd", "alpha", "t0", "weight_decay"}, where);
      if (o.contains("lambd")) cfg.lambd = o["lambd"].get<double>();
      if (o.contains("alpha")) cfg.alpha = o["alpha"].get<double>();
      if (o.contains("t0")) cfg.t0 = o["t0"].get<double>();
      break;
    case OptKind::adadelta:
      check_keys(o, {"kind", "rho", "eps", "weight_decay"}, where);
      if (o.contains("rho")) cfg.rho = o["rho"].get<double>();
      if (o.contains("eps")) cfg.eps = o["eps"].get<double>();
      break;
    case OptKind::adagrad:
      check_keys(o, {"kind", "eps", "lr_decay", "initial_accumulator_value", "weight_decay"}, where);
      if (o.contains("eps")) cfg.eps = o["eps"].get<double>();
      if (o.contains("lr_decay")) cfg.lr_decay = o["lr_decay"].get<double>();
      if (o.contains("initial_accumulator_value"))
        cfg.initial_accumulator = o["initial_accumulator_value"].get<double>();
      break;
    case OptKind::adam:
      check_keys(o, {"kind", "betas", "eps", "weight_decay"}, where);
      if (o.contains("betas")) betas(o);
      if (o.contains("eps")) cfg.eps = o["eps"].get<double>();
      break;
    case OptKind::adamax:
      check_keys(o, {"kind", "betas", "eps", "weight_decay"}, where);
      if (o.contains("betas")) betas(o);
      if (o.contains("eps")) cfg.eps = o["eps"].get<double>();
      break;
    case OptKind::adamw:
      check_keys(o, {"kind", "betas", "eps", "weight_decay", "amsgrad"}, where);
      if (o.contains("betas")) betas(o);
      if (o.contains("eps")) cfg.eps = o["eps"].get<double>();
      if (o.value("amsgrad", false)) raise(ErrorCode::config, where + ": amsgrad is not supported");
      break;
    case OptKind::rmsprop:
      check_keys(o, {"kind", "alpha", "eps", "momentum", "centered", "weight_decay"}, where);
      if (o.contains("alpha")) cfg.alpha = o["alpha"].get<double>();
      if (o.contains("eps")) cfg.eps = o["eps"].get<double>();
      if (o.value("momentum", 0.0) != 0.0)
        raise(ErrorCode::config, where + ": nonzero momentum is not supported");
      if (o.value("centered", false)) raise(ErrorCode::config, where + ": centered is not supported");
      break;
  }
  if (o.contains("weight_decay")) cfg.weight_decay = o["weight_decay"].get<double>();
  validate_optimizer_config(cfg);
  return cfg;
}

LrSchedule parse_schedule(const json& s) {
  if (!s.is_object()) raise(ErrorCode::config, "config: 'schedule' must be an object");
  if (!s.contains("kind")) raise(ErrorCode::config, "config schedule: missing 'kind'");
  const std::string kind = s["kind"].get<std::string>();
  if (kind == "constant") {
    check_keys(s, {"kind", "lr"}, "config schedule");
    return LrSchedule::constant_rate(require_number(s, "lr", "config schedule"));
  }
  if (kind != "table") raise(ErrorCode::config, "config schedule: unknown kind '" + kind + "'");
  check_keys(s, {"kind", "rows", "after"}, "config schedule");
  if (!s.contains("rows")) return LrSchedule::table_preset();
  if (!s["rows"].is_array() || !s.contains("after"))
    raise(ErrorCode::config, "config schedule: custom table needs 'rows' and 'after'");
  std::vector<LrSchedule::Row> rows;
  for (const json& r : s["rows"]) {
    if (!r.is_array() || r.size() != 2)
      raise(ErrorCode::config, "config schedule: each row must be [last_epoch, lr]");
    rows.push_back({r[0].get<int64_t>(), r[1].get<double>()});
  }
  return LrSchedule::table(std::move(rows), s["after"].get<double>());
}

AugConfig parse_augment(const json& a, bool* enabled) {
  if (!a.is_object()) raise(ErrorCode::config, "config: 'augment' must be an object");
  check_keys(a,
             {"enabled", "hflip_p", "vflip_p", "brightness", "contrast", "saturation", "hue", "rotate_deg",
              "translate", "shear_deg", "blur", "blur_kernel", "blur_sigma"},
             "config augment");
  AugConfig cfg;
  *enabled = a.value("enabled", true);
  cfg.hflip_p = a.value("hflip_p", cfg.hflip_p);
  cfg.vflip_p = a.value("vflip_p", cfg.vflip_p);
  cfg.brightness = a.value("brightness", cfg.brightness);
  cfg.contrast = a.value("contrast", cfg.contrast);
  cfg.saturation = a.value("saturation", cfg.saturation);
  cfg.hue = a.value("hue", cfg.hue);
  cfg.rotate_deg = a.value("rotate_deg", cfg.rotate_deg);
  cfg.translate = a.value("translate", cfg.translate);
  cfg.shear_deg = a.value("shear_deg", cfg.shear_deg);
  cfg.blur = a.value("blur", cfg.blur);
  cfg.blur_kernel = a.value("blur_kernel", cfg.blur_kernel);
  if (a.contains("blur_sigma")) {
    if (!a["blur_sigma"].is_array() || a["blur_sigma"].size() != 2)
      raise(ErrorCode::config, "config augment: 'blur_sigma' must be [min, max]");
    cfg.blur_sigma_min = a["blur_sigma"][0].get<float>();
    cfg.blur_sigma_max = a["blur_sigma"][1].get<float>();
  }
  for (float p : {cfg.hflip_p, cfg.vflip_p})
    if (p < 0.0f || p > 1.0f) raise(ErrorCode::config, "config augment: probabilities must be in [0, 1]");
  if (cfg.blur_kernel < 1 || cfg.blur_kernel % 2 == 0)
    raise(ErrorCode::config, "config augment: blur_kernel must be odd and >= 1");
  if (cfg.blur && (!(cfg.blur_sigma_min > 0) || cfg.blur_sigma_max < cfg.blur_sigma_min))
    raise(ErrorCode::config, "config augment: blur_sigma range must satisfy 0 < min <= max");
  return cfg;
}

} // namespace

TrainConfig parse_run_config(const std::string& text, const std::string& base_dir,
                             const std::string& override_out, const int64_t* override_seed) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) raise(ErrorCode::config, "config: malformed JSON");
  if (!j.is_object()) raise(ErrorCode::config, "config: top level must be an object");
  check_keys(j,
             {"model", "optimizer", "schedule", "batch_size", "max_epochs", "patience", "seed", "data_root",
              "stats", "out_dir", "augment", "timing"},
             "config");

  TrainConfig cfg;
  if (!j.contains("model")) raise(ErrorCode::config, "config: missing 'model'");
  cfg.spec = parse_model(j["model"], base_dir);
  if (j.contains("optimizer")) cfg.optimizer = parse_optimizer(j["optimizer"]);
  if (j.contains("schedule")) cfg.schedule = parse_schedule(j["schedule"]);
  cfg.batch_size = j.value("batch_size", int64_t{32});
  cfg.max_epochs = j.value("max_epochs", int64_t{150});
  cfg.patience = j.value("patience", int64_t{20});
  cfg.seed = j.value("seed", uint64_t{0});
  if (!j.contains("data_root")) raise(ErrorCode::config, "config: missing 'data_root'");
  cfg.data_root = resolve(base_dir, j["data_root"].get<std::string>());

  if (j.contains("stats")) {
    const json& s = j["stats"];
    if (s.is_string()) {
      if (s.get<std::string>() != "compute")
        raise(ErrorCode::config, "config stats: the only string form is \"compute\"");
    } else if (s.is_object() && s.contains("file")) {
      check_keys(s, {"file"}, "config stats");
      cfg.stats_override = stats_from_json(read_text_file(resolve(base_dir, s["file"].get<std::string>())));
    } else if (s.is_object()) {
      cfg.stats_override = stats_from_json(s.dump());
    } else {
      raise(ErrorCode::config, "config stats: expected \"compute\", {file}, or {mean, std}");
    }
  }

  if (!override_out.empty())
    cfg.out_dir = override_out;
  else if (j.contains("out_dir"))
    cfg.out_dir = resolve(base_dir, j["out_dir"].get<std::string>());
  else
    raise(ErrorCode::config, "config: missing 'out_dir' (or pass --out)");

  if (override_seed) cfg.seed = static_cast<uint64_t>(*override_seed);

  if (j.contains("augment")) cfg.aug = parse_augment(j["augment"], &cfg.augment_enabled);

  if (j.contains("timing")) {
    const std::string t = j["timing"].get<std::string>();
    if (t == "wall")
      cfg.record_timing = true;
    else if (t == "none")
      cfg.record_timing = false;
    else
      raise(ErrorCode::config, "config: 'timing' must be \"wall\" or \"none\"");
  }

  validate_train_config(cfg);
  return cfg;
}

TrainConfig load_run_config(const std::string& path, const std::string& override_out,
                            const int64_t* override_seed) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    raise(ErrorCode::config, e.what());
  }
  return parse_run_config(text, fs::path(path).parent_path().string(), override_out, override_seed);
}

} // namespace scnn
