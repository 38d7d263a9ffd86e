#include "core/optim.hpp"

namespace scnn {

const char* opt_kind_name(OptKind kind) {
  switch (kind) {
    case OptKind::sgd: return "sgd";
    case OptKind::asgd: return "asgd";
    case OptKind::adadelta: return "adadelta";
    case OptKind::adagrad: return "adagrad";
    case OptKind::adam: return "adam";
    case OptKind::adamax: return "adamax";
    case OptKind::adamw: return "adamw";
    case OptKind::rmsprop: return "rmsprop";
  }
  return "?";
}

OptKind opt_kind_from_name(const std::string& name) {
  for (OptKind k : {OptKind::sgd, OptKind::asgd, OptKind::adadelta, OptKind::adagrad, OptKind::adam,
                    OptKind::adamax, OptKind::adamw, OptKind::rmsprop})
    if (name == opt_kind_name(k)) return k;
  raise(ErrorCode::config, "unknown optimizer '" + name +
                               "' (known: sgd, asgd, adadelta, adagrad, adam, adamax, adamw, rmsprop)");
}

OptimizerConfig default_optimizer_config(OptKind kind) {
  OptimizerConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case OptKind::sgd:
      cfg.momentum = 0.9;
      break;
    case OptKind::asgd:
      cfg.lambd = 1e-4;
      cfg.alpha = 0.75;
      cfg.t0 = 1e6;
      break;
    case OptKind::adadelta:
      cfg.rho = 0.9;
      cfg.eps = 1e-6;
      break;
    case OptKind::adagrad:
      cfg.eps = 1e-10;
      cfg.lr_decay = 0;
      break;
    case OptKind::adam:
      cfg.beta1 = 0.9;
      cfg.beta2 = 0.999;
      cfg.eps = 1e-8;
      break;
    case OptKind::adamax:
      cfg.beta1 = 0.9;
      cfg.beta2 = 0.999;
      cfg.eps = 1e-8;
      break;
    case OptKind::adamw:
      cfg.beta1 = 0.9;
      cfg.beta2 = 0.999;
      cfg.eps = 1e-8;
      cfg.weight_decay = 0.01;
      break;
    case OptKind::rmsprop:
      cfg.alpha = 0.99;
      cfg.eps = 1e-8;
      break;
  }
  return cfg;
}

namespace {

void check_in(const char* name, double v, double lo, double hi, bool open_hi = true) {
  const bool ok = v >= lo && (open_hi ? v < hi : v <= hi);
  if (!ok)
    raise(ErrorCode::config, std::string("optimizer: ") + name + "=" + std::to_string(v) +
                                 " is outside its domain");
}

} // namespace

void validate_optimizer_config(const OptimizerConfig& cfg) {
  if (cfg.weight_decay < 0) raise(ErrorCode::config, "optimizer: weight_decay must be >= 0");
  switch (cfg.kind) {
    case OptKind::sgd:
      check_in("momentum", cfg.momentum, 0, 1);
      break;
    case OptKind::asgd:
      if (cfg.lambd < 0) raise(ErrorCode::config, "optimizer: lambd must be >= 0");
      check_in("alpha", cfg.alpha, 0, 1, false);
      if (cfg.t0 < 1) raise(ErrorCode::config, "optimizer: t0 must be >= 1");
      break;
    case OptKind::adadelta:
      check_in("rho", cfg.rho, 0, 1);
      if (!(cfg.eps > 0)) raise(ErrorCode::config, "optimizer: eps must be > 0");
      break;
    case OptKind::adagrad:
      if (!(cfg.eps > 0)) raise(ErrorCode::config, "optimizer: eps must be > 0");
      if (cfg.lr_decay < 0) raise(ErrorCode::config, "optimizer: lr_decay must be >= 0");
      if (cfg.initial_accumulator < 0)
        raise(ErrorCode::config, "optimizer: initial_accumulator_value must be >= 0");
      break;
    case OptKind::adam:
    case OptKind::adamax:
    case OptKind::adamw:
      check_in("beta1", cfg.beta1, 0, 1);
      check_in("beta2", cfg.beta2, 0, 1);
      if (!(cfg.eps > 0)) raise(ErrorCode::config, "optimizer: eps must be > 0");
      break;
    case OptKind::rmsprop:
      check_in("alpha", cfg.alpha, 0, 1);
      if (!(cfg.eps > 0)) raise(ErrorCode::config, "optimizer: eps must be > 0");
      break;
  }
}

LrSchedule LrSchedule::table_preset() {
  LrSchedule s;
  s.rows = {{54, 1e-3}, {70, 1e-4}, {80, 1e-5}, {85, 1e-6}, {90, 1e-7}};
  s.after_lr = 1e-8;
  return s;
}

LrSchedule LrSchedule::constant_rate(double lr) {
  if (!(lr > 0)) raise(ErrorCode::config, "schedule: constant learning rate must be > 0");
  LrSchedule s;
  s.constant = true;
  s.constant_lr = lr;
  return s;
}

LrSchedule LrSchedule::table(std::vector<Row> rows, double after_lr) {
  LrSchedule s;
  s.rows = std::move(rows);
  s.after_lr = after_lr;
  if (s.rows.empty()) raise(ErrorCode::config, "schedule: table needs at least one row");
  for (size_t i = 0; i < s.rows.size(); ++i) {
    if (!(s.rows[i].lr > 0)) raise(ErrorCode::config, "schedule: learning rates must be > 0");
    if (i > 0 && s.rows[i].until_epoch <= s.rows[i - 1].until_epoch)
      raise(ErrorCode::config, "schedule: epoch thresholds must be strictly increasing");
  }
  if (!(after_lr > 0)) raise(ErrorCode::config, "schedule: learning rates must be > 0");
  return s;
}

double lr_at_epoch(const LrSchedule& schedule, int64_t epoch) {
  if (epoch < 1) raise(ErrorCode::config, "lr_at_epoch: epochs are 1-based");
  if (schedule.constant) return schedule.constant_lr;
  for (const LrSchedule::Row& row : schedule.rows)
    if (epoch <= row.until_epoch) return row.lr;
  return schedule.after_lr;
}

} // namespace scnn
