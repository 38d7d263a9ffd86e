#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/tensor.hpp"

namespace scnn {

enum class OptKind { sgd, asgd, adadelta, adagrad, adam, adamax, adamw, rmsprop };

const char* opt_kind_name(OptKind kind);
OptKind opt_kind_from_name(const std::string& name);

// Hyperparameters for all eight rules; default_optimizer_config fills the
// per-kind defaults. Fields a kind does not use are ignored.
struct OptimizerConfig {
  OptKind kind{OptKind::sgd};
  double momentum{0};        // sgd
  double lambd{0};           // asgd decay term
  double alpha{0};           // asgd averaging power / rmsprop smoothing
  double t0{0};              // asgd averaging start
  double rho{0};             // adadelta smoothing
  double beta1{0}, beta2{0}; // adam family
  double eps{0};
  double weight_decay{0};
  double lr_decay{0};        // adagrad
  double initial_accumulator{0}; // adagrad
};

OptimizerConfig default_optimizer_config(OptKind kind);

// Domain checks (momentum/betas/rho/alpha in [0,1), eps > 0, ...); throws a
// config error naming the offending field.
void validate_optimizer_config(const OptimizerConfig& cfg);

// ---------------------------------------------------------------------------
// Per-parameter slot state plus one `step` applying the kind's update rule.
// The update equations are the standard published forms:
//
//   SGD      v <- mu v + g;                     w <- w - lr v
//   ASGD     w <- w(1 - lambd eta) - eta g with eta from the previous step
//            (eta_1 = lr, then eta <- lr/(1+lambd lr t)^alpha); averaged
//            weights copy w until t exceeds t0, then track with 1/(t-t0)
//   Adadelta E[g2] <- rho E[g2]+(1-rho)g2; d = g sqrt(E[d2]+eps)/sqrt(E[g2]+eps);
//            E[d2] <- rho E[d2]+(1-rho)d2;      w <- w - lr d
//   Adagrad  S <- S + g2;                       w <- w - lr' g/(sqrt(S)+eps),
//            lr' = lr/(1+(t-1) lr_decay)
//   Adam     m <- b1 m+(1-b1)g; v <- b2 v+(1-b2)g2;
//            w <- w - lr (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
//   Adamax   m as Adam; u <- max(b2 u, |g|+eps); w <- w - lr/(1-b1^t) m/u
//   AdamW    w <- w(1 - lr wd), then the Adam step (decay decoupled from g)
//   RMSprop  E[g2] <- a E[g2]+(1-a)g2;          w <- w - lr g/(sqrt(E[g2])+eps)
//
// Coupled weight decay (all kinds except AdamW) adds wd*w to the gradient
// before the rule. Slots are bound to the parameter shapes on the first step.
// ---------------------------------------------------------------------------
template <typename T>
class Optimizer {
public:
  Optimizer() = default;
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) { validate_optimizer_config(cfg_); }

  const OptimizerConfig& config() const { return cfg_; }
  int64_t step_count() const { return step_; }

  // ASGD's averaged weights; for every other kind this is the rule's first
  // slot (exposed for tests).
  const std::vector<Tensor<T>>& slot_a() const { return slot_a_; }

  void step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads, double lr) {
    if (params.size() != grads.size())
      raise(ErrorCode::shape, "optimizer step: parameter/gradient list size mismatch");
    if (!(lr > 0)) raise(ErrorCode::config, "optimizer step: learning rate must be > 0");
    bind(params);
    for (size_t i = 0; i < params.size(); ++i) {
      if (!params[i]->same_shape(slot_a_[i]))
        raise(ErrorCode::shape, "optimizer step: parameter " + std::to_string(i) +
                                    " shape changed since the slots were bound");
      if (!params[i]->same_shape(*grads[i]))
        raise(ErrorCode::shape, "optimizer step: gradient shape " + shape_str(grads[i]->shape()) +
                                    " does not match parameter " + shape_str(params[i]->shape()));
    }
    const int64_t t = ++step_;
    if (cfg_.kind == OptKind::asgd && t == 1) asgd_eta_ = lr;
    for (size_t i = 0; i < params.size(); ++i) apply(*params[i], *grads[i], i, lr, t);
    if (cfg_.kind == OptKind::asgd) {
      asgd_eta_ = lr / std::pow(1.0 + cfg_.lambd * lr * static_cast<double>(t), cfg_.alpha);
      asgd_mu_ = 1.0 / std::max(1.0, static_cast<double>(t) - cfg_.t0);
    }
  }

private:
  void bind(const std::vector<Tensor<T>*>& params) {
    if (bound_) {
      if (params.size() != slot_a_.size())
        raise(ErrorCode::shape, "optimizer step: parameter list size changed between steps");
      return;
    }
    const size_t n = params.size();
    slot_a_.resize(n);
    slot_b_.resize(n);
    for (size_t i = 0; i < n; ++i) {
      if (cfg_.kind == OptKind::asgd)
        slot_a_[i] = *params[i];
      else if (cfg_.kind == OptKind::adagrad && cfg_.initial_accumulator != 0)
        slot_a_[i] = Tensor<T>(params[i]->shape(), static_cast<T>(cfg_.initial_accumulator));
      else
        slot_a_[i] = Tensor<T>(params[i]->shape());
      slot_b_[i] = Tensor<T>(params[i]->shape());
    }
    bound_ = true;
  }

  void apply(Tensor<T>& w, const Tensor<T>& g, size_t slot, double lr, int64_t t) {
    Tensor<T>& a = slot_a_[slot];
    Tensor<T>& b = slot_b_[slot];
    const int64_t n = w.numel();
    const double wd = cfg_.weight_decay;
    switch (cfg_.kind) {
      case OptKind::sgd: {
        const double mu = cfg_.momentum;
        for (int64_t i = 0; i < n; ++i) {
          const double gi = static_cast<double>(g[i]) + wd * static_cast<double>(w[i]);
          const double v = mu * static_cast<double>(a[i]) + gi;
          a[i] = static_cast<T>(v);
          w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * v);
        }
        break;
      }
      case OptKind::asgd: {
        const double eta = asgd_eta_;
        const double mu = asgd_mu_;
        for (int64_t i = 0; i < n; ++i) {
          const double gi = static_cast<double>(g[i]) + wd * static_cast<double>(w[i]);
          const double wi = static_cast<double>(w[i]) * (1.0 - cfg_.lambd * eta) - eta * gi;
          w[i] = static_cast<T>(wi);
          if (mu == 1.0)
            a[i] = static_cast<T>(wi);
          else
            a[i] = static_cast<T>(static_cast<double>(a[i]) + mu * (wi - static_cast<double>(a[i])));
        }
        break;
      }
      case OptKind::adadelta: {
        const double rho = cfg_.rho, eps = cfg_.eps;
        for (int64_t i = 0; i < n; ++i) {
          const double gi = static_cast<double>(g[i]) + wd * static_cast<double>(w[i]);
          const double eg = rho * static_cast<double>(a[i]) + (1.0 - rho) * gi * gi;
          a[i] = static_cast<T>(eg);
          const double d = gi * std::sqrt(static_cast<double>(b[i]) + eps) / std::sqrt(eg + eps);
          b[i] = static_cast<T>(rho * static_cast<double>(b[i]) + (1.0 - rho) * d * d);
          w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * d);
        }
        break;
      }
      case OptKind::adagrad: {
        const double eps = cfg_.eps;
        const double clr = lr / (1.0 + static_cast<double>(t - 1) * cfg_.lr_decay);
        for (int64_t i = 0; i < n; ++i) {
          const double gi = static_cast<double>(g[i]) + wd * static_cast<double>(w[i]);
          const double s = static_cast<double>(a[i]) + gi * gi;
          a[i] = static_cast<T>(s);
          w[i] = static_cast<T>(static_cast<double>(w[i]) - clr * gi / (std::sqrt(s) + eps));
        }
        break;
      }
      case OptKind::adam:
      case OptKind::adamw: {
        const double b1 = cfg_.beta1, b2 = cfg_.beta2, eps = cfg_.eps;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
        const bool decoupled = cfg_.kind == OptKind::adamw;
        for (int64_t i = 0; i < n; ++i) {
          double wi = static_cast<double>(w[i]);
          double gi = static_cast<double>(g[i]);
          if (decoupled)
            wi *= 1.0 - lr * wd;
          else
            gi += wd * wi;
          const double m = b1 * static_cast<double>(a[i]) + (1.0 - b1) * gi;
          const double v = b2 * static_cast<double>(b[i]) + (1.0 - b2) * gi * gi;
          a[i] = static_cast<T>(m);
          b[i] = static_cast<T>(v);
          w[i] = static_cast<T>(wi - lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
        }
        break;
      }
      case OptKind::adamax: {
        const double b1 = cfg_.beta1, b2 = cfg_.beta2, eps = cfg_.eps;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
        for (int64_t i = 0; i < n; ++i) {
          const double gi = static_cast<double>(g[i]) + wd * static_cast<double>(w[i]);
          const double m = b1 * static_cast<double>(a[i]) + (1.0 - b1) * gi;
          const double u = std::max(b2 * static_cast<double>(b[i]), std::abs(gi) + eps);
          a[i] = static_cast<T>(m);
          b[i] = static_cast<T>(u);
          w[i] = static_cast<T>(static_cast<double>(w[i]) - (lr / bc1) * m / u);
        }
        break;
      }
      case OptKind::rmsprop: {
        const double al = cfg_.alpha, eps = cfg_.eps;
        for (int64_t i = 0; i < n; ++i) {
          const double gi = static_cast<double>(g[i]) + wd * static_cast<double>(w[i]);
          const double eg = al * static_cast<double>(a[i]) + (1.0 - al) * gi * gi;
          a[i] = static_cast<T>(eg);
          w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * gi / (std::sqrt(eg) + eps));
        }
        break;
      }
    }
  }

  OptimizerConfig cfg_;
  int64_t step_{0};
  bool bound_{false};
  // Slot meaning by kind:
  //   sgd: a = momentum buffer            asgd: a = averaged weights
  //   adadelta: a = E[g^2], b = E[d^2]    adagrad: a = accumulator
  //   adam/adamw: a = m, b = v            adamax: a = m, b = u
  //   rmsprop: a = E[g^2]
  std::vector<Tensor<T>> slot_a_, slot_b_;
  double asgd_eta_{0}, asgd_mu_{1};
};

// ---------------------------------------------------------------------------
// Piecewise-constant epoch -> learning-rate table, or a constant rate.
// The preset table: epochs <55 get 1e-3, 55-70 1e-4, 71-80 1e-5, 81-85 1e-6,
// 86-90 1e-7 and everything past 90 gets 1e-8. Rows match first in table
// order, inclusive of their stated bounds.
// ---------------------------------------------------------------------------
struct LrSchedule {
  struct Row {
    int64_t until_epoch; // row applies while epoch <= until_epoch
    double lr;
  };
  bool constant{false};
  double constant_lr{1e-3};
  std::vector<Row> rows;
  double after_lr{0};

  static LrSchedule table_preset();
  static LrSchedule constant_rate(double lr);
  static LrSchedule table(std::vector<Row> rows, double after_lr);
};

double lr_at_epoch(const LrSchedule& schedule, int64_t epoch);

} // namespace scnn
