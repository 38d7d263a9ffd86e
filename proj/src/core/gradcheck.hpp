#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace scnn {

// Central finite differences against analytic gradients, f64 only. `eval`
// must recompute the scalar output from the current tensor contents (it is
// called twice per perturbed element); `targets` pairs each tensor with the
// analytic gradient claimed for it. Returns the worst relative error
// |a - n| / max(|a|, |n|, 1e-3); the floor keeps near-zero gradients from
// turning roundoff noise into spurious failures.
struct GradCheckTarget {
  Tensor<double>* value;
  const Tensor<double>* analytic;
};

double grad_check(const std::function<double()>& eval, const std::vector<GradCheckTarget>& targets,
                  double h = 1e-5);

// One entry per layer type plus the composed tiny network.
struct GradCheckResult {
  std::string layer;
  double max_rel_err{0};
  double tolerance{1e-4};
  bool pass() const { return max_rel_err <= tolerance; }
};

// Finite-difference suite over every layer type and the tiny whole-network
// preset, across `seeds` random draws. `fault_layer` (normally empty) makes
// the named layer report a corrupted analytic gradient; it exists so the
// failure path of the gradcheck command can be driven from tests.
std::vector<GradCheckResult> run_gradcheck_suite(uint64_t seed, int seeds = 5,
                                                 const std::string& fault_layer = {});

} // namespace scnn
