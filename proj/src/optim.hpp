#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "core/tape.hpp"
#include "core/tensor.hpp"
#include "model.hpp"

namespace aepnet {

/// lr0 * (1 - iter/max_iter)^power. Exact lr0 at iter 0, exact 0 at max_iter.
double poly_lr(int iter, int max_iter, double lr0, double power);

/// Adam accumulators mirroring the parameter set they were built from.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step = 0;
  std::map<std::string, Tensor> m, v;
};

AdamState make_adam_state(const ParamTensors& params);

/// One bias-corrected Adam update, in place. Every parameter must have a
/// gradient of its own shape in `grads`.
void adam_step(ParamTensors& params, const GradMap& grads, AdamState& state, double lr);

}  // namespace aepnet
