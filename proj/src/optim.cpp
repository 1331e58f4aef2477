#include "optim.hpp"

#include <cmath>
#include <stdexcept>

namespace aepnet {

double poly_lr(int iter, int max_iter, double lr0, double power) {
  if (max_iter < 1) throw std::invalid_argument("poly_lr: max_iter must be >= 1");
  if (lr0 <= 0.0) throw std::invalid_argument("poly_lr: lr0 must be positive");
  if (iter < 0 || iter > max_iter)
    throw std::out_of_range("poly_lr: iter " + std::to_string(iter) + " outside [0, " +
                            std::to_string(max_iter) + "]");
  return lr0 * std::pow(1.0 - static_cast<double>(iter) / max_iter, power);
}

AdamState make_adam_state(const ParamTensors& params) {
  AdamState s;
  for (const auto& [name, p] : params) {
    s.m.emplace(name, Tensor::zeros(p.shape));
    s.v.emplace(name, Tensor::zeros(p.shape));
  }
  return s;
}

void adam_step(ParamTensors& params, const GradMap& grads, AdamState& state, double lr) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw std::invalid_argument("adam_step: no gradient for " + name);
    const Tensor& g = git->second;
    if (!same_shape(g.shape, p.shape))
      throw std::invalid_argument("adam_step: gradient shape " + shape_str(g.shape) +
                                  " does not match parameter " + name + " " + shape_str(p.shape));
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    for (std::size_t i = 0; i < p.numel(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace aepnet
