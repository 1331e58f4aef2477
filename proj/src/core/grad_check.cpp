#include "core/grad_check.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace aepnet {

double grad_check(const ScalarFn& f, const std::vector<Tensor>& params, double step,
                  const std::vector<std::vector<std::size_t>>* sample) {
  if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");
  if (sample && sample->size() != params.size())
    throw std::invalid_argument("grad_check: sample list size does not match params");

  // Analytic pass.
  Tape tape;
  std::vector<Tensor> attached;
  attached.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    attached.push_back(tape.leaf(params[i], true, "p" + std::to_string(i)));
  Tensor loss = f(&tape, attached);
  GradMap grads = tape.backward(loss);

  double max_rel = 0.0;
  std::vector<Tensor> work = params;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const Tensor& analytic = grads.at("p" + std::to_string(pi));
    std::vector<std::size_t> all;
    const std::vector<std::size_t>* idxs;
    if (sample) {
      idxs = &(*sample)[pi];
    } else {
      all.resize(params[pi].numel());
      for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
      idxs = &all;
    }
    for (std::size_t k : *idxs) {
      double orig = work[pi][k];
      work[pi][k] = orig + step;
      double fp = f(nullptr, work).scalar_value();
      work[pi][k] = orig - step;
      double fm = f(nullptr, work).scalar_value();
      work[pi][k] = orig;
      double numeric = (fp - fm) / (2.0 * step);
      double a = analytic[k];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

}  // namespace aepnet
