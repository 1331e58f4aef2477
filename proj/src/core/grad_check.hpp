#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "core/tape.hpp"
#include "core/tensor.hpp"

namespace aepnet {

/// Scalar function of a parameter list. When the tape is non-null the inputs
/// are leaves on it and the returned loss must be recorded there; with a null
/// tape the call is a plain evaluation used for finite differencing.
using ScalarFn = std::function<Tensor(Tape* tape, const std::vector<Tensor>& params)>;

/// Compare analytic gradients against central differences
/// (f(p+h) - f(p-h)) / 2h and return the maximum relative error, using
/// max(|analytic|, |numeric|, 1e-8) as the denominator. By default every
/// component of every parameter is checked; `sample` restricts the check to
/// the listed component indices per parameter (for large models).
double grad_check(const ScalarFn& f, const std::vector<Tensor>& params, double step,
                  const std::vector<std::vector<std::size_t>>* sample = nullptr);

}  // namespace aepnet
