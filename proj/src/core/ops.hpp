#pragma once

#include <vector>

#include "core/tape.hpp"
#include "core/tensor.hpp"

namespace aepnet::ops {

/// Elementwise binary ops over equal shapes. No broadcasting: shape errors
/// surface at the call site. Detached operands act as constants; if no
/// operand is attached to a tape the result is computed eagerly and stays
/// detached.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

/// x * k for a scalar constant k.
Tensor scale(const Tensor& x, double k);

Tensor relu(const Tensor& x);     // gradient at exactly 0 is 0
Tensor sigmoid(const Tensor& x);  // numerically stable both tails

/// W x + b for 1-D x. W is [n_out x n_in], b is [n_out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Reduce over the given axes (empty = all axes). Result drops the reduced
/// axes; a full reduction yields shape {1}.
Tensor reduce_sum(const Tensor& x, const std::vector<int>& axes = {});
Tensor reduce_mean(const Tensor& x, const std::vector<int>& axes = {});

/// Softmax across axis 0 of [C x ...]; per-position channel sums are 1.
Tensor softmax_channels(const Tensor& x);

}  // namespace aepnet::ops
