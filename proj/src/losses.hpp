#pragma once

#include "core/tensor.hpp"

namespace aepnet {

struct LossWeights {
  double alpha = 0.3;
  double beta = 0.3;
  double gamma = 0.6;
};

/// Two-class generalized Dice loss with inverse-square-count class weights.
/// P: [2 x ...] softmax probabilities, R: [2 x ...] one-hot reference.
/// Absent classes get zero weight; the denominator carries eps = 1e-6.
Tensor generalized_dice_loss(const Tensor& P, const Tensor& R);

/// Mean squared error between a boundary prediction and its target.
Tensor boundary_mse(const Tensor& pred, const Tensor& B);

/// Fraction of error voxels in a binary error map (correct = 1, error = 0).
double real_error_rate(const Tensor& error_map);

/// (cER - rER)^2 for the scalar error-rate head.
Tensor ceu_loss(const Tensor& cER, double rER);

/// (alpha*l1 + beta*l2) + gamma*l3, evaluated exactly in that order.
Tensor total_loss(const Tensor& l1, const Tensor& l2, const Tensor& l3, const LossWeights& w);

}  // namespace aepnet
