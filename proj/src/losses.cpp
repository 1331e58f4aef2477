#include "losses.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "core/op_support.hpp"
#include "core/ops.hpp"

namespace aepnet {

using namespace ops;

namespace {
constexpr double kDiceEps = 1e-6;
}

Tensor generalized_dice_loss(const Tensor& P, const Tensor& R) {
  opdetail::require_same_shape("generalized_dice_loss", P, R);
  if (P.shape.size() < 2 || P.shape[0] != 2)
    throw std::invalid_argument("generalized_dice_loss: expected [2 x ...] tensors, got " +
                                shape_str(P.shape));
  const std::size_t n = P.numel() / 2;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(P[i] + P[n + i] - 1.0) > 1e-6)
      throw std::invalid_argument("generalized_dice_loss: P channel sums deviate from 1");
    for (int c = 0; c < 2; ++c) {
      double r = R[c * n + i];
      if (r != 0.0 && r != 1.0)
        throw std::invalid_argument("generalized_dice_loss: R is not one-hot");
    }
    if (R[i] + R[n + i] != 1.0)
      throw std::invalid_argument("generalized_dice_loss: R is not one-hot");
  }

  // Inverse-square-count weights from the reference; zero for absent classes.
  double count[2] = {0.0, 0.0};
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < n; ++i) count[c] += R[c * n + i];
  Tensor w({2}, {count[0] > 0.0 ? 1.0 / (count[0] * count[0]) : 0.0,
                 count[1] > 0.0 ? 1.0 / (count[1] * count[1]) : 0.0});

  std::vector<int> spatial_axes;
  for (std::size_t d = 1; d < P.shape.size(); ++d) spatial_axes.push_back(static_cast<int>(d));

  Tensor overlap = reduce_sum(mul(P, R), spatial_axes);       // [2]
  Tensor total = reduce_sum(add(P, R), spatial_axes);         // [2]
  Tensor numer = reduce_sum(mul(w, overlap));
  Tensor denom = add(reduce_sum(mul(w, total)), Tensor::scalar(kDiceEps));
  return sub(Tensor::scalar(1.0), scale(div(numer, denom), 2.0));
}

Tensor boundary_mse(const Tensor& pred, const Tensor& B) {
  opdetail::require_same_shape("boundary_mse", pred, B);
  Tensor d = sub(pred, B);
  return reduce_mean(mul(d, d));
}

double real_error_rate(const Tensor& error_map) {
  if (error_map.numel() == 0) throw std::invalid_argument("real_error_rate: empty map");
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < error_map.numel(); ++i) {
    if (error_map[i] == 0.0)
      ++zeros;
    else if (error_map[i] != 1.0)
      throw std::invalid_argument("real_error_rate: map is not binary (value " +
                                  std::to_string(error_map[i]) + ")");
  }
  return static_cast<double>(zeros) / static_cast<double>(error_map.numel());
}

Tensor ceu_loss(const Tensor& cER, double rER) {
  if (cER.numel() != 1)
    throw std::invalid_argument("ceu_loss: cER must be scalar, got " + shape_str(cER.shape));
  Tensor d = sub(cER, Tensor::scalar(rER));
  return mul(d, d);
}

Tensor total_loss(const Tensor& l1, const Tensor& l2, const Tensor& l3, const LossWeights& w) {
  if (w.alpha < 0.0 || w.beta < 0.0 || w.gamma < 0.0)
    throw std::invalid_argument("total_loss: negative loss weight");
  return add(add(scale(l1, w.alpha), scale(l2, w.beta)), scale(l3, w.gamma));
}

}  // namespace aepnet
