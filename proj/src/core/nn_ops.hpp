#pragma once

#include "core/tensor.hpp"

namespace aepnet::nn {

/// Geometry of one (transposed) convolution. Output extent per axis:
/// conv: floor((in + 2*padding - kernel)/stride) + 1, transposed: stride*(in-1) + kernel.
struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kd = 1, kh = 1, kw = 1;
  int stride = 1;
  int padding = 0;
};

/// Cross-correlation with zero padding.
/// x: [C_in x D x H x W], weight: [C_out x C_in x kd x kh x kw], bias: [C_out].
Tensor conv3d(const Tensor& x, const ConvSpec& spec, const Tensor& weight, const Tensor& bias);

/// Scatter-add upsampling; the adjoint of conv3d with padding 0.
/// x: [C_in x D x H x W], weight: [C_in x C_out x kd x kh x kw], bias: [C_out].
Tensor transposed_conv3d(const Tensor& x, const ConvSpec& spec, const Tensor& weight,
                         const Tensor& bias);

/// Blockwise max over 2x2x2 windows, stride 2. Spatial extents must be even.
/// Gradient routes to the first maximum in row-major scan order.
Tensor max_pool3d(const Tensor& x);

/// Per-channel spatial mean: [C x D x H x W] -> [C].
Tensor global_avg_pool(const Tensor& x);

/// y = gamma*(x - mean_g)/sqrt(var_g + eps) + beta, statistics taken per group
/// over (channels-in-group x spatial). C must be divisible by groups.
Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

/// Channel stacking, a first: [C1 x D x H x W] + [C2 x ...] -> [C1+C2 x ...].
Tensor concat_channels(const Tensor& a, const Tensor& b);

}  // namespace aepnet::nn
