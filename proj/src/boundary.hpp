#pragma once

#include <string>

#include "core/tensor.hpp"

namespace aepnet {

/// Enhanced boundary map: every value is either exactly 0 or in (0.5, 1],
/// and the strongest-gradient voxel maps to exactly 1.
struct BoundaryTarget {
  Tensor values;
  std::string source_mask_id;
};

/// Gradient-magnitude map of a one-hot mask: per channel, 3x3x3 Sobel with
/// replicate padding; per-voxel result is the maximum magnitude over
/// channels. Rejects inputs that are not exactly one-hot.
Tensor sobel3d(const Tensor& mask_onehot);

/// b_i = (s_i + max s)/(2 max s) where s_i > 0, else 0; all zeros when the
/// map has no gradient anywhere.
BoundaryTarget enhance_boundary(const Tensor& S, std::string source_mask_id = {});

}  // namespace aepnet
