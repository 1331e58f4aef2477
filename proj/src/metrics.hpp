#pragma once

#include <optional>
#include <vector>

#include "core/tensor.hpp"

namespace aepnet {

/// Scores of a predicted error map against the real one. The positive class
/// is the error voxels (map value 0). `prec` is absent when nothing was
/// predicted as error, `recl` when the real map has no errors; `dsc` is 1
/// when both maps agree that there are no errors.
struct ErrorMapMetrics {
  double dsc = 0.0;
  double acc = 0.0;
  std::optional<double> prec;
  std::optional<double> recl;
};

/// Per-voxel argmax over the two probability channels; ties go to channel 0.
/// Input [2 x D x H x W], output [D x H x W] of {0,1} labels (1 = correct).
Tensor binarize_error_prob(const Tensor& pred_prob);

/// pred_prob [2 x D x H x W] voxelwise probabilities, real [D x H x W]
/// binary; binarizes internally.
ErrorMapMetrics error_map_metrics(const Tensor& pred_prob, const Tensor& real_map);

/// Fraction of voxels a binarized error map calls correct (pAcc).
double predicted_accuracy(const Tensor& pred_map);

struct SegQuality {
  double dsc = 0.0;
  double acc = 0.0;
};

/// Mask-vs-ground-truth agreement: acc = matching voxel fraction, dsc =
/// unweighted mean of per-class binary Dice over foreground classes 1..C-1,
/// skipping classes absent from both volumes (1.0 if every class is skipped).
SegQuality seg_quality(const Tensor& mask, const Tensor& gt, int num_classes);

/// Sample Pearson correlation; throws on length < 2 or zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

/// Mean absolute difference; throws on length mismatch or empty input.
double mae(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace aepnet
