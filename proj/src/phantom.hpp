#pragma once

#include <cstdint>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace aepnet {

/// A synthetic case: image intensities and integer ground-truth labels,
/// both [D x H x W].
struct Phantom {
  Tensor image;
  Tensor gt;
};

/// Nominal mean intensity of class k out of C; consecutive classes are
/// separated by 0.8/(C-1).
double class_mean(int k, int num_classes);

/// Noise standard deviation, at most half the class-mean gap so means stay
/// at least two sigmas apart.
double noise_sigma(int num_classes);

/// Generate ground truth as nested warped ellipsoid shells (background plus
/// C-1 foreground shells of roughly equal volume) and an image of per-class
/// mean intensity modulated by a smooth bias field plus Gaussian noise.
/// Deterministic per seed; regenerates the geometry until every foreground
/// class occupies at least 1% of the voxels.
Phantom gen_phantom(std::uint64_t seed, const Shape& dims, int num_classes);

/// Corrupt a label volume with severity-scaled morphological erosion or
/// dilation of random classes, label flips in the boundary band, and random
/// blob paints. Severity 0 returns the input unchanged; expected
/// mask-vs-gt quality decreases monotonically with severity.
Tensor degrade_mask(const Tensor& gt, double severity, std::uint64_t seed, int num_classes);

/// 1 where the volumes agree, 0 where they differ.
Tensor make_error_map(const Tensor& mask, const Tensor& gt);

/// [C x D x H x W] with exactly one active channel per voxel.
Tensor one_hot(const Tensor& labels, int num_classes);

/// Z-score over the whole volume, then min-max rescale to [0,1].
/// A constant volume maps to all 0.5.
Tensor preprocess(const Tensor& image);

/// The aligned per-mask volume set fed to training, all [D x H x W].
struct CaseSample {
  Tensor image;
  Tensor gt;
  Tensor mask;
  Tensor error_map;
  Tensor boundary;
};

/// Crop all volumes at one random offset, padding past-the-end first when an
/// extent is short: image/labels pad with 0, the error map with 1 (zero-padded
/// mask and gt agree there), the boundary with 0.
CaseSample random_crop(const CaseSample& s, const Shape& crop, Rng& rng);

/// Flip all volumes together along each listed axis with probability 1/2
/// (independent coins drawn in x, y, z order; x = W, y = H, z = D).
CaseSample mirror_flip(const CaseSample& s, bool x_axis, bool y_axis, bool z_axis, Rng& rng);

}  // namespace aepnet
