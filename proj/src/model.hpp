#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "core/tensor.hpp"

namespace aepnet {

class Tape;

/// Which network to assemble: the full dual-branch net, the same net without
/// the error-rate head, or a single u-net over the stacked image+mask input.
enum class Arch { full, no_ceu, plain };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& s);

struct AepNetConfig {
  int num_classes = 4;   // one-hot mask channels
  int depth = 3;         // encoder levels before the bottleneck
  int base_channels = 8; // channels at level 0, doubling per level
  int gn_groups = 4;
  int ceu_hidden = 32;
  int crop = 16;         // cubic training crop extent
  Arch arch = Arch::full;

  int level_channels(int level) const { return base_channels << level; }
  int bottleneck_channels() const { return base_channels << depth; }
  void validate() const;
  bool operator==(const AepNetConfig&) const = default;
};

/// Parameters keyed by a stable dotted name ("mep.enc0.conv1.w", ...).
/// Values may be detached (storage) or tape-attached leaves (training).
using ParamTensors = std::map<std::string, Tensor>;

struct AepNetModel {
  AepNetConfig config;
  ParamTensors params;
  std::size_t param_count() const;
};

struct ForwardResult {
  Tensor error_prob;     // [2 x D x H x W], voxelwise softmax
  Tensor boundary_pred;  // [1 x D x H x W], sigmoid; empty for Arch::plain
  Tensor cer;            // scalar in (0,1); empty unless Arch::full
};

/// Deterministic construction: weights uniform in +-sqrt(6/(fan_in+fan_out))
/// drawn in declaration order, biases zero, norm scales one.
AepNetModel build(const AepNetConfig& config, std::uint64_t seed);

/// Attach every parameter to a tape as a named leaf.
ParamTensors attach_params(Tape& tape, const ParamTensors& params);

/// Run the network. Inputs: image [1 x D x H x W], mask one-hot
/// [C x D x H x W]; spatial extents must be divisible by 2^depth. Pass the
/// stored params for inference or the attached leaves for training.
ForwardResult forward(const AepNetConfig& config, const ParamTensors& params,
                      const Tensor& image, const Tensor& mask_onehot);

/// F_out = F_mep + F_mep * sigmoid(conv1x1(F_cbft)).
Tensor attention_fuse(const Tensor& f_mep, const Tensor& f_cbft, const Tensor& w,
                      const Tensor& b);

/// The error-rate head over the deepest MEP encoder feature; scalar in (0,1).
/// Pooling is skipped when any spatial extent is odd or already 1.
Tensor ceu_forward(const AepNetConfig& config, const ParamTensors& params, const Tensor& f_deep);

}  // namespace aepnet
