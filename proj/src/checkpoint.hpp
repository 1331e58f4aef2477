#pragma once

#include <string>

#include "model.hpp"
#include "optim.hpp"

namespace aepnet {

/// Everything needed to resume training exactly: parameters, optimizer
/// moments, the iteration counter, and the text states of the three training
/// random streams (empty strings outside a training run).
struct Checkpoint {
  AepNetConfig model_config;
  long long iteration = 0;
  ParamTensors params;
  AdamState adam;
  std::string rng_sample, rng_crop, rng_flip;
};

/// Write a text manifest at `path` plus a raw little-endian f64 payload next
/// to it (same name, .bin extension). Bit-lossless round trip.
void save_checkpoint(const std::string& path, const Checkpoint& ck);

/// Load and validate: the stored tensor names and shapes must be exactly
/// those of a model built from the stored config, and the payload size must
/// match the manifest. Throws on version, shape, or size mismatch.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace aepnet
