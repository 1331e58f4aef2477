#pragma once

#include <string>

#include "core/tensor.hpp"

namespace aepnet {

enum class VolDtype { f32, u8 };

/// Write `t` as an RVOL pair: `header_path` holds text metadata and points at
/// a raw little-endian row-major payload file written next to it (same name,
/// .bin extension). Accepts rank 3 [D x H x W] or rank 4 [C x D x H x W];
/// u8 requires integral values in [0, 255].
void write_volume(const std::string& header_path, const Tensor& t, VolDtype dtype);

/// Read an RVOL volume; payload values widen to double. Throws on a missing
/// or malformed header, unknown dtype, or header/payload size disagreement.
Tensor read_volume(const std::string& header_path);

}  // namespace aepnet
