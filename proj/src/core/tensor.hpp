#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace aepnet {

/// Row-major extents. Extents are positive; a zero extent is allowed only for
/// the degenerate empty tensor (numel 0) accepted by concat_channels.
using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool same_shape(const Shape& a, const Shape& b);

class Tape;

/// Dense N-D array of doubles, optionally attached to a recording tape.
/// Data is immutable once the tensor participates in recorded operations;
/// mutate only tensors you own and have not fed to an op yet.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  Tape* tape = nullptr;
  int node = -1;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d);

  static Tensor zeros(Shape s);
  static Tensor full(Shape s, double v);
  static Tensor scalar(double v);  // shape {1}

  std::size_t numel() const { return data.size(); }
  bool attached() const { return tape != nullptr && node >= 0; }

  /// Same values, no tape association.
  Tensor detached() const;

  double operator[](std::size_t i) const { return data[i]; }
  double& operator[](std::size_t i) { return data[i]; }

  /// Value of a single-element tensor.
  double scalar_value() const;
};

}  // namespace aepnet
