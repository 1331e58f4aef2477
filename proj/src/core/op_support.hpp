#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>

#include "core/tape.hpp"
#include "core/tensor.hpp"

// Helpers shared by the op implementations; not part of the public surface.
namespace aepnet::opdetail {

inline Tape* tape_of(std::initializer_list<const Tensor*> ts) {
  Tape* t = nullptr;
  for (const Tensor* x : ts) {
    if (!x->attached()) continue;
    if (t && t != x->tape)
      throw std::invalid_argument("operands recorded on different tapes");
    t = x->tape;
  }
  return t;
}

/// Node id of `x` on `tape`, attaching detached operands as constant leaves.
inline int as_node(Tape& tape, const Tensor& x) {
  if (x.attached()) return x.node;
  return tape.leaf(x).node;
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!same_shape(a.shape, b.shape))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
}

inline void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.shape.size() != rank)
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                " tensor, got " + shape_str(t.shape));
}

}  // namespace aepnet::opdetail
