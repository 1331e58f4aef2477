#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace aepnet {

/// Gradients of named parameter leaves after a backward pass.
using GradMap = std::map<std::string, Tensor>;

/// Reverse-mode tape. Operations append nodes in forward execution order;
/// backward walks the record in reverse, so topological order is free.
/// A tape lives for one forward/backward pass and is then discarded.
class Tape {
 public:
  /// Receives the tape, the node's own id and its accumulated upstream
  /// gradient; accumulates into the parents' buffers via grad_buffer().
  using BackwardFn = std::function<void(Tape&, int self, const std::vector<double>& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Attach a value as a leaf. Parameter leaves must carry a unique name and
  /// are the keys of the gradient map returned by backward().
  Tensor leaf(const Tensor& value, bool is_param = false, std::string name = {});

  /// Append an operation result. `parents` are node ids on this tape.
  Tensor record(Tensor value, std::vector<int> parents, BackwardFn backward);

  const Tensor& value(int node) const;

  /// Gradient accumulation buffer for a node, zero-initialized on first use.
  std::vector<double>& grad_buffer(int node);
  bool has_grad(int node) const;

  /// False only for constant (non-parameter) leaves, whose gradient nobody
  /// reads; expensive ops use this to skip dead gradient computations.
  bool needs_grad(int node) const;

  /// Reverse-mode sweep from a scalar loss on this tape. Every parameter
  /// leaf appears in the result; unreachable parameters get zero gradients.
  GradMap backward(const Tensor& loss);

  /// Accumulated gradient of any node as a tensor (zeros if untouched).
  Tensor grad_of(const Tensor& t) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<int> parents;
    BackwardFn backward;
    bool is_param = false;
    std::string name;
  };

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;

  void check_node(int node) const;
};

}  // namespace aepnet
