#include "core/tape.hpp"

#include <stdexcept>

namespace aepnet {

void Tape::check_node(int node) const {
  if (node < 0 || static_cast<std::size_t>(node) >= nodes_.size())
    throw std::logic_error("tape node id " + std::to_string(node) + " out of range");
}

Tensor Tape::leaf(const Tensor& value, bool is_param, std::string name) {
  if (is_param) {
    if (name.empty()) throw std::invalid_argument("parameter leaf requires a name");
    for (const Node& n : nodes_)
      if (n.is_param && n.name == name)
        throw std::invalid_argument("duplicate parameter leaf: " + name);
  }
  Node n;
  n.value = value.detached();
  n.is_param = is_param;
  n.name = std::move(name);
  int id = static_cast<int>(nodes_.size());
  n.value.tape = this;
  n.value.node = id;
  nodes_.push_back(std::move(n));
  grads_.emplace_back();
  return nodes_.back().value;
}

Tensor Tape::record(Tensor value, std::vector<int> parents, BackwardFn backward) {
  for (int p : parents) check_node(p);
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.backward = std::move(backward);
  int id = static_cast<int>(nodes_.size());
  n.value.tape = this;
  n.value.node = id;
  nodes_.push_back(std::move(n));
  grads_.emplace_back();
  return nodes_.back().value;
}

const Tensor& Tape::value(int node) const {
  check_node(node);
  return nodes_[node].value;
}

std::vector<double>& Tape::grad_buffer(int node) {
  check_node(node);
  auto& g = grads_[node];
  if (g.empty()) g.assign(nodes_[node].value.numel(), 0.0);
  return g;
}

bool Tape::has_grad(int node) const {
  check_node(node);
  return !grads_[node].empty();
}

bool Tape::needs_grad(int node) const {
  check_node(node);
  return nodes_[node].backward != nullptr || nodes_[node].is_param;
}

GradMap Tape::backward(const Tensor& loss) {
  if (!loss.attached() || loss.tape != this)
    throw std::invalid_argument("backward: loss is detached from this tape");
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(loss.shape));

  for (auto& g : grads_) g.clear();
  grad_buffer(loss.node)[0] = 1.0;

  // Record order equals execution order, so the reverse is a valid
  // topological order for the backward sweep.
  for (int i = loss.node; i >= 0; --i) {
    if (grads_[i].empty() || !nodes_[i].backward) continue;
    nodes_[i].backward(*this, i, grads_[i]);
  }

  GradMap out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].is_param) continue;
    const Tensor& v = nodes_[i].value;
    Tensor g = grads_[i].empty() ? Tensor::zeros(v.shape) : Tensor(v.shape, grads_[i]);
    out.emplace(nodes_[i].name, std::move(g));
  }
  return out;
}

Tensor Tape::grad_of(const Tensor& t) const {
  if (!t.attached() || t.tape != this)
    throw std::invalid_argument("grad_of: tensor is not on this tape");
  check_node(t.node);
  const auto& g = grads_[t.node];
  if (g.empty()) return Tensor::zeros(t.shape);
  return Tensor(t.shape, g);
}

}  // namespace aepnet
