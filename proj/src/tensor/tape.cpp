// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/tensor/tape.h"

#include <algorithm>

namespace fedtune {

const Tensor& Var::value() const {
  if (!tape_) throw ConfigError("use of an unbound Var");
  return tape_->nodes_.at(id_).get();
}

bool Var::requires_grad() const {
  if (!tape_) throw ConfigError("use of an unbound Var");
  return tape_->nodes_.at(id_).requires_grad;
}

Var Tape::Constant(Tensor value) { return Leaf(std::move(value), false); }

Var Tape::Leaf(Tensor value, bool requires_grad) {
  if (!value.AllFinite()) throw NumericError("non-finite value fed to tape");
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Param(const ParamSet& params, const std::string& name) {
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return Var(this, it->second);
  const ParamEntry& entry = params.Entry(name);
  Node node;
  node.external = &entry.tensor;
  node.requires_grad = entry.trainable && grad_enabled_;
  node.param_name = name;
  nodes_.push_back(std::move(node));
  param_nodes_.emplace(name, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

bool Tape::AnyRequiresGrad(const std::vector<Var>& vars) {
  for (const auto& v : vars) {
    if (v.requires_grad()) return true;
  }
  return false;
}

Var Tape::Record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  if (!value.AllFinite()) {
    throw NumericError("non-finite value produced in forward pass (tape node " +
                       std::to_string(nodes_.size()) + ")");
  }
  for (const auto& in : inputs) {
    if (in.tape() != this) throw ConfigError("op inputs recorded on a different tape");
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = AnyRequiresGrad(inputs);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::GradBuffer(const Var& v) {
  Node& node = nodes_.at(v.id());
  if (!node.grad) {
    const Tensor& value = node.get();
    node.grad = Tensor(value.shape(), value.dtype());
  }
  return *node.grad;
}

const Tensor* Tape::Grad(const Var& v) const {
  const Node& node = nodes_.at(v.id());
  return node.grad ? &*node.grad : nullptr;
}

ParamSet Tape::Backward(const Var& loss) {
  if (loss.tape() != this) throw ConfigError("loss was not recorded on this tape");
  if (backward_done_) throw ConfigError("Backward called twice on the same tape");
  if (loss.value().numel() != 1) {
    throw ConfigError("loss must be a scalar, got shape " + ShapeToString(loss.shape()));
  }
  backward_done_ = true;

  if (loss.requires_grad()) {
    GradBuffer(loss).Fill(1.0);
    for (size_t id = loss.id() + 1; id-- > 0;) {
      Node& node = nodes_[id];
      if (!node.requires_grad || !node.grad || !node.backward) continue;
      node.backward(*node.grad);
      // Saved activations are no longer needed.
      node.backward = nullptr;
    }
  }

  ParamSet grads;
  std::vector<std::pair<size_t, std::string>> ordered;
  for (const auto& [name, id] : param_nodes_) ordered.emplace_back(id, name);
  std::sort(ordered.begin(), ordered.end());
  for (const auto& [id, name] : ordered) {
    Node& node = nodes_[id];
    if (!node.requires_grad) continue;
    Tensor g = node.grad ? *node.grad : Tensor(node.get().shape(), node.get().dtype());
    if (!g.AllFinite()) throw NumericError("non-finite gradient for parameter '" + name + "'");
    grads.Add(name, std::move(g), true);
  }
  return grads;
}

}  // namespace fedtune
