// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_TENSOR_TAPE_H_
#define FEDTUNE_TENSOR_TAPE_H_

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fedtune/tensor/param_set.h"
#include "fedtune/tensor/tensor.h"

namespace fedtune {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
// lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  DType dtype() const { return value().dtype(); }
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  size_t id_ = 0;
};

// Records a forward computation so vector-Jacobian products can be replayed
// in reverse. Every recorded output is checked for NaN/Inf.
class Tape {
 public:
  // Receives the gradient w.r.t. the op output; accumulates into inputs
  // through GradBuffer.
  using BackwardFn = std::function<void(const Tensor& grad_output)>;

  // With grad disabled every leaf is recorded as not requiring a gradient,
  // so ops skip saving activations (inference mode).
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Constant(Tensor value);
  Var Leaf(Tensor value, bool requires_grad);
  // Leaf bound to a named parameter. The tensor is referenced, not copied,
  // and must outlive the tape. requires_grad follows the trainable flag.
  // Repeated calls with the same name return the same Var.
  Var Param(const ParamSet& params, const std::string& name);

  // Registers an op output. `backward` is dropped when no input requires a
  // gradient.
  Var Record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  static bool AnyRequiresGrad(const std::vector<Var>& vars);

  // Gradient accumulator for v, zero-initialized on first access.
  Tensor& GradBuffer(const Var& v);
  // nullptr when no gradient reached v.
  const Tensor* Grad(const Var& v) const;

  // Reverse pass from a scalar loss. Returns gradients for every trainable
  // parameter leaf (zeros for leaves the loss does not depend on); frozen
  // parameters get no entry. May be called once per tape.
  ParamSet Backward(const Var& loss);

  size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    std::optional<Tensor> grad;
    bool requires_grad = false;
    BackwardFn backward;
    std::string param_name;

    const Tensor& get() const { return external ? *external : value; }
  };

  std::deque<Node> nodes_;
  std::unordered_map<std::string, size_t> param_nodes_;
  bool grad_enabled_ = true;
  bool backward_done_ = false;
};

}  // namespace fedtune

#endif  // FEDTUNE_TENSOR_TAPE_H_
