// Copyright 2026 The mavil-desk Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mavil/tensor.hpp"

namespace mavil {

enum class Precision { F64, F32 };

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode differentiation tape. One tape per training step; not
// thread-safe. Values recorded here are immutable once pushed.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(Precision precision = Precision::F64) : precision_(precision) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Records an op result. `backward` is dropped when no parent needs grad.
  Var push(Tensor value, std::initializer_list<Var> parents, BackwardFn backward);
  Var push(Tensor value, std::span<const Var> parents, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of a node, zero-initialized on first access.
  Tensor& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return nodes_[id].grad_set; }

  // Runs reverse accumulation from a scalar loss and returns d(loss)/d(wrt[i])
  // for each requested leaf (zeros if unreachable). Clears the tape.
  std::vector<Tensor> backward(Var loss, std::span<const Var> wrt);

  Precision precision() const { return precision_; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool grad_set = false;
    bool requires_grad = false;
    BackwardFn backward;
  };
  void round_if_needed(Tensor& t) const;

  Precision precision_;
  std::vector<Node> nodes_;
};

// Differentiable ops. All matrix ops act on rank-2 tensors (rank-1 counts as
// one row); reductions return rank-0 scalars. Shape errors name the op.
namespace ops {

Var matmul(Var a, Var b);
Var add(Var a, Var b);        // same shape, or b a [1,n] row broadcast over a's rows
Var sub(Var a, Var b);        // same shape
Var mul(Var a, Var b);        // elementwise, same shape, or b a [1,n] row broadcast
Var scale(Var a, double c);
Var transpose(Var a);
Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
Var slice(Var a, int axis, std::size_t start, std::size_t count);
Var gather_rows(Var a, std::span<const std::size_t> index);
Var sum(Var a);
Var mean(Var a);
Var mean_rows(Var a);  // [m,n] -> [1,n]
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-6);
Var layer_norm(Var x, double eps = 1e-6);
Var gelu(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var mse(Var pred, Var target);
Var l2_normalize_rows(Var a);
// Mean over rows of -log softmax(logits)[i, labels[i]].
Var cross_entropy(Var logits, std::span<const std::size_t> labels);
// Mean over elements of binary cross entropy with logits; targets in [0,1].
Var bce_with_logits(Var logits, const Tensor& targets);

}  // namespace ops

// Plain (tape-free) helpers shared by ops and test oracles.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

}  // namespace mavil
