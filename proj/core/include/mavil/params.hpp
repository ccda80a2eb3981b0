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
#include <map>
#include <string>
#include <vector>

#include "mavil/autodiff.hpp"
#include "mavil/rng.hpp"
#include "mavil/tensor.hpp"

namespace mavil {

using GradMap = std::map<std::string, Tensor>;

// Named trainable parameters, ordered by name.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  std::size_t size() const { return tensors_.size(); }
  std::size_t numel() const;
  std::size_t numel_with_prefix(const std::string& prefix) const;
  std::vector<std::string> names() const;

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  // Copies every parameter under `prefix` from `other`.
  void copy_prefix_from(const ParamStore& other, const std::string& prefix);

  bool operator==(const ParamStore& other) const = default;

 private:
  std::map<std::string, Tensor> tensors_;
};

// Initializers.
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor normal_init(Shape shape, double std, Rng& rng);

// Binds a ParamStore onto a tape, creating leaves on first use.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamStore& store, bool trainable = true)
      : tape_(&tape), store_(&store), trainable_(trainable) {}

  Var get(const std::string& name);
  Tape& tape() const { return *tape_; }
  bool trainable() const { return trainable_; }

  // Backpropagates `loss` and returns a gradient for every parameter in the
  // store (zeros for parameters the loss never touched). Clears the tape.
  GradMap backward(Var loss);

 private:
  Tape* tape_;
  const ParamStore* store_;
  bool trainable_;
  std::map<std::string, Var> bound_;
};

}  // namespace mavil

namespace mavil {

// Content digest over parameter names, shapes and raw values.
std::string params_digest(const ParamStore& params);

}  // namespace mavil
