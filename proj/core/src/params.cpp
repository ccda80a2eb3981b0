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

#include "mavil/params.hpp"

#include <cmath>
#include <stdexcept>

namespace mavil {

void ParamStore::add(const std::string& name, Tensor value) {
  if (!tensors_.emplace(name, std::move(value)).second) {
    throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
  }
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::numel() const { return numel_with_prefix(""); }

std::size_t ParamStore::numel_with_prefix(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_)
    if (name.compare(0, prefix.size(), prefix) == 0) n += t.size();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& kv : tensors_) out.push_back(kv.first);
  return out;
}

void ParamStore::copy_prefix_from(const ParamStore& other, const std::string& prefix) {
  for (const auto& [name, t] : other.tensors_) {
    if (name.compare(0, prefix.size(), prefix) != 0) continue;
    auto it = tensors_.find(name);
    if (it == tensors_.end()) {
      tensors_.emplace(name, t);
    } else {
      if (it->second.shape() != t.shape()) {
        throw std::invalid_argument("copy_prefix_from: shape mismatch for '" + name + "'");
      }
      it->second = t;
    }
  }
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(Shape{fan_in, fan_out});
  for (double& x : t.vec()) x = (2.0 * rng.uniform() - 1.0) * bound;
  return t;
}

Tensor normal_init(Shape shape, double std, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.vec()) x = std * rng.normal();
  return t;
}

Var BoundParams::get(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = tape_->leaf(store_->at(name), trainable_);
  bound_.emplace(name, v);
  return v;
}

GradMap BoundParams::backward(Var loss) {
  std::vector<std::string> names;
  std::vector<Var> vars;
  for (const auto& [name, v] : bound_) {
    names.push_back(name);
    vars.push_back(v);
  }
  std::vector<Tensor> grads = tape_->backward(loss, vars);
  GradMap out;
  for (const auto& [name, t] : *store_) out.emplace(name, Tensor::zeros_like(t));
  for (std::size_t i = 0; i < names.size(); ++i) out[names[i]] = std::move(grads[i]);
  bound_.clear();
  return out;
}

}  // namespace mavil

#include "mavil/hash.hpp"

namespace mavil {

std::string params_digest(const ParamStore& params) {
  std::uint64_t h = fnv1a64("params");
  for (const auto& [name, t] : params) {
    h = fnv1a64(name, h);
    h = fnv1a64(shape_str(t.shape()), h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(t.vec().data()),
                                 t.size() * sizeof(double)),
                h);
  }
  return hex64(h);
}

}  // namespace mavil
