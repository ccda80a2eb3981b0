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

#include "mavil/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mavil {

bool OptimizerState::operator==(const OptimizerState& o) const {
  if (step != o.step || moments.size() != o.moments.size()) return false;
  for (const auto& [name, m] : moments) {
    auto it = o.moments.find(name);
    if (it == o.moments.end()) return false;
    if (!bitwise_equal(m.first, it->second.first) || !bitwise_equal(m.second, it->second.second))
      return false;
  }
  return true;
}

void adamw_step(ParamStore& params, const GradMap& grads, OptimizerState& state, double lr,
                const LrMultiplier& multiplier) {
  if (lr < 0.0 || !std::isfinite(lr)) {
    throw std::invalid_argument("adamw_step: invalid learning rate " + std::to_string(lr));
  }
  for (const auto& [name, g] : grads) {
    for (double x : g.vec()) {
      if (!std::isfinite(x)) {
        throw std::runtime_error("adamw_step: non-finite gradient in parameter '" + name + "'");
      }
    }
    if (g.shape() != params.at(name).shape()) {
      throw std::invalid_argument("adamw_step: gradient shape " + shape_str(g.shape()) +
                                  " does not match parameter '" + name + "'");
    }
  }
  const AdamWConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto [it, inserted] = state.moments.try_emplace(name);
    if (inserted) it->second = Moments{Tensor::zeros_like(p), Tensor::zeros_like(p)};
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    const double step_lr = multiplier ? lr * multiplier(name) : lr;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= step_lr * (mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * p[i]);
    }
  }
}

double LrSchedule::effective_lr() const {
  return base_lr * static_cast<double>(batch_size) / static_cast<double>(reference_batch);
}

std::size_t LrSchedule::warmup_steps() const {
  return static_cast<std::size_t>(std::llround(warmup_epochs * static_cast<double>(steps_per_epoch)));
}

std::size_t LrSchedule::total_steps() const {
  return static_cast<std::size_t>(std::llround(total_epochs * static_cast<double>(steps_per_epoch)));
}

double lr_at(const LrSchedule& s, std::size_t global_step) {
  const double peak = s.effective_lr();
  const std::size_t warm = s.warmup_steps();
  const std::size_t total = s.total_steps();
  if (global_step < warm) {
    return peak * static_cast<double>(global_step) / static_cast<double>(warm);
  }
  if (total <= warm) return peak;
  const double progress = std::min(
      1.0, static_cast<double>(global_step - warm) / static_cast<double>(total - warm));
  return s.min_lr + (peak - s.min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace mavil
