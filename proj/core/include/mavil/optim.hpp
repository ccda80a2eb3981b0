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

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "mavil/params.hpp"

namespace mavil {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

struct Moments {
  Tensor first;
  Tensor second;
};

struct OptimizerState {
  AdamWConfig config;
  std::map<std::string, Moments> moments;
  std::uint64_t step = 0;

  bool operator==(const OptimizerState& o) const;
};

// Per-parameter learning-rate multiplier, e.g. to slow one encoder down.
using LrMultiplier = std::function<double(const std::string& param_name)>;

// One AdamW update with bias correction and decoupled weight decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
// Throws if any gradient is non-finite, naming the parameter.
void adamw_step(ParamStore& params, const GradMap& grads, OptimizerState& state, double lr,
                const LrMultiplier& multiplier = {});

// Linear warm-up followed by half-cycle cosine decay to `min_lr`. The peak
// rate is the effective rate base_lr * batch_size / reference_batch.
struct LrSchedule {
  double base_lr = 2e-4;
  double warmup_epochs = 4;
  double total_epochs = 20;
  double min_lr = 1e-6;
  std::size_t steps_per_epoch = 1;
  std::size_t batch_size = 256;
  std::size_t reference_batch = 256;

  double effective_lr() const;
  std::size_t warmup_steps() const;
  std::size_t total_steps() const;
};

double lr_at(const LrSchedule& schedule, std::size_t global_step);

}  // namespace mavil
