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

#include "mavil/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mavil/rng.hpp"

namespace mavil {
namespace {

double eval_loss(const LossFn& loss_fn, const ParamStore& params) {
  Tape tape;
  BoundParams bound(tape, params, false);
  const double v = loss_fn(bound).value().item();
  if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckReport grad_check(const LossFn& loss_fn, const ParamStore& params, double epsilon,
                           std::size_t max_coords, std::uint64_t seed) {
  GradMap analytic;
  {
    Tape tape;
    BoundParams bound(tape, params, true);
    Var loss = loss_fn(bound);
    if (!std::isfinite(loss.value().item())) throw std::runtime_error("grad_check: non-finite loss");
    analytic = bound.backward(loss);
  }

  std::vector<std::pair<std::string, std::size_t>> coords;
  const std::size_t total = params.numel();
  Rng rng(seed, {0x67636b});
  if (total <= max_coords) {
    for (const auto& [name, t] : params)
      for (std::size_t i = 0; i < t.size(); ++i) coords.emplace_back(name, i);
  } else {
    for (const auto& [name, t] : params) coords.emplace_back(name, rng.below(t.size()));
    while (coords.size() < max_coords) {
      std::size_t k = rng.below(total);
      for (const auto& [name, t] : params) {
        if (k < t.size()) {
          coords.emplace_back(name, k);
          break;
        }
        k -= t.size();
      }
    }
  }

  GradCheckReport report;
  ParamStore work = params;
  for (const auto& [name, idx] : coords) {
    Tensor& p = work.at(name);
    const double orig = p[idx];
    auto at = [&](double step) {
      p[idx] = orig + step;
      const double v = eval_loss(loss_fn, work);
      p[idx] = orig;
      return v;
    };
    // Fourth-order central stencil.
    const double numeric = (8.0 * (at(epsilon) - at(-epsilon)) - (at(2.0 * epsilon) - at(-2.0 * epsilon))) /
                           (12.0 * epsilon);
    const double a = analytic.at(name)[idx];
    const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    ++report.coordinates;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = name;
      report.worst_index = idx;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace mavil
