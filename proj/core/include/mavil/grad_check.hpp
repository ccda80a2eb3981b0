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
#include <cstdint>
#include <functional>
#include <string>

#include "mavil/params.hpp"

namespace mavil {

using LossFn = std::function<Var(BoundParams&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares analytic gradients of `loss_fn` against fourth-order central
// differences with step `epsilon` on up to `max_coords` coordinates (all of
// them when the model is smaller; every parameter tensor gets at least one).
// Relative error per coordinate is |a - n| / max(1e-8, |a| + |n|). `loss_fn` must be deterministic.
GradCheckReport grad_check(const LossFn& loss_fn, const ParamStore& params, double epsilon,
                           std::size_t max_coords = 256, std::uint64_t seed = 0);

}  // namespace mavil
