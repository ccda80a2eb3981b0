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
#include <string>
#include <vector>

#include "mavil/autodiff.hpp"
#include "mavil/tokenizer.hpp"

namespace mavil {

enum class MaskStrategy { Random, TimeFreq, SpaceTime };

const char* strategy_name(MaskStrategy s);
MaskStrategy parse_strategy(const std::string& s);

// Indices refer to patch tokens 0..L-1; the CLS slot is outside the plan and
// always kept.
struct MaskPlan {
  std::vector<std::size_t> kept;    // ascending
  std::vector<std::size_t> masked;  // ascending
  double ratio = 0.0;
  MaskStrategy strategy = MaskStrategy::Random;
  std::uint64_t seed = 0;

  std::size_t num_tokens() const { return kept.size() + masked.size(); }
  bool operator==(const MaskPlan&) const = default;
};

// ceil(ratio * L), robust to representation error in ratio.
std::size_t masked_count(std::size_t num_tokens, double ratio);

// Seed for one (run, epoch, sample, view, modality) slot.
std::uint64_t mask_seed(std::uint64_t run_seed, std::uint64_t epoch, std::uint64_t sample,
                        std::uint64_t view, Modality modality);

// Exactly masked_count(L, ratio) tokens are masked.
//   Random: uniform permutation, first n masked.
//   TimeFreq / SpaceTime: whole time slots and whole frequency bands (or
//   spatial positions across all time) with a 2:1 frequency-or-space to time
//   split, then random single tokens to reach n. The grid is (time, freq) or
//   (time, rows, cols).
MaskPlan make_mask(std::size_t num_tokens, const std::vector<std::size_t>& grid, double ratio,
                   MaskStrategy strategy, std::uint64_t seed);

MaskPlan keep_all_plan(std::size_t num_tokens);

// Visible rows in ascending kept order, CLS (if any) first.
TokenSequence apply_mask(const TokenSequence& seq, const MaskPlan& plan);
Var apply_mask(Var tokens, const MaskPlan& plan, bool has_cls);

// Inverse of apply_mask: kept rows return to their positions, masked rows are
// filled with `mask_token` (1 x D). Output has has_cls + L rows.
Var restore_order(Var visible, const MaskPlan& plan, Var mask_token, bool has_cls);
Tensor restore_order(const Tensor& visible, const MaskPlan& plan, const Tensor& mask_token,
                     bool has_cls);

struct SecondView {
  MaskPlan plan;
  TokenSequence visible;
};

// Second masked view drawn from an independent stream of `seed`.
SecondView second_view(const TokenSequence& seq, double ratio, MaskStrategy strategy,
                       std::uint64_t seed);

}  // namespace mavil
