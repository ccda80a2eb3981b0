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

#include "mavil/masking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mavil/rng.hpp"

namespace mavil {

const char* strategy_name(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::Random: return "random";
    case MaskStrategy::TimeFreq: return "time_freq";
    case MaskStrategy::SpaceTime: return "space_time";
  }
  return "?";
}

MaskStrategy parse_strategy(const std::string& s) {
  if (s == "random") return MaskStrategy::Random;
  if (s == "time_freq") return MaskStrategy::TimeFreq;
  if (s == "space_time") return MaskStrategy::SpaceTime;
  throw std::invalid_argument("unknown mask strategy '" + s +
                              "' (expected random, time_freq or space_time)");
}

std::size_t masked_count(std::size_t num_tokens, double ratio) {
  const double exact = ratio * static_cast<double>(num_tokens);
  return static_cast<std::size_t>(std::ceil(exact - 1e-9));
}

std::uint64_t mask_seed(std::uint64_t run_seed, std::uint64_t epoch, std::uint64_t sample,
                        std::uint64_t view, Modality modality) {
  Rng r(run_seed, {0x6d61736bULL, epoch, sample, view,
                   modality == Modality::Audio ? 1ULL : 2ULL});
  return r.next_u64();
}

namespace {

struct StructuredCounts {
  std::size_t time_slots = 0;
  std::size_t other_slots = 0;
  std::size_t covered = 0;
};

// Picks how many whole time slots (of T) and whole other-axis slots (of S)
// to mask so that their union stays <= target, preferring a 2:1 split of
// other:time masked fractions among choices whose random top-up stays within
// 2% of L; otherwise the smallest top-up wins.
StructuredCounts choose_counts(std::size_t T, std::size_t S, std::size_t target) {
  const std::size_t L = T * S;
  const std::size_t topup_budget = static_cast<std::size_t>(std::floor(0.02 * static_cast<double>(L)));
  StructuredCounts best;
  bool best_in_budget = false;
  double best_dev = std::numeric_limits<double>::infinity();
  std::size_t best_rem = std::numeric_limits<std::size_t>::max();
  for (std::size_t kt = 0; kt <= T; ++kt)
    for (std::size_t ks = 0; ks <= S; ++ks) {
      const std::size_t covered = kt * S + ks * T - kt * ks;
      if (covered > target) continue;
      const std::size_t rem = target - covered;
      const double dev = std::abs(static_cast<double>(ks) / static_cast<double>(S) -
                                  2.0 * static_cast<double>(kt) / static_cast<double>(T));
      const bool in_budget = rem <= topup_budget;
      bool better;
      if (in_budget != best_in_budget) better = in_budget;
      else if (in_budget) better = dev < best_dev - 1e-12 || (std::abs(dev - best_dev) <= 1e-12 && rem < best_rem);
      else better = rem < best_rem || (rem == best_rem && dev < best_dev - 1e-12);
      if (better) {
        best = {kt, ks, covered};
        best_in_budget = in_budget;
        best_dev = dev;
        best_rem = rem;
      }
    }
  return best;
}

}  // namespace

MaskPlan make_mask(std::size_t num_tokens, const std::vector<std::size_t>& grid, double ratio,
                   MaskStrategy strategy, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("make_mask: ratio " + std::to_string(ratio) +
                                " outside [0, 1)");
  }
  const std::size_t target = masked_count(num_tokens, ratio);
  Rng rng(seed);
  std::vector<bool> is_masked(num_tokens, false);

  if (strategy == MaskStrategy::Random) {
    const auto perm = rng.permutation(num_tokens);
    for (std::size_t i = 0; i < target; ++i) is_masked[perm[i]] = true;
  } else {
    std::size_t grid_total = 1;
    for (std::size_t g : grid) grid_total *= g;
    const bool ok = (strategy == MaskStrategy::TimeFreq && grid.size() == 2) ||
                    (strategy == MaskStrategy::SpaceTime && grid.size() == 3);
    if (!ok || grid_total != num_tokens) {
      throw std::invalid_argument(std::string("make_mask: grid does not fit ") +
                                  strategy_name(strategy) + " masking of " +
                                  std::to_string(num_tokens) + " tokens");
    }
    const std::size_t T = grid[0];
    const std::size_t S = num_tokens / T;
    const StructuredCounts counts = choose_counts(T, S, target);
    const auto time_perm = rng.permutation(T);
    const auto other_perm = rng.permutation(S);
    for (std::size_t k = 0; k < counts.time_slots; ++k)
      for (std::size_t s = 0; s < S; ++s) is_masked[time_perm[k] * S + s] = true;
    for (std::size_t k = 0; k < counts.other_slots; ++k)
      for (std::size_t t = 0; t < T; ++t) is_masked[t * S + other_perm[k]] = true;
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < num_tokens; ++i)
      if (!is_masked[i]) free.push_back(i);
    rng.shuffle(free);
    for (std::size_t i = 0; i < target - counts.covered; ++i) is_masked[free[i]] = true;
  }

  MaskPlan plan;
  plan.ratio = ratio;
  plan.strategy = strategy;
  plan.seed = seed;
  for (std::size_t i = 0; i < num_tokens; ++i)
    (is_masked[i] ? plan.masked : plan.kept).push_back(i);
  return plan;
}

MaskPlan keep_all_plan(std::size_t num_tokens) {
  MaskPlan plan;
  plan.kept.resize(num_tokens);
  for (std::size_t i = 0; i < num_tokens; ++i) plan.kept[i] = i;
  return plan;
}

namespace {

std::vector<std::size_t> visible_index(const MaskPlan& plan, bool has_cls) {
  std::vector<std::size_t> idx;
  idx.reserve(plan.kept.size() + 1);
  if (has_cls) idx.push_back(0);
  for (std::size_t k : plan.kept) idx.push_back(k + (has_cls ? 1 : 0));
  return idx;
}

std::vector<std::size_t> restore_index(const MaskPlan& plan, bool has_cls) {
  const std::size_t offset = has_cls ? 1 : 0;
  const std::size_t mask_row = offset + plan.kept.size();
  std::vector<std::size_t> idx(offset + plan.num_tokens(), mask_row);
  if (has_cls) idx[0] = 0;
  for (std::size_t r = 0; r < plan.kept.size(); ++r) idx[offset + plan.kept[r]] = offset + r;
  return idx;
}

}  // namespace

Var apply_mask(Var tokens, const MaskPlan& plan, bool has_cls) {
  const std::size_t expected = plan.num_tokens() + (has_cls ? 1 : 0);
  if (tokens.rows() != expected) {
    throw std::invalid_argument("apply_mask: plan covers " + std::to_string(plan.num_tokens()) +
                                " tokens but sequence has " + std::to_string(tokens.rows()) +
                                " rows");
  }
  const auto idx = visible_index(plan, has_cls);
  return ops::gather_rows(tokens, idx);
}

TokenSequence apply_mask(const TokenSequence& seq, const MaskPlan& plan) {
  Tape tape;
  Var v = apply_mask(tape.constant(seq.tokens), plan, seq.has_cls);
  return TokenSequence{v.value(), seq.grid, seq.has_cls, seq.modality};
}

Var restore_order(Var visible, const MaskPlan& plan, Var mask_token, bool has_cls) {
  const std::size_t offset = has_cls ? 1 : 0;
  if (visible.rows() != offset + plan.kept.size()) {
    throw std::invalid_argument("restore_order: " + std::to_string(visible.rows()) +
                                " visible rows for a plan keeping " +
                                std::to_string(plan.kept.size()) + " tokens");
  }
  if (mask_token.value().size() != visible.cols()) {
    throw std::invalid_argument("restore_order: mask token width " +
                                std::to_string(mask_token.value().size()) + " vs " +
                                std::to_string(visible.cols()));
  }
  Var stacked = ops::concat({visible, mask_token}, 0);
  const auto idx = restore_index(plan, has_cls);
  return ops::gather_rows(stacked, idx);
}

Tensor restore_order(const Tensor& visible, const MaskPlan& plan, const Tensor& mask_token,
                     bool has_cls) {
  Tape tape;
  return restore_order(tape.constant(visible), plan, tape.constant(mask_token), has_cls).value();
}

SecondView second_view(const TokenSequence& seq, double ratio, MaskStrategy strategy,
                       std::uint64_t seed) {
  const std::uint64_t view_seed = Rng(seed, {0x76696577ULL, 2}).next_u64();
  MaskPlan plan = make_mask(seq.num_patches(), seq.grid, ratio, strategy, view_seed);
  TokenSequence visible = apply_mask(seq, plan);
  return SecondView{std::move(plan), std::move(visible)};
}

}  // namespace mavil
