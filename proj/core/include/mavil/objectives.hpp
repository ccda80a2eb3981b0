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

#include <string>

#include "mavil/autodiff.hpp"
#include "mavil/masking.hpp"

namespace mavil {

struct ContrastConfig {
  double alpha = 0.1;      // inter-modal weight
  double beta = 0.01;      // intra-modal weight
  double tau_inter = 0.1;
  double tau_intra = 1.0;
  void validate() const;
  bool operator==(const ContrastConfig&) const = default;
};

enum class Stage { Stage1, Stage2 };
const char* stage_name(Stage s);

// Which positions the contextualized regression runs over.
enum class ReconPositions { MaskedOnly, All };

struct LossBreakdown {
  double recon = 0.0;
  double inter = 0.0;
  double intra = 0.0;
  double total = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  Stage stage = Stage::Stage1;
};

// Mean squared error over the masked rows of `pred` against `target` (both
// one row per patch token). Mean runs over masked rows and their elements;
// an empty masked set gives 0.
Var masked_mse(Var pred, Var target, const MaskPlan& plan);

// Audio term over masked audio patches plus video term over masked video
// patches. Throws when neither modality has a masked token.
Var loss_raw_recon(Var pred_a, const Tensor& target_a, const MaskPlan& plan_a, Var pred_v,
                   const Tensor& target_v, const MaskPlan& plan_v);

// Same shape as loss_raw_recon with per-token teacher rows as targets.
Var loss_ctx_recon(Var pred_a, const Tensor& teacher_a, const MaskPlan& plan_a, Var pred_v,
                   const Tensor& teacher_v, const MaskPlan& plan_v,
                   ReconPositions positions = ReconPositions::MaskedOnly);

// -(1/B) sum_i log softmax_j(cos(x_i, y_j) / tau)[i].
Var info_nce(Var x, Var y, double tau);
Var loss_inter(Var a_emb, Var v_emb, double tau);
Var loss_intra(Var a_emb, Var a_bar, Var v_emb, Var v_bar, double tau);

struct LossVars {
  Var recon, inter, intra, total;
};

// recon + alpha * inter + beta * intra.
LossVars combine_losses(Var recon, Var inter, Var intra, const ContrastConfig& cfg);
LossBreakdown breakdown(const LossVars& v, const ContrastConfig& cfg, Stage stage);

// Scalar forms.
LossBreakdown total_stage1(double recon, double inter, double intra, const ContrastConfig& cfg);
LossBreakdown total_stage2(double recon, double inter, double intra, const ContrastConfig& cfg);
double info_nce(const Tensor& x, const Tensor& y, double tau);
double loss_inter(const Tensor& a_emb, const Tensor& v_emb, double tau);
double loss_intra(const Tensor& a_emb, const Tensor& a_bar, const Tensor& v_emb,
                  const Tensor& v_bar, double tau);

}  // namespace mavil
