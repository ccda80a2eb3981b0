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

#include "mavil/objectives.hpp"

#include <numeric>
#include <stdexcept>
#include <vector>

namespace mavil {

void ContrastConfig::validate() const {
  if (!(tau_inter > 0.0) || !(tau_intra > 0.0))
    throw std::invalid_argument("contrast: temperatures must be positive");
  if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("contrast: weights must be >= 0");
}

const char* stage_name(Stage s) { return s == Stage::Stage1 ? "stage1" : "stage2"; }

Var masked_mse(Var pred, Var target, const MaskPlan& plan) {
  if (pred.shape() != target.shape()) {
    throw std::invalid_argument("masked_mse: prediction " + shape_str(pred.shape()) +
                                " vs target " + shape_str(target.shape()));
  }
  if (pred.rows() != plan.num_tokens()) {
    throw std::invalid_argument("masked_mse: " + std::to_string(pred.rows()) +
                                " prediction rows for a plan over " +
                                std::to_string(plan.num_tokens()) + " tokens");
  }
  if (plan.masked.empty()) return pred.tape().constant(Tensor::scalar(0.0));
  return ops::mse(ops::gather_rows(pred, plan.masked), ops::gather_rows(target, plan.masked));
}

Var loss_raw_recon(Var pred_a, const Tensor& target_a, const MaskPlan& plan_a, Var pred_v,
                   const Tensor& target_v, const MaskPlan& plan_v) {
  if (plan_a.masked.empty() && plan_v.masked.empty()) {
    throw std::invalid_argument("loss_raw_recon: no masked tokens in either modality");
  }
  Tape& t = pred_a.tape();
  return ops::add(masked_mse(pred_a, t.constant(target_a), plan_a),
                  masked_mse(pred_v, t.constant(target_v), plan_v));
}

Var loss_ctx_recon(Var pred_a, const Tensor& teacher_a, const MaskPlan& plan_a, Var pred_v,
                   const Tensor& teacher_v, const MaskPlan& plan_v, ReconPositions positions) {
  if (pred_a.cols() != teacher_a.cols() || pred_v.cols() != teacher_v.cols()) {
    throw std::invalid_argument("loss_ctx_recon: prediction width " +
                                std::to_string(pred_a.cols()) + "/" +
                                std::to_string(pred_v.cols()) + " vs teacher width " +
                                std::to_string(teacher_a.cols()) + "/" +
                                std::to_string(teacher_v.cols()));
  }
  Tape& t = pred_a.tape();
  if (positions == ReconPositions::All) {
    return ops::add(ops::mse(pred_a, t.constant(teacher_a)), ops::mse(pred_v, t.constant(teacher_v)));
  }
  if (plan_a.masked.empty() && plan_v.masked.empty()) {
    throw std::invalid_argument("loss_ctx_recon: no masked tokens in either modality");
  }
  return ops::add(masked_mse(pred_a, t.constant(teacher_a), plan_a),
                  masked_mse(pred_v, t.constant(teacher_v), plan_v));
}

Var info_nce(Var x, Var y, double tau) {
  if (x.shape() != y.shape()) {
    throw std::invalid_argument("info_nce: batch mismatch " + shape_str(x.shape()) + " vs " +
                                shape_str(y.shape()));
  }
  if (!(tau > 0.0)) throw std::invalid_argument("info_nce: temperature must be positive");
  const std::size_t b = x.rows();
  if (b == 0) throw std::invalid_argument("info_nce: empty batch");
  Var sim = ops::matmul(ops::l2_normalize_rows(x), ops::transpose(ops::l2_normalize_rows(y)));
  std::vector<std::size_t> labels(b);
  std::iota(labels.begin(), labels.end(), std::size_t{0});
  return ops::cross_entropy(ops::scale(sim, 1.0 / tau), labels);
}

Var loss_inter(Var a_emb, Var v_emb, double tau) {
  return ops::scale(ops::add(info_nce(a_emb, v_emb, tau), info_nce(v_emb, a_emb, tau)), 0.5);
}

Var loss_intra(Var a_emb, Var a_bar, Var v_emb, Var v_bar, double tau) {
  if (a_emb.rows() != v_emb.rows()) {
    throw std::invalid_argument("loss_intra: audio batch " + std::to_string(a_emb.rows()) +
                                " vs video batch " + std::to_string(v_emb.rows()));
  }
  return ops::scale(ops::add(info_nce(a_emb, a_bar, tau), info_nce(v_emb, v_bar, tau)), 0.5);
}

LossVars combine_losses(Var recon, Var inter, Var intra, const ContrastConfig& cfg) {
  Var total = ops::add(recon, ops::add(ops::scale(inter, cfg.alpha), ops::scale(intra, cfg.beta)));
  return LossVars{recon, inter, intra, total};
}

LossBreakdown breakdown(const LossVars& v, const ContrastConfig& cfg, Stage stage) {
  return LossBreakdown{v.recon.value().item(), v.inter.value().item(), v.intra.value().item(),
                       v.total.value().item(), cfg.alpha, cfg.beta, stage};
}

namespace {

LossBreakdown scalar_total(double recon, double inter, double intra, const ContrastConfig& cfg,
                           Stage stage) {
  return LossBreakdown{recon, inter, intra, recon + cfg.alpha * inter + cfg.beta * intra,
                       cfg.alpha, cfg.beta, stage};
}

}  // namespace

LossBreakdown total_stage1(double recon, double inter, double intra, const ContrastConfig& cfg) {
  return scalar_total(recon, inter, intra, cfg, Stage::Stage1);
}

LossBreakdown total_stage2(double recon, double inter, double intra, const ContrastConfig& cfg) {
  return scalar_total(recon, inter, intra, cfg, Stage::Stage2);
}

double info_nce(const Tensor& x, const Tensor& y, double tau) {
  Tape t;
  return info_nce(t.constant(x), t.constant(y), tau).value().item();
}

double loss_inter(const Tensor& a_emb, const Tensor& v_emb, double tau) {
  Tape t;
  return loss_inter(t.constant(a_emb), t.constant(v_emb), tau).value().item();
}

double loss_intra(const Tensor& a_emb, const Tensor& a_bar, const Tensor& v_emb,
                  const Tensor& v_bar, double tau) {
  Tape t;
  return loss_intra(t.constant(a_emb), t.constant(a_bar), t.constant(v_emb), t.constant(v_bar), tau)
      .value()
      .item();
}

}  // namespace mavil
