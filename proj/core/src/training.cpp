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

#include "mavil/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "mavil/hash.hpp"

namespace mavil {
namespace {

constexpr std::uint64_t kStageTag[] = {0x5171, 0x5172};

std::uint64_t stage_tag(Stage s) { return kStageTag[s == Stage::Stage1 ? 0 : 1]; }

Tensor video_clip(const ModelConfig& cfg, const PairedInstance& inst, std::size_t start = 0) {
  return clip_frames(inst.video, start, cfg.video.frames);
}

Var stack_rows(const std::vector<Var>& rows) { return ops::concat(std::span<const Var>(rows), 0); }

Tensor layer_norm_rows(const Tensor& x) {
  Tape tape;
  return ops::layer_norm(tape.constant(x), 1e-6).value();
}

void accumulate(GradMap& into, const GradMap& g, double weight) {
  for (const auto& [name, t] : g) {
    auto it = into.find(name);
    if (it == into.end()) {
      Tensor scaled = t;
      for (double& v : scaled.vec()) v *= weight;
      into.emplace(name, std::move(scaled));
    } else {
      auto& dst = it->second.vec();
      const auto& src = t.vec();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weight * src[i];
    }
  }
}

AdamWConfig adamw_config(const TrainConfig& t) {
  AdamWConfig c;
  c.beta1 = t.beta1;
  c.beta2 = t.beta2;
  c.weight_decay = t.weight_decay;
  return c;
}

}  // namespace

// ---------------------------------------------------------------- teacher

std::string snapshot_fingerprint(const ModelBundle& model) {
  return hex64(fnv1a64(model.config.fingerprint() + ":" + params_digest(model.params)));
}

TeacherSnapshot make_teacher(const ModelBundle& model, Stage stage, std::size_t iteration) {
  return TeacherSnapshot{model, snapshot_fingerprint(model), stage, iteration};
}

TeacherTargets make_teacher_targets(const TeacherSnapshot& teacher, const ModelConfig& student,
                                    const Tensor& audio_patches, const Tensor& video_patches) {
  if (snapshot_fingerprint(teacher.model) != teacher.fingerprint) {
    throw std::runtime_error("teacher snapshot fingerprint mismatch: recorded " +
                             teacher.fingerprint + ", parameters hash to " +
                             snapshot_fingerprint(teacher.model));
  }
  const ModelConfig& tc = teacher.model.config;
  if (tc.tokenization_fingerprint() != student.tokenization_fingerprint()) {
    throw std::runtime_error("teacher tokenization " + tc.tokenization_fingerprint() +
                             " does not match student tokenization " +
                             student.tokenization_fingerprint());
  }
  if (tc.width != student.decoder_out_dim(Modality::Audio)) {
    throw std::runtime_error("teacher width " + std::to_string(tc.width) +
                             " does not match student target width " +
                             std::to_string(student.decoder_out_dim(Modality::Audio)));
  }
  Tape tape;
  BoundParams bp(tape, teacher.model.params, false);
  Var a = encode_view(bp, tc, Modality::Audio, audio_patches, keep_all_plan(audio_patches.rows()));
  Var v = encode_view(bp, tc, Modality::Video, video_patches, keep_all_plan(video_patches.rows()));
  FusionOutput f = fuse(bp, tc, a, v);
  const std::size_t off = tc.use_cls ? 1 : 0;
  return TeacherTargets{ops::slice(f.a_mm, 0, off, audio_patches.rows()).value(),
                        ops::slice(f.v_mm, 0, off, video_patches.rows()).value()};
}

// ------------------------------------------------------------- pretraining

LossVars pretrain_loss(BoundParams& bp, const ModelConfig& cfg,
                       std::span<const PretrainSample> batch, const ContrastConfig& contrast,
                       Stage stage, ReconPositions positions, bool ctx_target_norm) {
  if (batch.empty()) throw std::invalid_argument("pretrain_loss: empty batch");
  Tape& tape = bp.tape();
  std::vector<Var> recon, a_emb, v_emb, a_bar, v_bar;
  for (const PretrainSample& s : batch) {
    Var a_um = encode_view(bp, cfg, Modality::Audio, *s.audio_patches, s.audio_plan);
    Var v_um = encode_view(bp, cfg, Modality::Video, *s.video_patches, s.video_plan);
    a_emb.push_back(pool_embedding(a_um, cfg.use_cls));
    v_emb.push_back(pool_embedding(v_um, cfg.use_cls));
    if (batch.size() > 1 && contrast.beta != 0.0) {
      a_bar.push_back(pool_embedding(
          encode_view(bp, cfg, Modality::Audio, *s.audio_patches, s.audio_view2), cfg.use_cls));
      v_bar.push_back(pool_embedding(
          encode_view(bp, cfg, Modality::Video, *s.video_patches, s.video_view2), cfg.use_cls));
    }
    FusionOutput f = fuse(bp, cfg, a_um, v_um);
    Var pa = decode(bp, cfg, Modality::Audio, f.a_mm, s.audio_plan);
    Var pv = decode(bp, cfg, Modality::Video, f.v_mm, s.video_plan);
    if (stage == Stage::Stage1) {
      recon.push_back(loss_raw_recon(pa, *s.audio_patches, s.audio_plan, pv, *s.video_patches,
                                     s.video_plan));
    } else {
      if (s.targets == nullptr) throw std::invalid_argument("pretrain_loss: stage 2 needs targets");
      const Tensor ta = ctx_target_norm ? layer_norm_rows(s.targets->audio) : s.targets->audio;
      const Tensor tv = ctx_target_norm ? layer_norm_rows(s.targets->video) : s.targets->video;
      recon.push_back(loss_ctx_recon(pa, ta, s.audio_plan, pv, tv, s.video_plan, positions));
    }
  }
  Var recon_sum = recon.front();
  for (std::size_t i = 1; i < recon.size(); ++i) recon_sum = ops::add(recon_sum, recon[i]);
  Var recon_mean = ops::scale(recon_sum, 1.0 / static_cast<double>(recon.size()));
  Var inter = tape.constant(Tensor::scalar(0.0));
  Var intra = tape.constant(Tensor::scalar(0.0));
  if (batch.size() > 1 && contrast.alpha != 0.0)
    inter = loss_inter(stack_rows(a_emb), stack_rows(v_emb), contrast.tau_inter);
  if (batch.size() > 1 && contrast.beta != 0.0) {
    intra = loss_intra(stack_rows(a_emb), stack_rows(a_bar), stack_rows(v_emb), stack_rows(v_bar),
                       contrast.tau_intra);
  }
  return combine_losses(recon_mean, inter, intra, contrast);
}

PretrainSample make_sample(const ModelConfig& cfg, const MaskConfig& mask, std::uint64_t seed,
                           std::size_t epoch, std::size_t index, const Tensor* audio_patches,
                           const Tensor* video_patches) {
  PretrainSample s;
  s.audio_patches = audio_patches;
  s.video_patches = video_patches;
  const auto na = cfg.audio.num_tokens(), nv = cfg.video.num_tokens();
  const auto ga = cfg.audio.grid(), gv = cfg.video.grid();
  s.audio_plan = make_mask(na, ga, mask.ratio_audio, mask.strategy_audio,
                           mask_seed(seed, epoch, index, 0, Modality::Audio));
  s.video_plan = make_mask(nv, gv, mask.ratio_video, mask.strategy_video,
                           mask_seed(seed, epoch, index, 0, Modality::Video));
  s.audio_view2 = make_mask(na, ga, mask.ratio_audio, mask.strategy_audio,
                            mask_seed(seed, epoch, index, 1, Modality::Audio));
  s.video_view2 = make_mask(nv, gv, mask.ratio_video, mask.strategy_video,
                            mask_seed(seed, epoch, index, 1, Modality::Video));
  return s;
}

Pretrainer::Pretrainer(TrainState state, const Dataset& data, PretrainOptions options,
                       const TeacherSnapshot* teacher)
    : state_(std::move(state)), data_(&data), opts_(std::move(options)), teacher_(teacher) {
  const ModelConfig& cfg = state_.model.config;
  cfg.validate();
  opts_.contrast.validate();
  const TrainConfig& t = opts_.train;
  if (t.batch == 0 || t.accum_steps == 0) throw std::invalid_argument("train: batch and accum_steps must be >= 1");
  if (state_.stage == Stage::Stage2 && teacher_ == nullptr)
    throw std::invalid_argument("Pretrainer: stage 2 requires a teacher snapshot");
  if (state_.stage == Stage::Stage2 && cfg.target_kind != TargetKind::LatentH)
    throw std::invalid_argument("Pretrainer: stage 2 student must predict latent targets");
  micro_per_epoch_ = data.items.size() / t.batch;
  steps_per_epoch_ = micro_per_epoch_ / t.accum_steps;
  if (steps_per_epoch_ == 0) {
    throw std::invalid_argument("Pretrainer: " + std::to_string(data.items.size()) +
                                " instances cannot fill one step of batch " +
                                std::to_string(t.batch) + " x accum " +
                                std::to_string(t.accum_steps));
  }
  audio_patches_.reserve(data.items.size());
  video_patches_.reserve(data.items.size());
  for (const PairedInstance& inst : data.items) {
    audio_patches_.push_back(patchify(cfg, Modality::Audio, inst.audio));
    video_patches_.push_back(patchify(cfg, Modality::Video, video_clip(cfg, inst)));
  }
  if (teacher_ != nullptr) {
    targets_.reserve(data.items.size());
    for (std::size_t i = 0; i < data.items.size(); ++i)
      targets_.push_back(make_teacher_targets(*teacher_, cfg, audio_patches_[i], video_patches_[i]));
  }
  schedule_.base_lr = t.lr_base;
  schedule_.warmup_epochs = t.warmup_epochs;
  schedule_.total_epochs = static_cast<double>(t.epochs);
  schedule_.min_lr = t.min_lr;
  schedule_.steps_per_epoch = steps_per_epoch_;
  schedule_.batch_size = t.batch * t.accum_steps;
  state_.optimizer.config = adamw_config(t);
}

std::uint64_t Pretrainer::stream_seed() const {
  return Rng(opts_.train.seed, {stage_tag(state_.stage), state_.iteration}).key();
}

std::vector<PretrainSample> Pretrainer::micro_batch(std::uint64_t micro_index) const {
  const std::size_t epoch = micro_index / micro_per_epoch_;
  const std::size_t pos = micro_index % micro_per_epoch_;
  const std::uint64_t seed = stream_seed();
  const auto perm = Rng(seed, {0xE90C, epoch}).permutation(data_->items.size());
  const std::size_t b = opts_.train.batch;
  std::vector<PretrainSample> out;
  out.reserve(b);
  for (std::size_t i = pos * b; i < (pos + 1) * b; ++i) {
    const std::size_t idx = perm[i];
    PretrainSample s = make_sample(state_.model.config, opts_.mask, seed, epoch, idx,
                                   &audio_patches_[idx], &video_patches_[idx]);
    if (!targets_.empty()) s.targets = &targets_[idx];
    out.push_back(std::move(s));
  }
  return out;
}

StepRecord Pretrainer::step() {
  const TrainConfig& t = opts_.train;
  const std::uint64_t step = state_.global_step;
  StepRecord rec;
  rec.stage = state_.stage;
  rec.iteration = state_.iteration;
  rec.step = step;
  rec.epoch = step / steps_per_epoch_;
  rec.lr = lr_at(schedule_, step);
  rec.loss.stage = state_.stage;
  rec.loss.alpha = opts_.contrast.alpha;
  rec.loss.beta = opts_.contrast.beta;

  GradMap grads;
  const double w = 1.0 / static_cast<double>(t.accum_steps);
  for (std::size_t a = 0; a < t.accum_steps; ++a) {
    const auto batch = micro_batch(step * t.accum_steps + a);
    Tape tape(t.precision);
    BoundParams bp(tape, state_.model.params);
    LossVars lv = pretrain_loss(bp, state_.model.config, batch, opts_.contrast, state_.stage,
                                t.ctx_positions, t.ctx_target_norm);
    const LossBreakdown lb = breakdown(lv, opts_.contrast, state_.stage);
    if (!std::isfinite(lb.total)) {
      throw std::runtime_error(std::string(stage_name(state_.stage)) + " iteration " +
                               std::to_string(state_.iteration) + " step " +
                               std::to_string(step) + ": non-finite loss (recon " +
                               std::to_string(lb.recon) + ", inter " + std::to_string(lb.inter) +
                               ", intra " + std::to_string(lb.intra) + ")");
    }
    rec.loss.recon += w * lb.recon;
    rec.loss.inter += w * lb.inter;
    rec.loss.intra += w * lb.intra;
    rec.loss.total += w * lb.total;
    accumulate(grads, bp.backward(lv.total), w);
  }
  adamw_step(state_.model.params, grads, state_.optimizer, rec.lr);
  ++state_.global_step;
  return rec;
}

void Pretrainer::run(const StepCallback& on_step, std::optional<std::size_t> until_step) {
  const std::size_t end = std::min(until_step.value_or(total_steps()), total_steps());
  while (state_.global_step < end) {
    const StepRecord rec = step();
    if (on_step) on_step(rec);
  }
}

TrainState fresh_state(const ModelConfig& cfg, const TrainConfig& train, Stage stage,
                       std::size_t iteration) {
  TrainState s;
  s.model = init_model(cfg, Rng(train.seed, {stage_tag(stage), iteration, 0x1A17}).key());
  s.optimizer.config = adamw_config(train);
  s.stage = stage;
  s.iteration = iteration;
  return s;
}

TrainState pretrain_stage1(const ModelConfig& cfg, const Dataset& data,
                           const PretrainOptions& opts, const StepCallback& on_step) {
  if (cfg.target_kind != TargetKind::RawPatches)
    throw std::invalid_argument("pretrain_stage1: model must predict raw patches");
  Pretrainer p(fresh_state(cfg, opts.train, Stage::Stage1, 0), data, opts);
  p.run(on_step);
  return std::move(p.state());
}

ModelConfig student_config(const ModelConfig& teacher) {
  ModelConfig c = teacher;
  c.target_kind = TargetKind::LatentH;
  return c;
}

TrainState student_state(const TeacherSnapshot& teacher, const TrainConfig& train,
                         std::size_t iteration) {
  if (iteration == 0) throw std::invalid_argument("stage 2: iteration starts at 1");
  TrainState state = fresh_state(student_config(teacher.model.config), train, Stage::Stage2, iteration);
  if (train.warm_start) {
    for (auto& [name, t] : state.model.params) {
      if (teacher.model.params.contains(name) &&
          teacher.model.params.at(name).shape() == t.shape())
        t = teacher.model.params.at(name);
    }
  }
  state.parent_fingerprint = teacher.fingerprint;
  return state;
}

TrainState pretrain_stage2(const TeacherSnapshot& teacher, const Dataset& data,
                           const PretrainOptions& opts, std::size_t iteration,
                           const StepCallback& on_step) {
  Pretrainer p(student_state(teacher, opts.train, iteration), data, opts, &teacher);
  p.run(on_step);
  return std::move(p.state());
}

std::vector<LineageEntry> self_train(const ModelConfig& cfg, const Dataset& data,
                                     const PretrainOptions& opts, const StepCallback& on_step) {
  std::vector<LineageEntry> lineage;
  TrainState s1 = pretrain_stage1(cfg, data, opts, on_step);
  const std::string fp1 = snapshot_fingerprint(s1.model);
  lineage.push_back(LineageEntry{std::move(s1), fp1, ""});
  for (std::size_t k = 1; k <= opts.train.k_iters; ++k) {
    const LineageEntry& prev = lineage.back();
    const TeacherSnapshot teacher =
        make_teacher(prev.state.model, prev.state.stage, prev.state.iteration);
    TrainState sk = pretrain_stage2(teacher, data, opts, k, on_step);
    const std::string fp = snapshot_fingerprint(sk.model);
    lineage.push_back(LineageEntry{std::move(sk), fp, teacher.fingerprint});
  }
  return lineage;
}

// ---------------------------------------------------------------- sampling

SamplerWeights sampler_weights(const std::vector<std::vector<std::size_t>>& labels,
                               std::size_t num_classes, double eps) {
  std::vector<double> counts(num_classes, 0.0);
  for (const auto& ls : labels) {
    for (std::size_t c : ls) {
      if (c >= num_classes) {
        throw std::invalid_argument("sampler_weights: label " + std::to_string(c) +
                                    " out of range for " + std::to_string(num_classes) +
                                    " classes");
      }
      counts[c] += 1.0;
    }
  }
  SamplerWeights w;
  w.class_weights.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) w.class_weights[c] = 1000.0 / (counts[c] + eps);
  w.instance_weights.reserve(labels.size());
  for (const auto& ls : labels) {
    double s = 0.0;
    for (std::size_t c : ls) s += w.class_weights[c];
    w.instance_weights.push_back(s);
  }
  return w;
}

std::vector<std::size_t> weighted_sample(const SamplerWeights& weights, std::size_t draws, Rng& rng) {
  const auto& iw = weights.instance_weights;
  if (iw.empty()) throw std::invalid_argument("weighted_sample: no instances");
  std::vector<double> cdf(iw.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < iw.size(); ++i) {
    if (!(iw[i] >= 0.0)) throw std::invalid_argument("weighted_sample: negative weight");
    acc += iw[i];
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) throw std::invalid_argument("weighted_sample: all weights are zero");
  std::vector<std::size_t> out(draws);
  for (auto& d : out) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    d = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), iw.size() - 1);
  }
  return out;
}

// -------------------------------------------------------------- fine-tuning

const char* finetune_loss_name(FinetuneLoss l) { return l == FinetuneLoss::BCE ? "bce" : "ce"; }

FinetuneLoss parse_finetune_loss(const std::string& s) {
  if (s == "bce") return FinetuneLoss::BCE;
  if (s == "ce") return FinetuneLoss::CE;
  throw std::invalid_argument("unknown fine-tune loss '" + s + "' (expected bce|ce)");
}

ClassifierModel finetune(const ModelBundle& pretrained, const Dataset& train,
                         const FinetuneConfig& cfg, const FinetuneCallback& on_step) {
  const ModelConfig& mc = pretrained.config;
  if (cfg.batch == 0) throw std::invalid_argument("finetune: batch must be >= 1");
  if (!(cfg.mask_ratio >= 0.0 && cfg.mask_ratio < 1.0))
    throw std::invalid_argument("finetune: mask_ratio must be in [0, 1)");
  ClassifierModel out;
  out.model = mc;
  out.head = ClassifierConfig{cfg.mode, train.num_classes, cfg.fusion_depth};
  out.params = init_classifier(pretrained, out.head, Rng(cfg.seed, {0xF17E}).key());

  const std::size_t n = train.items.size();
  const std::size_t per_epoch = cfg.weighted_sampling && cfg.sample_size ? cfg.sample_size : n;
  const std::size_t steps_per_epoch = per_epoch / cfg.batch;
  if (steps_per_epoch == 0) {
    throw std::invalid_argument("finetune: " + std::to_string(per_epoch) +
                                " samples per epoch cannot fill a batch of " +
                                std::to_string(cfg.batch));
  }
  const bool use_a = cfg.mode != FinetuneMode::V;
  const bool use_v = cfg.mode != FinetuneMode::A;
  std::vector<Tensor> ap(n), vp(n);
  std::vector<std::vector<std::size_t>> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (use_a) ap[i] = patchify(mc, Modality::Audio, train.items[i].audio);
    if (use_v) vp[i] = patchify(mc, Modality::Video, video_clip(mc, train.items[i]));
    labels[i] = train.items[i].labels;
  }
  SamplerWeights weights;
  if (cfg.weighted_sampling) weights = sampler_weights(labels, train.num_classes);

  LrSchedule sched;
  sched.base_lr = cfg.lr_base;
  sched.warmup_epochs = cfg.warmup_epochs;
  sched.total_epochs = static_cast<double>(cfg.epochs);
  sched.min_lr = cfg.min_lr;
  sched.steps_per_epoch = steps_per_epoch;
  sched.batch_size = cfg.batch;
  OptimizerState opt;
  opt.config.weight_decay = cfg.weight_decay;
  const LrMultiplier mult = [&cfg](const std::string& name) {
    return cfg.mode == FinetuneMode::AV && name.rfind("video_enc.", 0) == 0 ? cfg.video_lr_mult
                                                                            : 1.0;
  };

  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order_rng(cfg.seed, {0x0DE7, epoch});
    const std::vector<std::size_t> order =
        cfg.weighted_sampling ? weighted_sample(weights, per_epoch, order_rng) : order_rng.permutation(n);
    for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
      Tape tape;
      BoundParams bp(tape, out.params);
      std::vector<Var> rows;
      std::vector<std::size_t> primary;
      Tensor multi_hot(Shape{cfg.batch, train.num_classes});
      for (std::size_t j = 0; j < cfg.batch; ++j) {
        const std::size_t slot = b * cfg.batch + j;
        const std::size_t idx = order[slot];
        std::optional<Var> a, v;
        if (use_a) {
          const MaskPlan plan = make_mask(ap[idx].rows(), mc.audio.grid(), cfg.mask_ratio,
                                          cfg.strategy_audio,
                                          mask_seed(cfg.seed, epoch, slot, 0, Modality::Audio));
          a = encode_view(bp, mc, Modality::Audio, ap[idx], plan);
        }
        if (use_v) {
          const MaskPlan plan = make_mask(vp[idx].rows(), mc.video.grid(), cfg.mask_ratio,
                                          cfg.strategy_video,
                                          mask_seed(cfg.seed, epoch, slot, 0, Modality::Video));
          v = encode_view(bp, mc, Modality::Video, vp[idx], plan);
        }
        rows.push_back(classify(bp, mc, out.head, a, v));
        primary.push_back(labels[idx].front());
        for (std::size_t c : labels[idx]) multi_hot.at(j, c) = 1.0;
      }
      Var logits = stack_rows(rows);
      Var loss = cfg.loss == FinetuneLoss::CE ? ops::cross_entropy(logits, primary)
                                              : ops::bce_with_logits(logits, multi_hot);
      const double loss_value = loss.value().item();
      if (!std::isfinite(loss_value))
        throw std::runtime_error("finetune step " + std::to_string(step) + ": non-finite loss");
      const GradMap grads = bp.backward(loss);
      const double lr = lr_at(sched, step);
      adamw_step(out.params, grads, opt, lr, mult);
      if (on_step) {
        on_step(FinetuneRecord{step, epoch, use_a ? lr : 0.0,
                               use_v ? lr * mult("video_enc.patch.w") : 0.0, loss_value});
      }
    }
  }
  return out;
}

Tensor predict_logits(const ClassifierModel& model, const PairedInstance& inst,
                      std::size_t clip_start) {
  const ModelConfig& mc = model.model;
  Tape tape;
  BoundParams bp(tape, model.params, false);
  std::optional<Var> a, v;
  if (model.head.mode != FinetuneMode::V) {
    const Tensor p = patchify(mc, Modality::Audio, inst.audio);
    a = encode_view(bp, mc, Modality::Audio, p, keep_all_plan(p.rows()));
  }
  if (model.head.mode != FinetuneMode::A) {
    const Tensor p = patchify(mc, Modality::Video, video_clip(mc, inst, clip_start));
    v = encode_view(bp, mc, Modality::Video, p, keep_all_plan(p.rows()));
  }
  return classify(bp, mc, model.head, a, v).value().reshaped(Shape{model.head.num_classes});
}

std::vector<std::size_t> clip_starts(std::size_t total_frames, std::size_t clip_frames,
                                     std::size_t clips) {
  if (clips == 0) throw std::invalid_argument("clip_starts: need at least one clip");
  if (clip_frames > total_frames) {
    throw std::invalid_argument("clip_starts: clip of " + std::to_string(clip_frames) +
                                " frames exceeds " + std::to_string(total_frames));
  }
  std::vector<std::size_t> out(clips, 0);
  if (clips == 1) return out;
  const double span = static_cast<double>(total_frames - clip_frames);
  for (std::size_t i = 0; i < clips; ++i)
    out[i] = static_cast<std::size_t>(std::lround(span * static_cast<double>(i) /
                                                  static_cast<double>(clips - 1)));
  return out;
}

}  // namespace mavil
