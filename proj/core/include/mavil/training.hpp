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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mavil/data_synth.hpp"
#include "mavil/model.hpp"
#include "mavil/objectives.hpp"
#include "mavil/optim.hpp"

namespace mavil {

struct MaskConfig {
  double ratio_audio = 0.8;
  double ratio_video = 0.8;
  MaskStrategy strategy_audio = MaskStrategy::Random;
  MaskStrategy strategy_video = MaskStrategy::Random;
  bool operator==(const MaskConfig&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t k_iters = 3;
  std::size_t batch = 16;
  std::size_t accum_steps = 1;  // optimizer batch = batch * accum_steps
  double lr_base = 2e-4;
  double warmup_epochs = 4;
  double min_lr = 1e-6;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.95;
  std::uint64_t seed = 0;
  bool warm_start = false;       // stage-2 student copies the teacher instead of re-initializing
  bool ctx_target_norm = false;  // layer-norm teacher rows before regression
  ReconPositions ctx_positions = ReconPositions::MaskedOnly;
  Precision precision = Precision::F64;
  bool operator==(const TrainConfig&) const = default;
};

struct PretrainOptions {
  TrainConfig train;
  MaskConfig mask;
  ContrastConfig contrast;
};

// ---------------------------------------------------------------- teacher

struct TeacherTargets {
  Tensor audio;  // N x H, one row per audio patch token
  Tensor video;  // M x H
};

// Frozen copy of a trained model that produces contextualized targets.
struct TeacherSnapshot {
  ModelBundle model;
  std::string fingerprint;  // config fingerprint + parameter digest
  Stage stage = Stage::Stage1;
  std::size_t iteration = 0;
};

std::string snapshot_fingerprint(const ModelBundle& model);
TeacherSnapshot make_teacher(const ModelBundle& model, Stage stage, std::size_t iteration);

// Complete-view inputs through the teacher encoders and fusion; CLS rows are
// dropped. Throws if the snapshot was modified or tokenization differs from
// the student's.
TeacherTargets make_teacher_targets(const TeacherSnapshot& teacher, const ModelConfig& student,
                                    const Tensor& audio_patches, const Tensor& video_patches);

// ------------------------------------------------------------- pretraining

struct PretrainSample {
  const Tensor* audio_patches = nullptr;
  const Tensor* video_patches = nullptr;
  MaskPlan audio_plan;
  MaskPlan video_plan;
  MaskPlan audio_view2;
  MaskPlan video_view2;
  const TeacherTargets* targets = nullptr;  // stage 2 only
};

// Full masked forward for one batch: both views through the uni-modal
// encoders, the first view through fusion and decoders, then the stage's
// total objective.
LossVars pretrain_loss(BoundParams& bp, const ModelConfig& cfg,
                       std::span<const PretrainSample> batch, const ContrastConfig& contrast,
                       Stage stage, ReconPositions positions = ReconPositions::MaskedOnly,
                       bool ctx_target_norm = false);

// Draws the four mask plans for sample `index` in `epoch`.
PretrainSample make_sample(const ModelConfig& cfg, const MaskConfig& mask, std::uint64_t seed,
                           std::size_t epoch, std::size_t index, const Tensor* audio_patches,
                           const Tensor* video_patches);

struct TrainState {
  ModelBundle model;
  OptimizerState optimizer;
  std::uint64_t global_step = 0;
  Stage stage = Stage::Stage1;
  std::size_t iteration = 0;        // 0 for stage 1, k for the k-th stage-2 run
  std::string parent_fingerprint;   // teacher snapshot for stage 2
};

struct StepRecord {
  Stage stage = Stage::Stage1;
  std::size_t iteration = 0;
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

using StepCallback = std::function<void(const StepRecord&)>;

// Stage-1 / stage-2 training loop over an in-memory dataset. Batches drop
// the last partial batch; all randomness derives from train.seed.
class Pretrainer {
 public:
  Pretrainer(TrainState state, const Dataset& data, PretrainOptions options,
             const TeacherSnapshot* teacher = nullptr);

  std::size_t steps_per_epoch() const { return steps_per_epoch_; }
  std::size_t total_steps() const { return schedule_.total_steps(); }
  const LrSchedule& schedule() const { return schedule_; }
  const TrainState& state() const { return state_; }
  TrainState& state() { return state_; }

  StepRecord step();
  // Steps until `until_step` (default: end of schedule).
  void run(const StepCallback& on_step = {}, std::optional<std::size_t> until_step = std::nullopt);

 private:
  std::vector<PretrainSample> micro_batch(std::uint64_t micro_index) const;
  std::uint64_t stream_seed() const;

  TrainState state_;
  const Dataset* data_;
  PretrainOptions opts_;
  const TeacherSnapshot* teacher_;
  std::vector<Tensor> audio_patches_;
  std::vector<Tensor> video_patches_;
  std::vector<TeacherTargets> targets_;
  std::size_t micro_per_epoch_ = 0;
  std::size_t steps_per_epoch_ = 0;
  LrSchedule schedule_;
};

TrainState fresh_state(const ModelConfig& cfg, const TrainConfig& train, Stage stage,
                       std::size_t iteration);

TrainState pretrain_stage1(const ModelConfig& cfg, const Dataset& data,
                           const PretrainOptions& opts, const StepCallback& on_step = {});

// Student config derived from a teacher: same geometry, latent targets.
ModelConfig student_config(const ModelConfig& teacher);

// Fresh (or, with train.warm_start, teacher-initialized) stage-2 student.
TrainState student_state(const TeacherSnapshot& teacher, const TrainConfig& train,
                         std::size_t iteration);

TrainState pretrain_stage2(const TeacherSnapshot& teacher, const Dataset& data,
                           const PretrainOptions& opts, std::size_t iteration,
                           const StepCallback& on_step = {});

struct LineageEntry {
  TrainState state;
  std::string fingerprint;          // snapshot fingerprint of this model
  std::string teacher_fingerprint;  // empty for stage 1
};

// Stage 1 followed by k_iters stage-2 runs, each taught by the previous model.
std::vector<LineageEntry> self_train(const ModelConfig& cfg, const Dataset& data,
                                     const PretrainOptions& opts, const StepCallback& on_step = {});

// ---------------------------------------------------------------- sampling

struct SamplerWeights {
  std::vector<double> class_weights;     // w_c = 1000 / (count_c + eps)
  std::vector<double> instance_weights;  // sum of w_c over the instance's labels
};

SamplerWeights sampler_weights(const std::vector<std::vector<std::size_t>>& labels,
                               std::size_t num_classes, double eps = 0.01);

// Draws with replacement, probability proportional to instance weight.
std::vector<std::size_t> weighted_sample(const SamplerWeights& weights, std::size_t draws, Rng& rng);

// -------------------------------------------------------------- fine-tuning

enum class FinetuneLoss { BCE, CE };
const char* finetune_loss_name(FinetuneLoss l);
FinetuneLoss parse_finetune_loss(const std::string& s);

struct FinetuneConfig {
  FinetuneMode mode = FinetuneMode::A;
  double mask_ratio = 0.2;
  MaskStrategy strategy_audio = MaskStrategy::TimeFreq;
  MaskStrategy strategy_video = MaskStrategy::SpaceTime;
  double video_lr_mult = 0.5;
  FinetuneLoss loss = FinetuneLoss::BCE;
  std::size_t epochs = 60;
  std::size_t batch = 16;
  double lr_base = 1e-3;
  double warmup_epochs = 4;
  double min_lr = 1e-6;
  double weight_decay = 1e-5;
  bool weighted_sampling = false;
  std::size_t sample_size = 0;  // draws per epoch when weighted; 0 = dataset size
  std::size_t fusion_depth = 2;
  std::uint64_t seed = 0;
  bool operator==(const FinetuneConfig&) const = default;
};

struct ClassifierModel {
  ModelConfig model;
  ClassifierConfig head;
  ParamStore params;
};

struct FinetuneRecord {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double lr_audio = 0.0;
  double lr_video = 0.0;
  double loss = 0.0;
};

using FinetuneCallback = std::function<void(const FinetuneRecord&)>;

ClassifierModel finetune(const ModelBundle& pretrained, const Dataset& train,
                         const FinetuneConfig& cfg, const FinetuneCallback& on_step = {});

// Unmasked evaluation forward on one clip of the instance: [C] logits.
Tensor predict_logits(const ClassifierModel& model, const PairedInstance& inst,
                      std::size_t clip_start = 0);

// Clip start frames spread uniformly over the instance's duration.
std::vector<std::size_t> clip_starts(std::size_t total_frames, std::size_t clip_frames,
                                     std::size_t clips);

}  // namespace mavil
