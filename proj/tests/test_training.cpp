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

#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "mavil/evaluation.hpp"
#include "mavil/grad_check.hpp"
#include "mavil/training.hpp"
#include "support.hpp"

using namespace mavil;

namespace {

SynthConfig synth_for(const ModelConfig& cfg, std::size_t per_class, double noise,
                      std::uint64_t seed = 0) {
  SynthConfig sc;
  sc.per_class = per_class;
  sc.noise = noise;
  sc.seed = seed;
  sc.spec_frames = cfg.audio.time_frames;
  sc.spec_bins = cfg.audio.freq_bins;
  sc.video_frames = cfg.video.frames;
  sc.channels = cfg.video.channels;
  sc.height = cfg.video.height;
  sc.width = cfg.video.width;
  sc.square = cfg.video.height / 4;
  return sc;
}

PretrainOptions quick_options(std::size_t epochs, std::size_t batch) {
  PretrainOptions o;
  o.train.epochs = epochs;
  o.train.batch = batch;
  o.train.warmup_epochs = 1;
  o.train.lr_base = 0.05;
  o.train.seed = 3;
  return o;
}

struct Patched {
  std::vector<Tensor> audio, video;
};

Patched patch_all(const ModelConfig& cfg, const Dataset& d) {
  Patched p;
  for (const auto& inst : d.items) {
    p.audio.push_back(patchify(cfg, Modality::Audio, inst.audio));
    p.video.push_back(patchify(cfg, Modality::Video, clip_frames(inst.video, 0, cfg.video.frames)));
  }
  return p;
}

std::vector<double> window_means(const std::vector<double>& xs, std::size_t w) {
  std::vector<double> out;
  for (std::size_t i = 0; i + w <= xs.size(); i += w)
    out.push_back(std::accumulate(xs.begin() + i, xs.begin() + i + w, 0.0) / static_cast<double>(w));
  return out;
}

}  // namespace

TEST_CASE("stage-1 step gradient matches central differences") {
  const ModelConfig cfg = ModelConfig::tiny();
  const Dataset d = generate(synth_for(cfg, 1, 0.1));
  const Patched p = patch_all(cfg, d);
  MaskConfig mask;
  std::vector<PretrainSample> batch;
  for (std::size_t i = 0; i < 2; ++i)
    batch.push_back(make_sample(cfg, mask, 11, 0, i, &p.audio[i], &p.video[i]));
  ContrastConfig contrast;
  contrast.alpha = 0.5;
  contrast.beta = 0.5;
  const ModelBundle m = init_model(cfg, 5);
  const GradCheckReport r = grad_check(
      [&](BoundParams& bp) {
        return pretrain_loss(bp, cfg, batch, contrast, Stage::Stage1).total;
      },
      m.params, 1e-3, 200, 1);
  INFO(r.worst_param, " ", r.worst_index);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("stage-2 step gradient matches central differences") {
  const ModelConfig cfg = ModelConfig::tiny();
  const Dataset d = generate(synth_for(cfg, 1, 0.1));
  const Patched p = patch_all(cfg, d);
  const TeacherSnapshot teacher = make_teacher(init_model(cfg, 9), Stage::Stage1, 0);
  const ModelConfig scfg = student_config(cfg);
  std::vector<TeacherTargets> targets;
  std::vector<PretrainSample> batch;
  for (std::size_t i = 0; i < 2; ++i)
    targets.push_back(make_teacher_targets(teacher, scfg, p.audio[i], p.video[i]));
  for (std::size_t i = 0; i < 2; ++i) {
    batch.push_back(make_sample(scfg, MaskConfig{}, 12, 0, i, &p.audio[i], &p.video[i]));
    batch.back().targets = &targets[i];
  }
  const ModelBundle m = init_model(scfg, 6);
  const GradCheckReport r = grad_check(
      [&](BoundParams& bp) {
        return pretrain_loss(bp, scfg, batch, ContrastConfig{}, Stage::Stage2).total;
      },
      m.params, 1e-3, 200, 2);
  INFO(r.worst_param, " ", r.worst_index);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("stage-1 learning-rate trace matches the schedule and runs are deterministic") {
  const ModelConfig cfg = ModelConfig::tiny();
  const Dataset d = generate(synth_for(cfg, 2, 0.1));
  PretrainOptions o = quick_options(3, 4);
  o.train.accum_steps = 2;
  std::vector<StepRecord> a, b;
  Pretrainer pa(fresh_state(cfg, o.train, Stage::Stage1, 0), d, o);
  CHECK(pa.steps_per_epoch() == 1);
  pa.run([&](const StepRecord& r) { a.push_back(r); });
  pretrain_stage1(cfg, d, o, [&](const StepRecord& r) { b.push_back(r); });
  REQUIRE(a.size() == 3);
  REQUIRE(b.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].lr == lr_at(pa.schedule(), i));
    CHECK(a[i].step == i);
    CHECK(a[i].loss.total == b[i].loss.total);
    CHECK(a[i].loss.inter == b[i].loss.inter);
  }
}

TEST_CASE("interrupted run continues with the exact trajectory") {
  const ModelConfig cfg = ModelConfig::tiny();
  const Dataset d = generate(synth_for(cfg, 2, 0.1));
  const PretrainOptions o = quick_options(4, 4);
  std::vector<double> full, resumed;
  pretrain_stage1(cfg, d, o, [&](const StepRecord& r) { full.push_back(r.loss.total); });
  Pretrainer first(fresh_state(cfg, o.train, Stage::Stage1, 0), d, o);
  first.run([&](const StepRecord& r) { resumed.push_back(r.loss.total); }, 3);
  Pretrainer second(first.state(), d, o);
  second.run([&](const StepRecord& r) { resumed.push_back(r.loss.total); });
  CHECK(resumed == full);
}

TEST_CASE("non-finite loss aborts with step diagnostics") {
  const ModelConfig cfg = ModelConfig::tiny();
  Dataset d = generate(synth_for(cfg, 1, 0.1));
  for (auto& inst : d.items) inst.audio.vec()[0] = std::nan("");
  Pretrainer p(fresh_state(cfg, quick_options(1, 2).train, Stage::Stage1, 0), d,
               quick_options(1, 2));
  CHECK_THROWS_WITH_AS(p.step(), doctest::Contains("step 0: non-finite loss"), std::runtime_error);
}

TEST_CASE("batch that cannot be filled is rejected") {
  const ModelConfig cfg = ModelConfig::tiny();
  const Dataset d = generate(synth_for(cfg, 1, 0.1));
  CHECK_THROWS_AS(pretrain_stage1(cfg, d, quick_options(1, 8)), std::invalid_argument);
}

TEST_CASE("teacher targets are deterministic, full-length and checked") {
  const ModelConfig cfg = ModelConfig::tiny();
  const Dataset d = generate(synth_for(cfg, 1, 0.1));
  const Patched p = patch_all(cfg, d);
  const TeacherSnapshot teacher = make_teacher(init_model(cfg, 4), Stage::Stage1, 0);
  const ModelConfig scfg = student_config(cfg);
  const TeacherTargets t1 = make_teacher_targets(teacher, scfg, p.audio[0], p.video[0]);
  const TeacherTargets t2 = make_teacher_targets(teacher, scfg, p.audio[0], p.video[0]);
  CHECK(t1.audio == t2.audio);
  CHECK(t1.video == t2.video);
  CHECK(t1.audio.shape() == Shape{cfg.audio.num_tokens(), cfg.width});
  CHECK(t1.video.shape() == Shape{cfg.video.num_tokens(), cfg.width});

  SUBCASE("tampered snapshot") {
    TeacherSnapshot bad = teacher;
    bad.model.params.at("audio_enc.patch.w").vec()[0] += 1e-3;
    CHECK_THROWS_WITH_AS(make_teacher_targets(bad, scfg, p.audio[0], p.video[0]),
                         doctest::Contains("fingerprint mismatch"), std::runtime_error);
  }
  SUBCASE("tokenization mismatch") {
    ModelConfig other = scfg;
    other.audio.patch_time = 8;
    CHECK_THROWS_WITH_AS(make_teacher_targets(teacher, other, p.audio[0], p.video[0]),
                         doctest::Contains("tokenization"), std::runtime_error);
  }
}

TEST_CASE("student loss gradient never reaches the teacher") {
  const ModelConfig cfg = ModelConfig::tiny();
  const Dataset d = generate(synth_for(cfg, 2, 0.1));
  const TeacherSnapshot teacher = make_teacher(init_model(cfg, 4), Stage::Stage1, 0);
  const ParamStore before = teacher.model.params;
  PretrainOptions o = quick_options(1, 4);
  o.contrast.alpha = o.contrast.beta = 0.0;
  std::vector<StepRecord> recs;
  const TrainState s = pretrain_stage2(teacher, d, o, 1, [&](const StepRecord& r) { recs.push_back(r); });
  CHECK(teacher.model.params == before);
  CHECK(s.parent_fingerprint == teacher.fingerprint);
  CHECK(s.stage == Stage::Stage2);
  REQUIRE(!recs.empty());
  for (const auto& r : recs) {
    CHECK(r.loss.inter == 0.0);
    CHECK(r.loss.intra == 0.0);
    CHECK(r.loss.total == r.loss.recon);
  }

  // Targets are plain tensors; binding the student store alone covers every gradient.
  const Patched p = patch_all(cfg, d);
  const ModelConfig scfg = student_config(cfg);
  const TeacherTargets t = make_teacher_targets(teacher, scfg, p.audio[0], p.video[0]);
  PretrainSample sample = make_sample(scfg, MaskConfig{}, 1, 0, 0, &p.audio[0], &p.video[0]);
  sample.targets = &t;
  const ModelBundle student = init_model(scfg, 8);
  Tape tape;
  BoundParams bp(tape, student.params);
  const GradMap g = bp.backward(pretrain_loss(bp, scfg, std::span(&sample, 1), o.contrast,
                                              Stage::Stage2).total);
  for (const auto& [name, grad] : g) CHECK(student.params.contains(name));
  CHECK(g.size() == student.params.size());
}

TEST_CASE("stage-2 student is re-initialized independently of the teacher") {
  const ModelConfig cfg = ModelConfig::tiny();
  const TrainConfig tc = quick_options(1, 2).train;
  const TrainState a = fresh_state(student_config(cfg), tc, Stage::Stage2, 1);
  const TeacherSnapshot t1 = make_teacher(init_model(cfg, 1), Stage::Stage1, 0);
  const TeacherSnapshot t2 = make_teacher(init_model(cfg, 2), Stage::Stage1, 0);
  const Dataset d = generate(synth_for(cfg, 1, 0.1));
  PretrainOptions o = quick_options(1, 4);
  o.train.lr_base = 0.0;
  o.train.min_lr = 0.0;
  o.train.weight_decay = 0.0;
  const TrainState s1 = pretrain_stage2(t1, d, o, 1);
  const TrainState s2 = pretrain_stage2(t2, d, o, 1);
  CHECK(s1.model.params == s2.model.params);
  CHECK(s1.model.params == fresh_state(student_config(cfg), o.train, Stage::Stage2, 1).model.params);
  CHECK(a.model.params != t1.model.params);

  o.train.warm_start = true;
  const TrainState w = pretrain_stage2(t1, d, o, 1);
  CHECK(w.model.params.at("audio_enc.patch.w") == t1.model.params.at("audio_enc.patch.w"));
}

TEST_CASE("contextualized loss falls under a trained teacher") {
  ModelConfig cfg = ModelConfig::tiny();
  const Dataset d = generate(synth_for(cfg, 2, 0.05));
  PretrainOptions o = quick_options(150, 8);
  o.train.lr_base = 0.048;
  o.train.min_lr = 0.0015;
  const TrainState s1 = pretrain_stage1(cfg, d, o);
  const TeacherSnapshot teacher = make_teacher(s1.model, Stage::Stage1, 0);
  o.train.epochs = 100;
  o.train.lr_base = 0.02;
  o.train.min_lr = 0.0006;
  o.train.warmup_epochs = 5;
  std::vector<double> ctx;
  pretrain_stage2(teacher, d, o, 1, [&](const StepRecord& r) { ctx.push_back(r.loss.recon); });
  const std::vector<double> w = window_means(ctx, 10);
  REQUIRE(w.size() == 10);
  for (std::size_t i = 1; i < w.size(); ++i) {
    INFO("window ", i, ": ", w[i - 1], " -> ", w[i]);
    CHECK(w[i] < w[i - 1]);
  }
}

TEST_CASE("self-training lineage") {
  const ModelConfig cfg = ModelConfig::tiny();
  const Dataset d = generate(synth_for(cfg, 1, 0.1));
  PretrainOptions o = quick_options(1, 4);
  std::vector<std::pair<Stage, std::size_t>> runs;
  StepCallback cb = [&](const StepRecord& r) {
    if (runs.empty() || runs.back() != std::pair{r.stage, r.iteration}) runs.emplace_back(r.stage, r.iteration);
  };

  SUBCASE("one iteration") {
    o.train.k_iters = 1;
    const auto lineage = self_train(cfg, d, o, cb);
    REQUIRE(lineage.size() == 2);
    CHECK(runs.size() == 2);
    CHECK(lineage[1].teacher_fingerprint == lineage[0].fingerprint);
    CHECK(lineage[1].state.stage == Stage::Stage2);
  }
  SUBCASE("three iterations") {
    o.train.k_iters = 3;
    const auto lineage = self_train(cfg, d, o, cb);
    REQUIRE(lineage.size() == 4);
    CHECK(lineage[0].teacher_fingerprint.empty());
    CHECK(lineage[0].state.stage == Stage::Stage1);
    for (std::size_t k = 1; k < 4; ++k) {
      CHECK(lineage[k].state.iteration == k);
      CHECK(lineage[k].teacher_fingerprint == lineage[k - 1].fingerprint);
      CHECK(lineage[k].state.parent_fingerprint == lineage[k - 1].fingerprint);
      CHECK(lineage[k].fingerprint == snapshot_fingerprint(lineage[k].state.model));
    }
    CHECK(runs.size() == 4);
  }
}

TEST_CASE("sampler weights") {
  SUBCASE("single class is uniform") {
    const SamplerWeights w = sampler_weights({{0}, {0}, {0}}, 1);
    CHECK(w.instance_weights[0] == w.instance_weights[1]);
    CHECK(w.instance_weights[1] == w.instance_weights[2]);
  }
  SUBCASE("1 vs 999 ratio") {
    std::vector<std::vector<std::size_t>> labels{{0}};
    labels.resize(1000, {1});
    const SamplerWeights w = sampler_weights(labels, 2);
    const double expected = (1000.0 / 1.01) / (1000.0 / 999.01);
    CHECK(w.instance_weights[0] / w.instance_weights[1] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(989.1).epsilon(1e-4));
  }
  SUBCASE("multi-label instances sum class weights") {
    const SamplerWeights w = sampler_weights({{0, 1}, {1}}, 2);
    CHECK(w.instance_weights[0] == doctest::Approx(w.class_weights[0] + w.class_weights[1]));
  }
  SUBCASE("empirical frequencies") {
    std::vector<std::vector<std::size_t>> labels;
    for (std::size_t c = 0; c < 3; ++c) labels.resize(labels.size() + 10 * (c + 1) * (c + 1), {c});
    const SamplerWeights w = sampler_weights(labels, 3);
    const double total = std::accumulate(w.instance_weights.begin(), w.instance_weights.end(), 0.0);
    std::vector<double> expected(3, 0.0), seen(3, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) expected[labels[i][0]] += w.instance_weights[i] / total;
    Rng rng(77);
    const std::size_t draws = 100000;
    for (std::size_t i : weighted_sample(w, draws, rng)) seen[labels[i][0]] += 1.0 / draws;
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(seen[c] - expected[c]) < 0.01);
  }
  SUBCASE("errors") {
    Rng rng(1);
    CHECK_THROWS_AS(weighted_sample(SamplerWeights{}, 1, rng), std::invalid_argument);
    CHECK_THROWS_AS(sampler_weights({{3}}, 2), std::invalid_argument);
  }
}

TEST_CASE("fine-tune loss names") {
  CHECK(parse_finetune_loss("bce") == FinetuneLoss::BCE);
  CHECK(parse_finetune_loss(finetune_loss_name(FinetuneLoss::CE)) == FinetuneLoss::CE);
  CHECK_THROWS_AS(parse_finetune_loss("hinge"), std::invalid_argument);
}

TEST_CASE("BCE at zero logits is ln 2 per class") {
  Tape tape;
  Var logits = tape.leaf(Tensor(Shape{1, 5}, 0.0), true);
  Tensor target(Shape{1, 5});
  target.at(0, 2) = 1.0;
  CHECK(ops::bce_with_logits(logits, target).value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("AV fine-tune slows the video encoder") {
  const ModelConfig cfg = ModelConfig::tiny();
  const Dataset d = generate(synth_for(cfg, 2, 0.1));
  FinetuneConfig fc;
  fc.mode = FinetuneMode::AV;
  fc.epochs = 3;
  fc.batch = 4;
  fc.warmup_epochs = 1;
  std::vector<FinetuneRecord> recs;
  finetune(init_model(cfg, 1), d, fc, [&](const FinetuneRecord& r) { recs.push_back(r); });
  REQUIRE(recs.size() == 6);
  for (const auto& r : recs) CHECK(r.lr_video == 0.5 * r.lr_audio);
  CHECK(recs.back().lr_audio > 0.0);

  fc.mode = FinetuneMode::A;
  recs.clear();
  finetune(init_model(cfg, 1), d, fc, [&](const FinetuneRecord& r) { recs.push_back(r); });
  for (const auto& r : recs) CHECK(r.lr_video == 0.0);
}

TEST_CASE("audio-only fine-tune separates the synthetic classes") {
  const ModelConfig cfg = ModelConfig::tiny();
  const Dataset all = generate(synth_for(cfg, 16, 0.1, 21));
  Rng rng(5);
  const Split sp = split(all, 0.75, rng);
  const Dataset train = subset(all, sp.train);
  const Dataset eval = subset(all, sp.eval);
  FinetuneConfig fc;
  fc.mode = FinetuneMode::A;
  fc.loss = FinetuneLoss::CE;
  fc.batch = 8;
  fc.epochs = 300 / (train.items.size() / fc.batch);
  fc.lr_base = 0.5;
  fc.warmup_epochs = 2;
  fc.seed = 2;
  std::size_t steps = 0;
  const ClassifierModel clf = finetune(init_model(cfg, 3), train, fc, [&](const FinetuneRecord&) { ++steps; });
  CHECK(steps <= 300);
  std::vector<std::size_t> truth;
  Tensor scores(Shape{eval.items.size(), eval.num_classes});
  for (std::size_t i = 0; i < eval.items.size(); ++i) {
    const Tensor l = predict_logits(clf, eval.items[i]);
    for (std::size_t c = 0; c < eval.num_classes; ++c) scores.at(i, c) = l.vec()[c];
    truth.push_back(eval.items[i].labels[0]);
  }
  CHECK(accuracy_top1(scores, truth) >= 0.9);
}

TEST_CASE("evaluation forward ignores the fine-tune mask seed") {
  const ModelConfig cfg = ModelConfig::tiny();
  const Dataset d = generate(synth_for(cfg, 1, 0.1));
  FinetuneConfig fc;
  fc.epochs = 1;
  fc.batch = 2;
  const ClassifierModel clf = finetune(init_model(cfg, 1), d, fc);
  const Tensor a = predict_logits(clf, d.items[0]);
  const Tensor b = predict_logits(clf, d.items[0]);
  CHECK(a == b);
  CHECK(a.size() == d.num_classes);
}

TEST_CASE("clip starts spread over the duration") {
  CHECK(clip_starts(8, 4, 1) == std::vector<std::size_t>{0});
  CHECK(clip_starts(8, 4, 3) == std::vector<std::size_t>{0, 2, 4});
  CHECK(clip_starts(4, 4, 3) == std::vector<std::size_t>{0, 0, 0});
  CHECK_THROWS_AS(clip_starts(2, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(clip_starts(8, 4, 0), std::invalid_argument);
}
