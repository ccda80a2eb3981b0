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

#include <benchmark/benchmark.h>

#include <vector>

#include "mavil/audio_frontend.hpp"
#include "mavil/autodiff.hpp"
#include "mavil/masking.hpp"
#include "mavil/training.hpp"

using namespace mavil;

namespace {

Tensor normal_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.vec()) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = normal_tensor(Shape{n, n}, 1), b = normal_tensor(Shape{n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_Logmel(benchmark::State& state) {
  audio::Waveform w;
  w.samples.resize(static_cast<std::size_t>(state.range(0)));
  Rng rng(3);
  for (double& s : w.samples) s = 0.1 * rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(audio::wav_to_logmel(w));
}
BENCHMARK(BM_Logmel)->Arg(16000)->Arg(160000);

void BM_MakeMask(benchmark::State& state) {
  const auto strategy = static_cast<MaskStrategy>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(make_mask(512, {64, 8}, 0.8, strategy, ++seed));
}
BENCHMARK(BM_MakeMask)->DenseRange(0, 1);

struct StepFixture {
  ModelConfig cfg;
  std::vector<Tensor> audio, video;
  std::vector<PretrainSample> batch;
  ModelBundle model;

  StepFixture(ModelConfig c, std::size_t b) : cfg(std::move(c)) {
    SynthConfig sc;
    sc.per_class = b;
    sc.spec_frames = cfg.audio.time_frames;
    sc.spec_bins = cfg.audio.freq_bins;
    sc.video_frames = cfg.video.frames;
    sc.height = cfg.video.height;
    sc.width = cfg.video.width;
    sc.square = cfg.video.height / 4;
    const Dataset d = generate(sc);
    for (std::size_t i = 0; i < b; ++i) {
      audio.push_back(patchify(cfg, Modality::Audio, d.items[i].audio));
      video.push_back(patchify(cfg, Modality::Video, clip_frames(d.items[i].video, 0, cfg.video.frames)));
    }
    for (std::size_t i = 0; i < b; ++i) batch.push_back(make_sample(cfg, MaskConfig{}, 7, 0, i, &audio[i], &video[i]));
    model = init_model(cfg, 11);
  }
};

void pretrain_step(benchmark::State& state, const ModelConfig& cfg) {
  StepFixture f(cfg, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    Tape tape;
    BoundParams bp(tape, f.model.params);
    const LossVars l = pretrain_loss(bp, f.cfg, f.batch, ContrastConfig{}, Stage::Stage1);
    benchmark::DoNotOptimize(bp.backward(l.total));
  }
}

void BM_PretrainStepTiny(benchmark::State& state) { pretrain_step(state, ModelConfig::tiny()); }
BENCHMARK(BM_PretrainStepTiny)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_PretrainStepDesk(benchmark::State& state) { pretrain_step(state, ModelConfig::desk()); }
BENCHMARK(BM_PretrainStepDesk)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
