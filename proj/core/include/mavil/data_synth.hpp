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

#include "mavil/rng.hpp"
#include "mavil/tensor.hpp"

namespace mavil {

struct SynthConfig {
  std::size_t num_classes = 4;
  std::size_t per_class = 64;
  double noise = 0.1;
  std::size_t spec_frames = 64;
  std::size_t spec_bins = 16;
  std::size_t video_frames = 4;  // total duration; clips are cut from it
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t square = 8;
  bool multilabel = false;
  double second_label_prob = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t size() const { return num_classes * per_class; }
};

struct PairedInstance {
  std::string id;
  std::vector<std::size_t> labels;  // labels[0] is the primary class
  Tensor audio;                     // spec_frames x spec_bins
  Tensor video;                     // frames x channels x height x width
  double phase = 0.0;
  double duration_s = 0.0;
};

struct Dataset {
  std::vector<PairedInstance> items;
  std::size_t num_classes = 0;
};

// Instance `index` of a synthetic corpus. Class index % num_classes; the
// instance's phase drives both the audio envelope in the class's mel block
// and the trajectory of the class-coloured square, so pairs share a latent.
// Noise-free audio and video for inst.labels and inst.phase.
void render(const SynthConfig& cfg, PairedInstance& inst);

PairedInstance generate_instance(const SynthConfig& cfg, std::size_t index);
Dataset generate(const SynthConfig& cfg);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

// Class-stratified split on the primary label; every class keeps at least
// one instance on each side.
Split split(const Dataset& data, double train_frac, Rng& rng);
Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices);

// Frames [start, start + frames) of a clip.
Tensor clip_frames(const Tensor& video, std::size_t start, std::size_t frames);

}  // namespace mavil
