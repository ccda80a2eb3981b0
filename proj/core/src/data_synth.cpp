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

#include "mavil/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace mavil {

void SynthConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("synth: num_classes must be >= 2");
  if (per_class == 0) throw std::invalid_argument("synth: per_class must be positive");
  if (spec_bins < num_classes) {
    throw std::invalid_argument("synth: need at least one mel bin per class (" +
                                std::to_string(spec_bins) + " bins, " +
                                std::to_string(num_classes) + " classes)");
  }
  if (square == 0 || square > height || square > width) {
    throw std::invalid_argument("synth: square does not fit the frame");
  }
  if (noise < 0.0) throw std::invalid_argument("synth: noise must be >= 0");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void add_audio_pattern(Tensor& spec, const SynthConfig& cfg, std::size_t cls, double phase) {
  const std::size_t t_len = cfg.spec_frames, bins = cfg.spec_bins;
  const std::size_t lo = cls * bins / cfg.num_classes;
  const std::size_t hi = (cls + 1) * bins / cfg.num_classes;
  for (std::size_t t = 0; t < t_len; ++t) {
    const double env =
        0.5 + 0.5 * std::sin(kTwoPi * static_cast<double>(t) / static_cast<double>(t_len) + phase);
    for (std::size_t f = lo; f < hi; ++f) spec.at(t, f) += 2.5 * env;
  }
}

void add_square(Tensor& video, const SynthConfig& cfg, std::size_t cls, double phase) {
  const double cx0 = static_cast<double>(cfg.width) / 2.0;
  const double cy0 = static_cast<double>(cfg.height) / 2.0;
  const double radius = (static_cast<double>(std::min(cfg.width, cfg.height)) - cfg.square) / 2.0 - 1.0;
  // Class sets the angular velocity and colour; phase sets where on the
  // circle the square starts.
  const double omega = (static_cast<double>(cls) + 1.0) * std::numbers::pi / 8.0;
  const double half = static_cast<double>(cfg.square) / 2.0;
  for (std::size_t t = 0; t < cfg.video_frames; ++t) {
    const double angle = phase + omega * static_cast<double>(t);
    const double cx = cx0 + radius * std::cos(angle);
    const double cy = cy0 + radius * std::sin(angle);
    const auto x0 = static_cast<long>(std::lround(cx - half));
    const auto y0 = static_cast<long>(std::lround(cy - half));
    for (std::size_t ch = 0; ch < cfg.channels; ++ch) {
      const double colour = ((cls + ch) % cfg.channels == 0) ? 2.0 : 0.75;
      for (long y = y0; y < y0 + static_cast<long>(cfg.square); ++y)
        for (long x = x0; x < x0 + static_cast<long>(cfg.square); ++x) {
          if (y < 0 || x < 0 || y >= static_cast<long>(cfg.height) || x >= static_cast<long>(cfg.width))
            continue;
          video[((t * cfg.channels + ch) * cfg.height + static_cast<std::size_t>(y)) * cfg.width +
                static_cast<std::size_t>(x)] += colour;
        }
    }
  }
}

}  // namespace

PairedInstance generate_instance(const SynthConfig& cfg, std::size_t index) {
  cfg.validate();
  Rng rng(cfg.seed, {0x73796e74ULL, index});
  PairedInstance inst;
  inst.id = "syn" + std::to_string(index);
  const std::size_t cls = index % cfg.num_classes;
  inst.labels.push_back(cls);
  inst.phase = kTwoPi * rng.uniform();
  if (cfg.multilabel && rng.uniform() < cfg.second_label_prob) {
    const std::size_t other = (cls + 1 + rng.below(cfg.num_classes - 1)) % cfg.num_classes;
    inst.labels.push_back(other);
  }
  render(cfg, inst);
  if (cfg.noise > 0.0) {
    Rng noise = rng.derive({0x6e6f697365ULL});
    for (double& x : inst.audio.vec()) x += cfg.noise * noise.normal();
    for (double& x : inst.video.vec()) x += cfg.noise * noise.normal();
  }
  return inst;
}

void render(const SynthConfig& cfg, PairedInstance& inst) {
  inst.audio = Tensor(Shape{cfg.spec_frames, cfg.spec_bins}, -1.0);
  inst.video = Tensor(Shape{cfg.video_frames, cfg.channels, cfg.height, cfg.width}, -0.5);
  for (std::size_t c : inst.labels) {
    if (c >= cfg.num_classes) throw std::invalid_argument("render: label out of range");
    add_audio_pattern(inst.audio, cfg, c, inst.phase);
    add_square(inst.video, cfg, c, inst.phase);
  }
  inst.duration_s = static_cast<double>(cfg.spec_frames) * 0.01;
}

Dataset generate(const SynthConfig& cfg) {
  cfg.validate();
  Dataset d;
  d.num_classes = cfg.num_classes;
  d.items.reserve(cfg.size());
  for (std::size_t i = 0; i < cfg.size(); ++i) d.items.push_back(generate_instance(cfg, i));
  return d;
}

Split split(const Dataset& data, double train_frac, Rng& rng) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw std::invalid_argument("split: train_frac must lie in (0, 1)");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    if (data.items[i].labels.empty()) throw std::invalid_argument("split: instance without label");
    by_class[data.items[i].labels.front()].push_back(i);
  }
  Split out;
  for (auto& [cls, idx] : by_class) {
    if (idx.size() < 2) {
      throw std::invalid_argument("split: class " + std::to_string(cls) +
                                  " has fewer than 2 instances");
    }
    rng.shuffle(idx);
    auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(idx.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.eval.insert(out.eval.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.eval.begin(), out.eval.end());
  return out;
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dataset d;
  d.num_classes = data.num_classes;
  for (std::size_t i : indices) d.items.push_back(data.items.at(i));
  return d;
}

Tensor clip_frames(const Tensor& video, std::size_t start, std::size_t frames) {
  if (video.rank() != 4 || start + frames > video.dim(0)) {
    throw std::invalid_argument("clip_frames: cannot cut " + std::to_string(frames) +
                                " frames at " + std::to_string(start) + " from " +
                                shape_str(video.shape()));
  }
  const std::size_t per_frame = video.size() / video.dim(0);
  std::vector<double> data(video.vec().begin() + static_cast<std::ptrdiff_t>(start * per_frame),
                           video.vec().begin() + static_cast<std::ptrdiff_t>((start + frames) * per_frame));
  return Tensor(Shape{frames, video.dim(1), video.dim(2), video.dim(3)}, std::move(data));
}

}  // namespace mavil
