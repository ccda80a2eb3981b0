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
#include <vector>

#include "mavil/tensor.hpp"

namespace mavil {

enum class Modality { Audio, Video };

const char* modality_name(Modality m);

// Spectrogram (time x freq) cut into non-overlapping patch_time x patch_freq
// patches.
struct AudioGeometry {
  std::size_t time_frames = 64;
  std::size_t freq_bins = 16;
  std::size_t patch_time = 8;
  std::size_t patch_freq = 8;

  std::size_t grid_time() const { return time_frames / patch_time; }
  std::size_t grid_freq() const { return freq_bins / patch_freq; }
  std::size_t num_tokens() const { return grid_time() * grid_freq(); }
  std::size_t patch_dim() const { return patch_time * patch_freq; }
  std::vector<std::size_t> grid() const { return {grid_time(), grid_freq()}; }
  void validate() const;
  bool operator==(const AudioGeometry&) const = default;
};

// Clip (frames x channels x height x width) cut into tubelets of
// tubelet_time x patch_h x patch_w over all channels.
struct VideoGeometry {
  std::size_t frames = 4;
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t tubelet_time = 2;
  std::size_t patch_h = 8;
  std::size_t patch_w = 8;

  std::size_t grid_time() const { return frames / tubelet_time; }
  std::size_t grid_h() const { return height / patch_h; }
  std::size_t grid_w() const { return width / patch_w; }
  std::size_t num_tokens() const { return grid_time() * grid_h() * grid_w(); }
  std::size_t patch_dim() const { return tubelet_time * patch_h * patch_w * channels; }
  std::vector<std::size_t> grid() const { return {grid_time(), grid_h(), grid_w()}; }
  void validate() const;
  bool operator==(const VideoGeometry&) const = default;
};

// Embedded tokens for one modality.
struct TokenSequence {
  Tensor tokens;                  // L x H
  std::vector<std::size_t> grid;  // (time, freq) or (time, rows, cols)
  bool has_cls = false;
  Modality modality = Modality::Audio;

  std::size_t num_patches() const { return tokens.rows() - (has_cls ? 1 : 0); }
};

struct PatchEmbedWeights {
  Tensor weight;  // patch_dim x H
  Tensor bias;    // 1 x H
};

// Raw patches, one row per token. Audio tokens are time-major; within a patch
// values run (dt, df). Video tokens run (t, row, col); within a tubelet values
// run (dt, dy, dx, channel).
Tensor patchify_audio(const Tensor& spectrogram, const AudioGeometry& geom);
Tensor unpatchify_audio(const Tensor& patches, const AudioGeometry& geom);
Tensor patchify_video(const Tensor& clip, const VideoGeometry& geom);
Tensor unpatchify_video(const Tensor& patches, const VideoGeometry& geom);

// Linear patch embedding: patches @ weight + bias.
TokenSequence embed_patches(const Tensor& patches, const PatchEmbedWeights& w,
                            std::vector<std::size_t> grid, Modality modality);
TokenSequence patchify_audio(const Tensor& spectrogram, const AudioGeometry& geom,
                             const PatchEmbedWeights& w);
TokenSequence tubelet_embed_video(const Tensor& clip, const VideoGeometry& geom,
                                  const PatchEmbedWeights& w);

// Fixed sin-cos table, one row per grid cell in token order. For a 2-D grid
// each axis gets width/2 columns; for a 3-D grid time gets width/2 and the
// two spatial axes width/4 each. Every 1-D block is [sin(p w_k), cos(p w_k)]
// with w_k = 10000^(-k / (d/2)).
Tensor sincos_pos_embed(const std::vector<std::size_t>& grid, std::size_t width);
Tensor sincos_1d(const std::vector<double>& positions, std::size_t dim);

// tokens + pos, then CLS prepended (without positional offset).
TokenSequence assemble(const TokenSequence& seq, const Tensor& pos, const Tensor& cls);

}  // namespace mavil
