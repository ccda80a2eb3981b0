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

#include "mavil/tokenizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mavil/autodiff.hpp"

namespace mavil {

const char* modality_name(Modality m) { return m == Modality::Audio ? "audio" : "video"; }

void AudioGeometry::validate() const {
  if (patch_time == 0 || patch_freq == 0 || time_frames % patch_time != 0 ||
      freq_bins % patch_freq != 0 || time_frames == 0 || freq_bins == 0) {
    throw std::invalid_argument("audio geometry " + std::to_string(time_frames) + "x" +
                                std::to_string(freq_bins) + " not divisible by patch " +
                                std::to_string(patch_time) + "x" + std::to_string(patch_freq));
  }
}

void VideoGeometry::validate() const {
  if (tubelet_time == 0 || patch_h == 0 || patch_w == 0 || frames % tubelet_time != 0 ||
      height % patch_h != 0 || width % patch_w != 0 || frames == 0 || height == 0 ||
      width == 0 || channels == 0) {
    throw std::invalid_argument(
        "video geometry " + std::to_string(frames) + "x" + std::to_string(channels) + "x" +
        std::to_string(height) + "x" + std::to_string(width) + " not divisible by tubelet " +
        std::to_string(tubelet_time) + "x" + std::to_string(patch_h) + "x" +
        std::to_string(patch_w));
  }
}

Tensor patchify_audio(const Tensor& spec, const AudioGeometry& g) {
  g.validate();
  if (spec.shape() != Shape{g.time_frames, g.freq_bins}) {
    throw std::invalid_argument("patchify_audio: expected spectrogram " +
                                shape_str({g.time_frames, g.freq_bins}) + ", got " +
                                shape_str(spec.shape()));
  }
  Tensor out(Shape{g.num_tokens(), g.patch_dim()});
  const std::size_t gf = g.grid_freq();
  for (std::size_t r = 0; r < g.grid_time(); ++r)
    for (std::size_t c = 0; c < gf; ++c) {
      const std::size_t tok = r * gf + c;
      for (std::size_t dt = 0; dt < g.patch_time; ++dt)
        for (std::size_t df = 0; df < g.patch_freq; ++df)
          out.at(tok, dt * g.patch_freq + df) =
              spec.at(r * g.patch_time + dt, c * g.patch_freq + df);
    }
  return out;
}

Tensor unpatchify_audio(const Tensor& patches, const AudioGeometry& g) {
  g.validate();
  if (patches.shape() != Shape{g.num_tokens(), g.patch_dim()}) {
    throw std::invalid_argument("unpatchify_audio: bad patch matrix " + shape_str(patches.shape()));
  }
  Tensor spec(Shape{g.time_frames, g.freq_bins});
  const std::size_t gf = g.grid_freq();
  for (std::size_t r = 0; r < g.grid_time(); ++r)
    for (std::size_t c = 0; c < gf; ++c)
      for (std::size_t dt = 0; dt < g.patch_time; ++dt)
        for (std::size_t df = 0; df < g.patch_freq; ++df)
          spec.at(r * g.patch_time + dt, c * g.patch_freq + df) =
              patches.at(r * gf + c, dt * g.patch_freq + df);
  return spec;
}

namespace {

std::size_t clip_index(const VideoGeometry& g, std::size_t t, std::size_t ch, std::size_t y,
                       std::size_t x) {
  return ((t * g.channels + ch) * g.height + y) * g.width + x;
}

}  // namespace

Tensor patchify_video(const Tensor& clip, const VideoGeometry& g) {
  g.validate();
  if (clip.shape() != Shape{g.frames, g.channels, g.height, g.width}) {
    throw std::invalid_argument("patchify_video: expected clip " +
                                shape_str({g.frames, g.channels, g.height, g.width}) +
                                ", got " + shape_str(clip.shape()));
  }
  Tensor out(Shape{g.num_tokens(), g.patch_dim()});
  const std::size_t gh = g.grid_h(), gw = g.grid_w();
  for (std::size_t t = 0; t < g.grid_time(); ++t)
    for (std::size_t i = 0; i < gh; ++i)
      for (std::size_t j = 0; j < gw; ++j) {
        const std::size_t tok = (t * gh + i) * gw + j;
        std::size_t k = 0;
        for (std::size_t dt = 0; dt < g.tubelet_time; ++dt)
          for (std::size_t dy = 0; dy < g.patch_h; ++dy)
            for (std::size_t dx = 0; dx < g.patch_w; ++dx)
              for (std::size_t ch = 0; ch < g.channels; ++ch)
                out.at(tok, k++) = clip[clip_index(g, t * g.tubelet_time + dt, ch,
                                                   i * g.patch_h + dy, j * g.patch_w + dx)];
      }
  return out;
}

Tensor unpatchify_video(const Tensor& patches, const VideoGeometry& g) {
  g.validate();
  if (patches.shape() != Shape{g.num_tokens(), g.patch_dim()}) {
    throw std::invalid_argument("unpatchify_video: bad patch matrix " + shape_str(patches.shape()));
  }
  Tensor clip(Shape{g.frames, g.channels, g.height, g.width});
  const std::size_t gh = g.grid_h(), gw = g.grid_w();
  for (std::size_t t = 0; t < g.grid_time(); ++t)
    for (std::size_t i = 0; i < gh; ++i)
      for (std::size_t j = 0; j < gw; ++j) {
        const std::size_t tok = (t * gh + i) * gw + j;
        std::size_t k = 0;
        for (std::size_t dt = 0; dt < g.tubelet_time; ++dt)
          for (std::size_t dy = 0; dy < g.patch_h; ++dy)
            for (std::size_t dx = 0; dx < g.patch_w; ++dx)
              for (std::size_t ch = 0; ch < g.channels; ++ch)
                clip[clip_index(g, t * g.tubelet_time + dt, ch, i * g.patch_h + dy,
                                j * g.patch_w + dx)] = patches.at(tok, k++);
      }
  return clip;
}

TokenSequence embed_patches(const Tensor& patches, const PatchEmbedWeights& w,
                            std::vector<std::size_t> grid, Modality modality) {
  if (w.weight.rows() != patches.cols() || w.bias.size() != w.weight.cols()) {
    throw std::invalid_argument("embed_patches: weights " + shape_str(w.weight.shape()) +
                                " do not fit patches " + shape_str(patches.shape()));
  }
  Tensor tokens = matmul(patches, w.weight);
  const std::size_t h = tokens.cols();
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] += w.bias[i % h];
  return TokenSequence{std::move(tokens), std::move(grid), false, modality};
}

TokenSequence patchify_audio(const Tensor& spectrogram, const AudioGeometry& geom,
                             const PatchEmbedWeights& w) {
  return embed_patches(patchify_audio(spectrogram, geom), w, geom.grid(), Modality::Audio);
}

TokenSequence tubelet_embed_video(const Tensor& clip, const VideoGeometry& geom,
                                  const PatchEmbedWeights& w) {
  return embed_patches(patchify_video(clip, geom), w, geom.grid(), Modality::Video);
}

Tensor sincos_1d(const std::vector<double>& positions, std::size_t dim) {
  if (dim % 2 != 0) throw std::invalid_argument("sincos_1d: dim must be even");
  const std::size_t half = dim / 2;
  Tensor out(Shape{positions.size(), dim});
  for (std::size_t p = 0; p < positions.size(); ++p)
    for (std::size_t k = 0; k < half; ++k) {
      const double omega =
          1.0 / std::pow(10000.0, static_cast<double>(k) / static_cast<double>(half));
      out.at(p, k) = std::sin(positions[p] * omega);
      out.at(p, half + k) = std::cos(positions[p] * omega);
    }
  return out;
}

Tensor sincos_pos_embed(const std::vector<std::size_t>& grid, std::size_t width) {
  if (grid.size() == 2) {
    if (width % 4 != 0) {
      throw std::invalid_argument("sincos_pos_embed: width " + std::to_string(width) +
                                  " must be divisible by 4 for a 2-D grid");
    }
  } else if (grid.size() == 3) {
    if (width % 8 != 0) {
      throw std::invalid_argument("sincos_pos_embed: width " + std::to_string(width) +
                                  " must be divisible by 8 for a 3-D grid");
    }
  } else {
    throw std::invalid_argument("sincos_pos_embed: grid must have 2 or 3 axes");
  }
  const std::vector<std::size_t> dims =
      grid.size() == 2 ? std::vector<std::size_t>{width / 2, width / 2}
                       : std::vector<std::size_t>{width / 2, width / 4, width / 4};
  std::size_t count = 1;
  for (std::size_t g : grid) count *= g;
  Tensor out(Shape{count, width});
  std::size_t col = 0;
  for (std::size_t axis = 0; axis < grid.size(); ++axis) {
    std::vector<double> pos(count);
    for (std::size_t tok = 0; tok < count; ++tok) {
      std::size_t rem = tok;
      std::size_t coord = 0;
      for (std::size_t a = grid.size(); a-- > 0;) {
        if (a == axis) coord = rem % grid[a];
        rem /= grid[a];
      }
      pos[tok] = static_cast<double>(coord);
    }
    const Tensor part = sincos_1d(pos, dims[axis]);
    for (std::size_t tok = 0; tok < count; ++tok)
      for (std::size_t k = 0; k < dims[axis]; ++k) out.at(tok, col + k) = part.at(tok, k);
    col += dims[axis];
  }
  return out;
}

TokenSequence assemble(const TokenSequence& seq, const Tensor& pos, const Tensor& cls) {
  if (seq.has_cls) throw std::invalid_argument("assemble: sequence already has a CLS token");
  const std::size_t l = seq.tokens.rows(), h = seq.tokens.cols();
  if (pos.shape() != Shape{l, h} || cls.size() != h) {
    throw std::invalid_argument("assemble: pos " + shape_str(pos.shape()) + " / cls " +
                                shape_str(cls.shape()) + " do not fit tokens " +
                                shape_str(seq.tokens.shape()));
  }
  Tensor out(Shape{l + 1, h});
  for (std::size_t j = 0; j < h; ++j) out.at(0, j) = cls[j];
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < h; ++j) out.at(i + 1, j) = seq.tokens.at(i, j) + pos.at(i, j);
  return TokenSequence{std::move(out), seq.grid, true, seq.modality};
}

}  // namespace mavil
