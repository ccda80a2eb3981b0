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
#include <filesystem>
#include <vector>

#include "mavil/tensor.hpp"

namespace mavil::audio {

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 16000;
};

// Log-mel energies, frames x bands.
struct MelSpectrogram {
  Tensor frames;
  std::size_t num_frames() const { return frames.rows(); }
  std::size_t num_bands() const { return frames.cols(); }
};

struct NormStats {
  double mean = -4.268;
  double std = 4.569;
  // Normalized value is (x - mean) / (std * divisor_scale).
  double divisor_scale = 1.0;
};

struct FbankOptions {
  int sample_rate = 16000;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  std::size_t num_mel_bins = 128;
  double low_freq = 0.0;
  double high_freq = 8000.0;
  double log_floor = 1e-10;

  std::size_t window_size() const;
  std::size_t window_shift() const;
  std::size_t fft_size() const;  // next power of two >= window_size
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters on the HTK mel scale: num_mel_bins x (fft_size/2 + 1).
Tensor mel_filterbank(const FbankOptions& opts);

// Symmetric Hann window, 0.5 - 0.5 cos(2 pi n / (N - 1)).
std::vector<double> hann_window(std::size_t n);

std::size_t num_frames(std::size_t num_samples, const FbankOptions& opts);

MelSpectrogram wav_to_logmel(const Waveform& wave, const FbankOptions& opts = {});
MelSpectrogram pad_or_crop_time(const MelSpectrogram& spec, std::size_t target_frames = 1024);
MelSpectrogram normalize(const MelSpectrogram& spec, const NormStats& stats);
MelSpectrogram denormalize(const MelSpectrogram& spec, const NormStats& stats);

// 16-bit PCM, mono, 16 kHz only.
Waveform read_wav_pcm16(const std::filesystem::path& path);

}  // namespace mavil::audio
