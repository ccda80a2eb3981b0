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

#include "mavil/audio_frontend.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mavil::audio {

std::size_t FbankOptions::window_size() const {
  return static_cast<std::size_t>(std::lround(sample_rate * frame_length_ms / 1000.0));
}

std::size_t FbankOptions::window_shift() const {
  return static_cast<std::size_t>(std::lround(sample_rate * frame_shift_ms / 1000.0));
}

std::size_t FbankOptions::fft_size() const {
  std::size_t n = 1;
  while (n < window_size()) n <<= 1;
  return n;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Tensor mel_filterbank(const FbankOptions& opts) {
  const std::size_t bins = opts.fft_size() / 2 + 1;
  const std::size_t bands = opts.num_mel_bins;
  const double mel_lo = hz_to_mel(opts.low_freq);
  const double mel_hi = hz_to_mel(opts.high_freq);
  const double mel_step = (mel_hi - mel_lo) / static_cast<double>(bands + 1);
  const double hz_per_bin = static_cast<double>(opts.sample_rate) / static_cast<double>(opts.fft_size());
  Tensor fb(Shape{bands, bins});
  for (std::size_t b = 0; b < bands; ++b) {
    const double left = mel_lo + mel_step * static_cast<double>(b);
    const double center = left + mel_step;
    const double right = center + mel_step;
    for (std::size_t k = 0; k < bins; ++k) {
      const double mel = hz_to_mel(hz_per_bin * static_cast<double>(k));
      double w = 0.0;
      if (mel > left && mel <= center) w = (mel - left) / (center - left);
      else if (mel > center && mel < right) w = (right - mel) / (right - center);
      fb.at(b, k) = w;
    }
  }
  return fb;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n - 1));
  return w;
}

std::size_t num_frames(std::size_t num_samples, const FbankOptions& opts) {
  const std::size_t win = opts.window_size();
  if (num_samples < win) return 1;
  return (num_samples - win) / opts.window_shift() + 1;
}

namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    std::lock_guard lock(fftw_plan_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), out_.get(), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_.get(); }
  // Power spectrum |X_k|^2 for k in [0, n/2].
  void power(std::vector<double>& out) {
    fftw_execute(plan_);
    out.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] = out_.get()[k][0] * out_.get()[k][0] + out_.get()[k][1] * out_.get()[k][1];
  }

 private:
  std::size_t n_;
  std::unique_ptr<double, FftwFree> in_;
  std::unique_ptr<fftw_complex, FftwFree> out_;
  fftw_plan plan_;
};

}  // namespace

MelSpectrogram wav_to_logmel(const Waveform& wave, const FbankOptions& opts) {
  if (wave.samples.empty()) throw std::invalid_argument("wav_to_logmel: empty waveform");
  if (wave.sample_rate != opts.sample_rate) {
    throw std::invalid_argument("wav_to_logmel: expected " + std::to_string(opts.sample_rate) +
                                " Hz input, got " + std::to_string(wave.sample_rate));
  }
  const std::size_t win = opts.window_size();
  const std::size_t shift = opts.window_shift();
  const std::size_t nfft = opts.fft_size();
  const std::size_t frames = num_frames(wave.samples.size(), opts);
  const std::vector<double> window = hann_window(win);
  const Tensor fb = mel_filterbank(opts);
  const std::size_t bins = nfft / 2 + 1;

  RealFft fft(nfft);
  std::vector<double> power;
  MelSpectrogram spec{Tensor(Shape{frames, opts.num_mel_bins})};
  for (std::size_t f = 0; f < frames; ++f) {
    double* buf = fft.input();
    std::fill(buf, buf + nfft, 0.0);
    for (std::size_t i = 0; i < win; ++i) {
      const std::size_t s = f * shift + i;
      buf[i] = s < wave.samples.size() ? wave.samples[s] * window[i] : 0.0;
    }
    fft.power(power);
    for (std::size_t b = 0; b < opts.num_mel_bins; ++b) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += fb.at(b, k) * power[k];
      spec.frames.at(f, b) = std::log(e + opts.log_floor);
    }
  }
  return spec;
}

MelSpectrogram pad_or_crop_time(const MelSpectrogram& spec, std::size_t target_frames) {
  const std::size_t bands = spec.num_bands();
  MelSpectrogram out{Tensor(Shape{target_frames, bands})};
  const std::size_t keep = std::min(target_frames, spec.num_frames());
  std::copy_n(spec.frames.vec().begin(), keep * bands, out.frames.vec().begin());
  return out;
}

MelSpectrogram normalize(const MelSpectrogram& spec, const NormStats& stats) {
  const double div = stats.std * stats.divisor_scale;
  if (!(stats.std > 0.0) || !(div > 0.0)) {
    throw std::invalid_argument("normalize: std must be positive");
  }
  MelSpectrogram out = spec;
  for (double& x : out.frames.vec()) x = (x - stats.mean) / div;
  return out;
}

MelSpectrogram denormalize(const MelSpectrogram& spec, const NormStats& stats) {
  const double div = stats.std * stats.divisor_scale;
  if (!(stats.std > 0.0) || !(div > 0.0)) {
    throw std::invalid_argument("denormalize: std must be positive");
  }
  MelSpectrogram out = spec;
  for (double& x : out.frames.vec()) x = x * div + stats.mean;
  return out;
}

namespace {

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw std::runtime_error("read_wav_pcm16: truncated header");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

Waveform read_wav_pcm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_wav_pcm16: cannot open " + path.string());
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error("read_wav_pcm16: not a RIFF file");
  read_le<std::uint32_t>(in);
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error("read_wav_pcm16: not a WAVE file");
  bool have_fmt = false;
  Waveform wave;
  while (in.read(tag, 4)) {
    const auto size = read_le<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const auto format = read_le<std::uint16_t>(in);
      const auto channels = read_le<std::uint16_t>(in);
      const auto rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);
      read_le<std::uint16_t>(in);
      const auto bits = read_le<std::uint16_t>(in);
      if (format != 1 || channels != 1 || bits != 16 || rate != 16000) {
        throw std::runtime_error("read_wav_pcm16: only mono 16-bit PCM at 16 kHz is supported");
      }
      wave.sample_rate = static_cast<int>(rate);
      in.ignore(size - 16);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error("read_wav_pcm16: data chunk before fmt");
      wave.samples.resize(size / 2);
      for (double& s : wave.samples) {
        s = static_cast<double>(static_cast<std::int16_t>(read_le<std::uint16_t>(in))) / 32768.0;
      }
      return wave;
    } else {
      in.ignore(size + (size & 1));
    }
  }
  throw std::runtime_error("read_wav_pcm16: no data chunk in " + path.string());
}

}  // namespace mavil::audio
