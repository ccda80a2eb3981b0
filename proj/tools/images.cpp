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

#include "images.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mavil/data_io.hpp"

namespace mavil::tools {
namespace {

unsigned char scale(double v, double lo, double hi) {
  if (!(hi > lo)) return 0;
  const double u = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(u * 255.0));
}

}  // namespace

Image spectrogram_image(const Tensor& spec) {
  const std::size_t t = spec.rows(), f = spec.cols();
  const auto [lo, hi] = std::minmax_element(spec.vec().begin(), spec.vec().end());
  Image img{t, f, 1, std::vector<unsigned char>(t * f)};
  for (std::size_t y = 0; y < f; ++y)
    for (std::size_t x = 0; x < t; ++x) img.pixels[y * t + x] = scale(spec.at(x, f - 1 - y), *lo, *hi);
  return img;
}

Image frame_image(const Tensor& clip, std::size_t frame) {
  if (clip.rank() != 4) throw std::invalid_argument("frame_image: clip must be [frames, C, H, W]");
  const std::size_t c = clip.dim(1), h = clip.dim(2), w = clip.dim(3);
  if (c != 1 && c != 3) throw std::invalid_argument("frame_image: need 1 or 3 channels");
  const auto [lo, hi] = std::minmax_element(clip.vec().begin(), clip.vec().end());
  Image img{w, h, c, std::vector<unsigned char>(w * h * c)};
  const std::size_t base = frame * c * h * w;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k)
        img.pixels[(y * w + x) * c + k] = scale(clip[base + (k * h + y) * w + x], *lo, *hi);
  return img;
}

Image side_by_side(const std::vector<Image>& panels, std::size_t gap) {
  if (panels.empty()) throw std::invalid_argument("side_by_side: no panels");
  Image out;
  out.height = panels.front().height;
  out.channels = panels.front().channels;
  for (const Image& p : panels) {
    if (p.height != out.height || p.channels != out.channels)
      throw std::invalid_argument("side_by_side: panel sizes differ");
    out.width += p.width;
  }
  out.width += gap * (panels.size() - 1);
  out.pixels.assign(out.width * out.height * out.channels, 0);
  std::size_t x0 = 0;
  for (const Image& p : panels) {
    for (std::size_t y = 0; y < p.height; ++y)
      std::copy_n(p.pixels.begin() + static_cast<std::ptrdiff_t>(y * p.width * p.channels),
                  p.width * p.channels,
                  out.pixels.begin() + static_cast<std::ptrdiff_t>((y * out.width + x0) * out.channels));
    x0 += p.width + gap;
  }
  return out;
}

Image stacked(const std::vector<Image>& rows, std::size_t gap) {
  if (rows.empty()) throw std::invalid_argument("stacked: no rows");
  Image out;
  out.width = rows.front().width;
  out.channels = rows.front().channels;
  for (const Image& r : rows) {
    if (r.width != out.width || r.channels != out.channels)
      throw std::invalid_argument("stacked: row sizes differ");
    out.height += r.height;
  }
  out.height += gap * (rows.size() - 1);
  out.pixels.assign(out.width * out.height * out.channels, 0);
  std::size_t y0 = 0;
  for (const Image& r : rows) {
    std::copy(r.pixels.begin(), r.pixels.end(),
              out.pixels.begin() + static_cast<std::ptrdiff_t>(y0 * out.width * out.channels));
    y0 += r.height + gap;
  }
  return out;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  std::string data = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                     std::to_string(img.height) + "\n255\n";
  data.append(img.pixels.begin(), img.pixels.end());
  io::write_file_atomic(path, data);
}

}  // namespace mavil::tools
