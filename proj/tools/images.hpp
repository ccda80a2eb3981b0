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

#include <filesystem>
#include <vector>

#include "mavil/tensor.hpp"

namespace mavil::tools {

// 8-bit image with 1 (graymap) or 3 (pixmap) channels, row-major, interleaved.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<unsigned char> pixels;
};

// Spectrogram [T, F] drawn with time left to right and low bins at the bottom,
// min-max scaled to 0..255.
Image spectrogram_image(const Tensor& spec);

// One frame of a [frames, C, H, W] clip, min-max scaled over the whole clip.
Image frame_image(const Tensor& clip, std::size_t frame);

// Panels left to right with a `gap`-pixel black separator; heights must match.
Image side_by_side(const std::vector<Image>& panels, std::size_t gap = 2);
Image stacked(const std::vector<Image>& rows, std::size_t gap = 2);

// Binary P5 (1 channel) or P6 (3 channels).
void write_pnm(const std::filesystem::path& path, const Image& img);

}  // namespace mavil::tools
