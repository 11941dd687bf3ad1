// Copyright 2026 The PAL Authors
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

#include <cstdint>
#include <filesystem>
#include <string>

#include "common.hpp"

namespace pal {

/// Single-channel PNG raster; 8- or 16-bit samples widened to 16 bits.
struct GrayRaster {
  Grid<std::uint16_t> pixels;
  int bit_depth = 8;
};

/// Decodes grayscale, gray+alpha, RGB or palette PNGs. Colour is reduced to
/// luminance, alpha is dropped.
GrayRaster read_png(const std::filesystem::path& path);

void write_png_gray8(const std::filesystem::path& path, const Grid<std::uint8_t>& pixels);

/// Per-image min-max normalisation to [0,1]; flat images map to 0.
Image2D normalize_minmax(const GrayRaster& raster);

/// Quantise to 8 bits with round-to-nearest.
Grid<std::uint8_t> to_gray8(const Image2D& image);
Image2D from_gray8(const Grid<std::uint8_t>& pixels);

Mask mask_from_raster(const GrayRaster& raster);
Grid<std::uint8_t> mask_to_gray8(const Mask& mask);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace pal
