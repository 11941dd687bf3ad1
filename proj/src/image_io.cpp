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

#include "image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

namespace pal {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorCode::io, "cannot open " + path.string());
  return f;
}

}  // namespace

GrayRaster read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::io, "no such file: " + path.string());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    fail(ErrorCode::format, "not a readable PNG: " + path.string() + " (" + image.message + ")");

  const bool wide = (image.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  image.format = wide ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY;

  GrayRaster out;
  out.bit_depth = wide ? 16 : 8;
  out.pixels = Grid<std::uint16_t>(static_cast<int>(image.height), static_cast<int>(image.width));
  if (wide) {
    if (!png_image_finish_read(&image, nullptr, out.pixels.values.data(), 0, nullptr))
      fail(ErrorCode::format, "PNG decode failed: " + path.string());
  } else {
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr))
      fail(ErrorCode::format, "PNG decode failed: " + path.string());
    std::copy(buf.begin(), buf.end(), out.pixels.values.begin());
  }
  return out;
}

void write_png_gray8(const std::filesystem::path& path, const Grid<std::uint8_t>& pixels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(pixels.width);
  image.height = static_cast<png_uint_32>(pixels.height);
  image.format = PNG_FORMAT_GRAY;
  FilePtr f = open_file(path, "wb");
  if (!png_image_write_to_stdio(&image, f.get(), 0, pixels.values.data(), 0, nullptr))
    fail(ErrorCode::io, "PNG encode failed: " + path.string());
}

Image2D normalize_minmax(const GrayRaster& raster) {
  const auto& px = raster.pixels.values;
  Image2D img(raster.pixels.height, raster.pixels.width, 0.0f);
  if (px.empty()) return img;
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  const double range = static_cast<double>(*hi) - *lo;
  if (range <= 0) return img;
  for (std::size_t i = 0; i < px.size(); ++i)
    img.values[i] = static_cast<float>((px[i] - static_cast<double>(*lo)) / range);
  return img;
}

Grid<std::uint8_t> to_gray8(const Image2D& image) {
  Grid<std::uint8_t> out(image.height, image.width);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(static_cast<double>(image.values[i]), 0.0, 1.0);
    out.values[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

Image2D from_gray8(const Grid<std::uint8_t>& pixels) {
  Image2D out(pixels.height, pixels.width);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    out.values[i] = static_cast<float>(pixels.values[i] / 255.0);
  return out;
}

Mask mask_from_raster(const GrayRaster& raster) {
  Mask m(raster.pixels.height, raster.pixels.width);
  const std::uint16_t half = raster.bit_depth == 16 ? 32768 : 128;
  for (std::size_t i = 0; i < m.size(); ++i) m.values[i] = raster.pixels.values[i] >= half;
  return m;
}

Grid<std::uint8_t> mask_to_gray8(const Mask& mask) {
  Grid<std::uint8_t> out(mask.height, mask.width);
  for (std::size_t i = 0; i < mask.size(); ++i) out.values[i] = mask.values[i] ? 255 : 0;
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + path.string());
    out << text;
    if (!out.flush()) fail(ErrorCode::io, "write failed: " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::io, "rename failed: " + path.string() + ": " + ec.message());
}

}  // namespace pal
