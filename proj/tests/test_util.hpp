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

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "common.hpp"

namespace pal::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pal_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Random binary mask with roughly `density` foreground.
inline Mask random_mask(Rng& rng, int h, int w, double density) {
  Mask m(h, w);
  for (auto& v : m.values) v = rng.uniform() < density;
  return m;
}

/// Brute-force disk morphology, independent of the library's chord scheme.
inline Mask naive_morph(const Mask& m, int r, bool dilate) {
  Mask out(m.height, m.width);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      bool any = false, all = true;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (dy * dy + dx * dx > r * r) continue;
          const int yy = y + dy, xx = x + dx;
          const bool inside = yy >= 0 && yy < m.height && xx >= 0 && xx < m.width;
          const bool v = inside && m(yy, xx);
          any = any || v;
          all = all && v;
        }
      out(y, x) = dilate ? any : all;
    }
  return out;
}

inline bool subset(const Mask& a, const Mask& b) {
  for (std::size_t i = 0; i < a.values.size(); ++i)
    if (a.values[i] && !b.values[i]) return false;
  return true;
}

}  // namespace pal::test
