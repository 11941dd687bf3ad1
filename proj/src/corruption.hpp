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
#include <utility>
#include <vector>

#include "common.hpp"
#include "datasets.hpp"

namespace pal {

enum class MorphOp { erode, dilate };
enum class OpPolicy { erode, dilate, random_either };

std::string to_string(MorphOp op);
std::string to_string(OpPolicy p);
MorphOp parse_morph_op(const std::string& s);
OpPolicy parse_op_policy(const std::string& s);

struct NoiseSpec {
  double fraction = 0.0;
  int radius_min = 1;
  int radius_max = 1;
  OpPolicy op_policy = OpPolicy::random_either;
  std::uint64_t seed = 0;

  void validate() const;
  /// Keys fraction, radius_min, radius_max, op_policy, seed; others rejected.
  static NoiseSpec from_json_text(const std::string& text);
};

struct CorruptionRecord {
  std::string sample_id;
  MorphOp op = MorphOp::dilate;
  int radius = 1;
  std::vector<std::string> emptied_classes;

  bool operator==(const CorruptionRecord&) const = default;
};

/// Discretised Euclidean disk: offsets (dy, dx) with dy^2 + dx^2 <= r^2.
struct StructuringElement {
  int radius = 1;
  std::vector<std::pair<int, int>> offsets;

  static StructuringElement disk(int radius);
};

/// Disk dilation; output is a superset of the input.
Mask dilate(const Mask& mask, int radius);
/// Disk erosion with out-of-image pixels treated as background.
Mask erode(const Mask& mask, int radius);

struct CorruptionResult {
  Dataset dataset;
  std::vector<CorruptionRecord> records;
};

/// Corrupts round_half_up(fraction * N) uniformly chosen samples with one
/// (op, radius) draw per sample, shared by every class channel. Rejects
/// datasets that already carry corrupted samples.
CorruptionResult corrupt(const Dataset& d, const NoiseSpec& spec);

/// `corruption_manifest.json`: {"noise_spec": {...}, "records": [...]}.
void save_manifest(const std::filesystem::path& path, const NoiseSpec& spec,
                   const std::vector<CorruptionRecord>& records);
std::pair<NoiseSpec, std::vector<CorruptionRecord>> load_manifest(
    const std::filesystem::path& path);
std::string manifest_json(const NoiseSpec& spec, const std::vector<CorruptionRecord>& records);
std::pair<NoiseSpec, std::vector<CorruptionRecord>> parse_manifest(const std::string& text);

}  // namespace pal
