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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace pal {

/// One binary channel per segmentation class. Channels may overlap.
struct MaskSet {
  std::vector<Mask> channels;
  std::vector<std::string> class_names;

  std::size_t num_classes() const { return channels.size(); }
  bool operator==(const MaskSet&) const = default;
};

struct Sample {
  std::string id;
  Image2D image;
  MaskSet masks;
  bool corrupted = false;
  /// Original annotation, kept only when `masks` holds corrupted labels.
  std::optional<MaskSet> clean_masks;

  /// The annotation that evaluation should score against.
  const MaskSet& reference_masks() const { return clean_masks ? *clean_masks : masks; }
  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;
  /// Generator seed for synthetic sets; informational only.
  std::optional<std::uint64_t> seed;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  int image_size() const { return samples.empty() ? 0 : samples.front().image.height; }
  bool any_corrupted() const;
  /// Throws invalid_argument when samples disagree on shape or class layout.
  void validate() const;
  bool operator==(const Dataset&) const = default;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct Batch {
  std::vector<const Sample*> samples;
  /// Smaller than the requested batch size (only the last batch can be).
  bool partial = false;
  std::size_t size() const { return samples.size(); }
};

/// Ellipse-per-class synthetic shapes, a desk-scale stand-in for chest
/// radiographs. Deterministic in `seed`.
Dataset generate_synthetic(int count, int size, int n_classes, std::uint64_t seed);

struct JsrtLoadResult {
  Dataset dataset;
  std::size_t skipped = 0;
};

/// Maps each output class to the structure masks OR-ed into it.
struct ClassGrouping {
  std::vector<std::pair<std::string, std::vector<std::string>>> classes;

  /// lungs = left+right lung, heart, clavicles = left+right clavicle.
  static ClassGrouping scr_default();
  static ClassGrouping from_json_file(const std::filesystem::path& path);
};

/// Reads `image_dir/<name>.png` and `mask_dir/<structure>/<name>.png`.
/// Samples lacking any structure mask are skipped and counted.
JsrtLoadResult load_jsrt(const std::filesystem::path& image_dir,
                         const std::filesystem::path& mask_dir,
                         const ClassGrouping& grouping);

/// Bilinear for images, nearest-neighbour for masks. Square inputs only.
Dataset resize_dataset(const Dataset& d, int target);

std::pair<Dataset, Dataset> split(const Dataset& d, const SplitSpec& spec);

/// Batches over a permutation that depends only on (seed, epoch). The last
/// batch is kept even when short, and flagged.
std::vector<Batch> batch_iterator(const Dataset& d, int batch_size, std::uint64_t seed,
                                  int epoch);

/// Directory layout: images/<id>.png, masks/<id>_<class>.png, dataset.json,
/// plus clean_masks/ and corruption_manifest.json for corrupted sets.
void save_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace pal
