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
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "datasets.hpp"
#include "models.hpp"

namespace pal {

struct DiceReport {
  std::vector<std::string> class_names;
  std::vector<double> per_class;
  /// Unweighted mean of per_class.
  double average = 0.0;

  std::string to_json() const;
};

/// prob >= threshold -> 1. Threshold must lie strictly inside (0, 1).
Mask binarize(const Grid<double>& prob, double threshold = 0.5);

/// 2|A n B| / (|A| + |B|); two empty masks score 1.0.
double dice(const Mask& pred, const Mask& gt);

/// Per-class mean Dice of thresholded sigmoid(logits) against the clean
/// reference labels. The quality network plays no part here.
template <class T>
DiceReport evaluate_model(const SegNet<T>& net, const Dataset& d,
                          const std::vector<std::string>& class_names);

/// Loads a checkpoint directory (either precision) and evaluates it.
DiceReport evaluate_checkpoint(const std::filesystem::path& checkpoint_dir, const Dataset& d);

struct ResultRow {
  std::string run_name;
  double noise_fraction = 0.0;
  int radius_min = 0;
  int radius_max = 0;
  std::string op_policy;
  std::string strategy;
  std::vector<std::string> class_names;
  std::vector<double> per_class;
  double average = 0.0;
  int best_epoch = 0;
};

struct ResultsTable {
  std::vector<ResultRow> rows;

  std::string render_text() const;
  std::string render_csv() const;
};

/// One row per run directory, taken from the best-average-Dice epoch of its
/// metrics.csv. Runs lacking metrics.csv or run_config.json are skipped and
/// reported in `warnings`. Rows sort by (fraction, radius range, strategy).
ResultsTable results_table(const std::vector<std::filesystem::path>& run_dirs,
                           std::vector<std::string>* warnings = nullptr);

}  // namespace pal
