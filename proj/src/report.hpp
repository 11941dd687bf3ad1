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
#include <string>
#include <vector>

namespace pal {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;

  /// Self-contained SVG document. Non-finite points are dropped.
  std::string to_svg(int width = 640, int height = 400) const;
};

struct ReportSummary {
  std::size_t rows = 0;
  std::vector<std::filesystem::path> plots;
  std::vector<std::string> notes;
};

/// Writes results_table.{csv,txt} and, per run, <run>_loss.svg and
/// <run>_dice.svg, plus <run>_weights.svg for quality-network runs trained
/// on a corrupted set. An empty list yields empty tables; a non-empty list
/// where no run yields a row throws ErrorCode::io.
ReportSummary write_report(const std::vector<std::filesystem::path>& run_dirs,
                           const std::filesystem::path& out_dir);

}  // namespace pal
