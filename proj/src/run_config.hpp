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

#include "corruption.hpp"
#include "models.hpp"
#include "training.hpp"

namespace pal {

/// Everything one training run needs. Parsed from JSON with unknown keys
/// rejected; relative paths resolve against the working directory.
///
/// Data comes either from `train_data` + `eval_data`, or from `data` split by
/// `train_fraction` / `split_seed`. An optional `noise` block corrupts the
/// training portion before training; it is refused when that portion is
/// already corrupted.
struct RunConfig {
  /// Empty means default_run_name() of the effective noise.
  std::string run_name;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> train_data;
  std::optional<std::filesystem::path> eval_data;
  std::optional<std::filesystem::path> data;
  SplitSpec split;
  std::optional<std::filesystem::path> profile;
  TrainConfig train;
  std::optional<NoiseSpec> noise;
  bool resume = false;

  void validate() const;
  std::string to_json() const;
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
};

/// `<strategy>_f<fraction>_r<min>-<max>`, or `<strategy>_clean` without noise.
std::string default_run_name(Strategy strategy, const std::optional<NoiseSpec>& noise);

/// Loads data and profile, applies noise, and trains into output_dir.
/// Everything is validated before the first write. A run directory that
/// already holds metrics.csv is refused with state_conflict unless `resume`
/// is set, in which case training continues from checkpoints/final.
TrainArtifacts execute_run(const RunConfig& cfg, const LogFn& log = {});

}  // namespace pal
