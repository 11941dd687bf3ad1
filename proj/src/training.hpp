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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "corruption.hpp"
#include "datasets.hpp"
#include "models.hpp"
#include "reweighting.hpp"

namespace pal {

enum class Precision { f32, f64 };

std::string to_string(Precision p);
/// f64 when PAL_TEST_MODE=1 is set in the environment, f32 otherwise.
Precision precision_from_env();

struct TrainConfig {
  Strategy strategy = Strategy::qam_ocm;
  double learning_rate = 1e-4;
  /// Quality-network learning rate as a multiple of learning_rate.
  double qam_lr_scale = 0.1;
  int batch_size = 16;
  int epochs = 120;
  double lambda = 2.0;
  std::uint64_t seed = 0;
  std::string loss_kind = "bce";
  /// Stop after this many epochs without a new best eval Dice; 0 disables.
  int patience = 30;
  Precision precision = Precision::f32;

  void validate() const;
};

template <class T>
struct AdamState {
  nn::Buffer<T> m;
  nn::Buffer<T> v;
  std::int64_t steps = 0;
  bool operator==(const AdamState&) const = default;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
void adam_step(nn::Buffer<T>& params, const nn::Buffer<T>& grad, AdamState<T>& state, double lr,
               const AdamConfig& cfg = {});

template <class T>
struct TrainState {
  TrainConfig config;
  ModelProfile profile;
  std::vector<std::string> class_names;
  SegNet<T> segnet;
  AdamState<T> segnet_opt;
  std::optional<Qam<T>> qam;
  std::optional<AdamState<T>> qam_opt;
  int epoch = 0;             // completed epochs
  std::int64_t global_step = 0;
  double best_dice = -1.0;
  int best_epoch = 0;
  int epochs_since_best = 0;
};

template <class T>
TrainState<T> init_train_state(const TrainConfig& cfg, const ModelProfile& profile,
                               const std::vector<std::string>& class_names);

struct SampleStep {
  std::string sample_id;
  double raw_score = 0.0;
  double weight = 0.0;
  double loss = 0.0;
  bool corrupted = false;
};

struct StepRecord {
  std::int64_t step = 0;
  int epoch = 0;  // 1-based, as in metrics.csv
  double scalar_loss = 0.0;
  bool partial = false;
  std::vector<SampleStep> per_sample;
};

/// Mean over pixels and class channels of binary cross-entropy between
/// sigmoid(logit) and the mask. `dlogits`, when given, receives d L_i / d z.
template <class T>
std::vector<T> per_sample_loss(std::span<const nn::Volume<T>> logits,
                               std::span<const nn::Volume<T>> masks,
                               std::vector<nn::Volume<T>>* dlogits = nullptr);

/// One joint optimisation step on both networks from the single re-weighted
/// scalar loss. Throws ErrorCode::diverged on a non-finite loss, leaving
/// `state` untouched.
template <class T>
StepRecord train_step(TrainState<T>& state, const Batch& batch);

struct WeightStats {
  std::int64_t step = 0;
  int epoch = 0;
  double mean_clean = 0.0;
  double mean_noisy = 0.0;
  double var_clean = 0.0;
  double var_noisy = 0.0;
  std::optional<double> ratio;  // absent when a group is empty
  std::size_t n_clean = 0;
  std::size_t n_noisy = 0;
};

/// Per-epoch clean/noisy statistics of relative weights B * w_i. Partial
/// batches are left out. `noisy_ids` lists corrupted samples.
std::vector<WeightStats> track_group_weights(const std::vector<StepRecord>& records,
                                             const std::vector<std::string>& noisy_ids);

struct TrainArtifacts {
  std::filesystem::path run_dir;
  std::vector<std::vector<double>> eval_rows;  // per epoch: class dice..., average, mean loss
  double best_dice = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  bool stopped_early = false;
};

using LogFn = std::function<void(const std::string&)>;

struct TrainOptions {
  std::filesystem::path run_dir;
  /// Continue from a checkpoint directory instead of a fresh init.
  std::optional<std::filesystem::path> resume_from;
  LogFn log;
  /// Extra JSON merged into the config echo (dataset paths, noise spec).
  std::string config_echo_extra = "{}";
};

/// Trains for config.epochs epochs (or until patience runs out), evaluating
/// on `eval_set` after each epoch. Writes metrics.csv, steps.jsonl,
/// weight_stats.csv, run_config.json and checkpoints/{best,final}.
template <class T>
TrainArtifacts train(const TrainConfig& cfg, const ModelProfile& profile, const Dataset& train_set,
                     const Dataset& eval_set, const TrainOptions& options);

/// Precision dispatch on cfg.precision.
TrainArtifacts train_any(const TrainConfig& cfg, const ModelProfile& profile,
                         const Dataset& train_set, const Dataset& eval_set,
                         const TrainOptions& options);

/// Directory holding params.bin and checkpoint_meta.json.
template <class T>
void save_checkpoint(const TrainState<T>& state, const std::filesystem::path& dir);
/// Refuses (state_conflict) when the stored profile hash differs from
/// `expected_profile`'s, or the stored precision differs from T.
template <class T>
TrainState<T> load_checkpoint(const std::filesystem::path& dir, const ModelProfile& expected_profile);

/// Reads only checkpoint_meta.json.
struct CheckpointMeta {
  TrainConfig config;
  std::string profile_hash;
  std::string profile_json;
  std::vector<std::string> class_names;
  std::string precision;
  int epoch = 0;
  std::int64_t global_step = 0;
};
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& dir);

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

}  // namespace pal
