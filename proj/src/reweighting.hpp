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

// Batch re-weighting of per-sample segmentation losses.
//
// A quality network emits a raw score t_i per sample. The overfitting
// control squashes it to lambda * tanh(t_i), a batch softmax turns the
// squashed scores into weights on the probability simplex, and the training
// objective is the weighted sum of per-sample losses. Because every squashed
// score lies in (-lambda, lambda), no two weights in a batch can differ by
// more than a factor exp(2 * lambda).

#pragma once

#include <span>
#include <string>
#include <vector>

#include "common.hpp"

namespace pal {

enum class Strategy { baseline, qam, qam_ocm };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);
inline bool uses_quality_network(Strategy s) { return s != Strategy::baseline; }

struct OcmConfig {
  double lambda = 2.0;
};

/// lambda * tanh(t).
template <class T>
T ocm_squash(T t, const OcmConfig& cfg) {
  return static_cast<T>(cfg.lambda) * std::tanh(t);
}

/// d/dt of lambda * tanh(t).
template <class T>
T ocm_squash_derivative(T t, const OcmConfig& cfg) {
  const T th = std::tanh(t);
  return static_cast<T>(cfg.lambda) * (T(1) - th * th);
}

/// Softmax with max subtraction.
template <class T>
std::vector<T> batch_softmax(std::span<const T> scores);

/// baseline: uniform 1/B. qam: softmax(t). qam_ocm: softmax(lambda tanh t).
template <class T>
std::vector<T> compute_weights(std::span<const T> scores, Strategy strategy, const OcmConfig& cfg);

/// Sum_i w_i L_i.
template <class T>
T combine_loss(std::span<const T> weights, std::span<const T> losses);

/// Gradient of combine_loss(compute_weights(t), L) with respect to the raw
/// scores t, by chaining the softmax and squash Jacobians. Zero for the
/// baseline strategy.
template <class T>
std::vector<T> score_gradient(std::span<const T> scores, std::span<const T> weights,
                              std::span<const T> losses, Strategy strategy, const OcmConfig& cfg);

/// max_i w_i / min_i w_i. Throws when some weight is zero.
template <class T>
T max_weight_ratio(std::span<const T> weights);

/// Checks the simplex constraint: w_i in [0,1] and |sum - 1| <= tol.
template <class T>
bool on_simplex(std::span<const T> weights, double tol);

}  // namespace pal
