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

#include "reweighting.hpp"

#include <algorithm>
#include <cmath>

namespace pal {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::baseline: return "baseline";
    case Strategy::qam: return "qam";
    case Strategy::qam_ocm: return "qam_ocm";
  }
  return "baseline";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "baseline") return Strategy::baseline;
  if (s == "qam") return Strategy::qam;
  if (s == "qam_ocm" || s == "qam+ocm") return Strategy::qam_ocm;
  fail(ErrorCode::invalid_argument, "unknown strategy '" + s + "' (baseline|qam|qam_ocm)");
}

template <class T>
std::vector<T> batch_softmax(std::span<const T> scores) {
  require(!scores.empty(), "softmax over an empty batch");
  const T peak = *std::max_element(scores.begin(), scores.end());
  std::vector<T> w(scores.size());
  T total = T(0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(scores[i] - peak);
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

template <class T>
std::vector<T> compute_weights(std::span<const T> scores, Strategy strategy, const OcmConfig& cfg) {
  require(!scores.empty(), "cannot weight an empty batch");
  require(cfg.lambda > 0.0, "lambda must be positive");
  switch (strategy) {
    case Strategy::baseline:
      return std::vector<T>(scores.size(), T(1) / static_cast<T>(scores.size()));
    case Strategy::qam:
      return batch_softmax(scores);
    case Strategy::qam_ocm: {
      std::vector<T> squashed(scores.size());
      for (std::size_t i = 0; i < scores.size(); ++i) squashed[i] = ocm_squash(scores[i], cfg);
      return batch_softmax(std::span<const T>(squashed));
    }
  }
  return {};
}

template <class T>
T combine_loss(std::span<const T> weights, std::span<const T> losses) {
  require(weights.size() == losses.size(), "weights and losses differ in length");
  T total = T(0);
  for (std::size_t i = 0; i < weights.size(); ++i) total += weights[i] * losses[i];
  return total;
}

template <class T>
std::vector<T> score_gradient(std::span<const T> scores, std::span<const T> weights,
                              std::span<const T> losses, Strategy strategy, const OcmConfig& cfg) {
  require(scores.size() == weights.size() && weights.size() == losses.size(),
          "scores, weights and losses differ in length");
  std::vector<T> g(scores.size(), T(0));
  if (strategy == Strategy::baseline) return g;
  // Softmax Jacobian-vector product: w_j (L_j - sum_i w_i L_i).
  const T mean = combine_loss(weights, losses);
  for (std::size_t j = 0; j < g.size(); ++j) {
    g[j] = weights[j] * (losses[j] - mean);
    if (strategy == Strategy::qam_ocm) g[j] *= ocm_squash_derivative(scores[j], cfg);
  }
  return g;
}

template <class T>
T max_weight_ratio(std::span<const T> weights) {
  require(!weights.empty(), "no weights");
  const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
  if (!(*lo > T(0))) fail(ErrorCode::invalid_argument, "weight ratio undefined: a weight is zero");
  return *hi / *lo;
}

template <class T>
bool on_simplex(std::span<const T> weights, double tol) {
  double total = 0.0;
  for (T w : weights) {
    if (!(w >= T(0) && w <= T(1))) return false;
    total += static_cast<double>(w);
  }
  return std::abs(total - 1.0) <= tol;
}

#define PAL_RW_INSTANTIATE(T)                                                                    \
  template std::vector<T> batch_softmax<T>(std::span<const T>);                                  \
  template std::vector<T> compute_weights<T>(std::span<const T>, Strategy, const OcmConfig&);    \
  template T combine_loss<T>(std::span<const T>, std::span<const T>);                            \
  template std::vector<T> score_gradient<T>(std::span<const T>, std::span<const T>,              \
                                            std::span<const T>, Strategy, const OcmConfig&);     \
  template T max_weight_ratio<T>(std::span<const T>);                                            \
  template bool on_simplex<T>(std::span<const T>, double);

PAL_RW_INSTANTIATE(float)
PAL_RW_INSTANTIATE(double)

#undef PAL_RW_INSTANTIATE

}  // namespace pal
