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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "datasets.hpp"
#include "nn.hpp"

namespace pal {

/// Architecture details shared by both networks. Checkpoints record the
/// hash of this profile and refuse to load under a different one.
struct ModelProfile {
  std::string name = "desk";
  int seg_depth = 3;
  int seg_base_width = 8;
  std::vector<int> qam_block_widths{8, 16, 16, 32, 32};
  std::string nonlinearity = "leaky_relu";
  double leaky_slope = 0.1;
  std::string normalization = "none";
  std::string padding = "zero";

  void validate() const;
  /// Stable serialisation (sorted keys, fixed number formatting).
  std::string canonical_json() const;
  std::string hash() const;

  static ModelProfile from_json_text(const std::string& text);
  static ModelProfile load(const std::filesystem::path& path);
};

struct SegNetConfig {
  int in_channels = 1;
  int n_classes = 1;
  int depth = 3;
  int base_width = 8;
  double leaky_slope = 0.1;

  void validate() const;
};

struct QamConfig {
  int in_channels = 2;  // image channels + n_classes
  std::vector<int> block_widths{8, 16, 16, 32, 32};
  double leaky_slope = 0.1;

  void validate() const;
};

SegNetConfig segnet_config(const ModelProfile& profile, int n_classes, int image_channels = 1);
QamConfig qam_config(const ModelProfile& profile, int n_classes, int image_channels = 1);

/// UNet-style encoder/decoder producing one logit map per class.
template <class T>
class SegNet {
 public:
  struct Cache {
    std::vector<nn::DoubleConv::Cache<T>> enc;
    std::vector<std::vector<int>> pool_argmax;  // per encoder level > 0
    std::vector<nn::DoubleConv::Cache<T>> dec;  // decoder level d at index d
    nn::Volume<T> head_input;
  };

  SegNet() = default;
  SegNet(const SegNetConfig& cfg, std::uint64_t seed);

  const SegNetConfig& config() const { return cfg_; }
  nn::ParameterSet<T>& params() { return params_; }
  const nn::ParameterSet<T>& params() const { return params_; }

  /// (channels, H, W) image to (n_classes, H, W) logits. H and W must be
  /// divisible by 2^(depth-1).
  nn::Volume<T> forward(const nn::Volume<T>& image, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const nn::Volume<T>& dlogits, std::span<T> grad) const;

 private:
  SegNetConfig cfg_;
  nn::ParameterSet<T> params_;
  std::vector<nn::DoubleConv> enc_;
  std::vector<nn::DoubleConv> dec_;
  nn::Conv head_;
};

/// VGG-style scorer: (image ++ masks) to one scalar per sample, through a
/// one-channel 1x1 conv and global average pooling.
template <class T>
class Qam {
 public:
  struct Cache {
    std::vector<nn::DoubleConv::Cache<T>> blocks;
    std::vector<std::vector<int>> pool_argmax;
    std::vector<std::array<int, 3>> pool_input_shape;
    nn::Volume<T> head_input;
  };

  Qam() = default;
  Qam(const QamConfig& cfg, std::uint64_t seed);

  const QamConfig& config() const { return cfg_; }
  nn::ParameterSet<T>& params() { return params_; }
  const nn::ParameterSet<T>& params() const { return params_; }

  T forward(const nn::Volume<T>& input, Cache* cache = nullptr) const;
  void backward(const Cache& cache, T dscore, std::span<T> grad) const;

 private:
  QamConfig cfg_;
  nn::ParameterSet<T> params_;
  std::vector<nn::DoubleConv> blocks_;
  nn::Conv head_;
};

template <class T>
SegNet<T> build_segnet(const SegNetConfig& cfg, std::uint64_t seed) {
  return SegNet<T>(cfg, seed);
}
template <class T>
Qam<T> build_qam(const QamConfig& cfg, std::uint64_t seed) {
  return Qam<T>(cfg, seed);
}

template <class T>
nn::Volume<T> image_volume(const Image2D& image);
template <class T>
nn::Volume<T> mask_volume(const MaskSet& masks);
/// Image channel followed by the n mask channels.
template <class T>
nn::Volume<T> qam_input(const Sample& s);

/// Logits for a batch, (batch, n_classes, H, W).
template <class T>
std::vector<nn::Volume<T>> seg_forward(const SegNet<T>& net, std::span<const Sample* const> batch);
/// One raw quality score per sample, computed from the sample's current
/// (possibly corrupted) labels.
template <class T>
std::vector<T> qam_forward(const Qam<T>& net, std::span<const Sample* const> batch);

}  // namespace pal
