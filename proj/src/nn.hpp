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

// Per-sample CHW building blocks with hand-written backward passes. Every
// backward function *accumulates* into the parameter gradient it is given.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "common.hpp"

namespace pal::nn {

/// Storage for tensors that reach Eigen kernels. A fixed alignment keeps the
/// vectorised code path, and therefore the rounding, independent of where the
/// allocator happens to place a buffer.
template <class T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

template <class T>
struct Volume {
  int channels = 0;
  int height = 0;
  int width = 0;
  Buffer<T> data;

  Volume() = default;
  Volume(int c, int h, int w, T fill = T{})
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  T* channel(int c) { return data.data() + c * plane(); }
  const T* channel(int c) const { return data.data() + c * plane(); }
  T& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  const T& at(int c, int y, int x) const {
    return data[c * plane() + static_cast<std::size_t>(y) * width + x];
  }
};

struct ParamView {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool operator==(const ParamView&) const = default;
};

/// Named weight tensors of one network, stored in a single flat buffer so
/// optimisers and checkpoints can treat them uniformly.
template <class T>
struct ParameterSet {
  std::vector<ParamView> views;
  Buffer<T> values;
  std::uint64_t seed = 0;

  std::size_t size() const { return values.size(); }
  std::size_t add(const std::string& name, std::vector<int> shape);
  const ParamView& view(const std::string& name) const;
  bool operator==(const ParameterSet&) const = default;
};

/// Square convolution, stride 1, zero "same" padding.
struct Conv {
  int in = 0;
  int out = 0;
  int kernel = 3;
  std::size_t weight = 0;  // offset of [out][in][k][k]
  std::size_t bias = 0;    // offset of [out]
};

template <class T>
Conv add_conv(ParameterSet<T>& p, const std::string& name, int in, int out, int kernel);

/// Weights and bias drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class T>
void init_conv(const Conv& c, ParameterSet<T>& p, Rng& rng);

template <class T>
Volume<T> conv_forward(const Conv& c, std::span<const T> params, const Volume<T>& in);

/// Accumulates dW/db into `grad` and returns dL/d(in) (empty when
/// `need_input_grad` is false).
template <class T>
Volume<T> conv_backward(const Conv& c, std::span<const T> params, const Volume<T>& in,
                        const Volume<T>& dout, std::span<T> grad, bool need_input_grad = true);

template <class T>
void leaky_relu_inplace(Volume<T>& v, T slope);
/// `out` is the activation output; sign(out) == sign(in) for slope > 0.
template <class T>
void leaky_relu_backward_inplace(const Volume<T>& out, Volume<T>& grad, T slope);

/// 2x2 max pool, stride 2, ceil mode. `argmax` receives flat input indices.
template <class T>
Volume<T> maxpool2(const Volume<T>& in, std::vector<int>* argmax);
template <class T>
Volume<T> maxpool2_backward(const Volume<T>& dout, const std::vector<int>& argmax,
                            int in_channels, int in_height, int in_width);

template <class T>
Volume<T> upsample2(const Volume<T>& in);
template <class T>
Volume<T> upsample2_backward(const Volume<T>& dout);

template <class T>
Volume<T> concat_channels(const Volume<T>& a, const Volume<T>& b);
/// Returns the first `a_channels` channels and the rest.
template <class T>
std::pair<Volume<T>, Volume<T>> split_channels(const Volume<T>& v, int a_channels);

/// Two 3x3 conv + leaky ReLU layers, the unit shared by both networks.
struct DoubleConv {
  Conv first;
  Conv second;

  template <class T>
  struct Cache {
    Volume<T> input;
    Volume<T> mid;  // output of the first activation
    Volume<T> out;  // output of the second activation
  };

  template <class T>
  Volume<T> forward(std::span<const T> params, const Volume<T>& in, T slope,
                    Cache<T>* cache) const;
  template <class T>
  Volume<T> backward(std::span<const T> params, const Cache<T>& cache, Volume<T> dout,
                     std::span<T> grad, T slope, bool need_input_grad = true) const;
};

template <class T>
DoubleConv add_double_conv(ParameterSet<T>& p, const std::string& name, int in, int out);

}  // namespace pal::nn
