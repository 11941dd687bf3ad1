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

#include "nn.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pal::nn {
namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// Unfolds a CHW volume into a (C*k*k, H*W) patch matrix with zero padding.
template <class T>
Buffer<T> im2col(const Volume<T>& in, int k) {
  const int pad = k / 2, h = in.height, w = in.width;
  const std::size_t hw = in.plane();
  Buffer<T> col(static_cast<std::size_t>(in.channels) * k * k * hw, T(0));
  for (int c = 0; c < in.channels; ++c) {
    const T* src = in.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dy = ky - pad, dx = kx - pad;
        const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const T* srow = src + static_cast<std::size_t>(sy) * w + dx;
          T* drow = dst + static_cast<std::size_t>(y) * w;
          for (int x = x_lo; x < x_hi; ++x) drow[x] = srow[x];
        }
      }
    }
  }
  return col;
}

template <class T>
Volume<T> col2im(const Buffer<T>& col, int channels, int h, int w, int k) {
  const int pad = k / 2;
  Volume<T> out(channels, h, w);
  const std::size_t hw = out.plane();
  for (int c = 0; c < channels; ++c) {
    T* dst = out.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dy = ky - pad, dx = kx - pad;
        const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          T* drow = dst + static_cast<std::size_t>(sy) * w + dx;
          const T* srow = src + static_cast<std::size_t>(y) * w;
          for (int x = x_lo; x < x_hi; ++x) drow[x] += srow[x];
        }
      }
    }
  }
  return out;
}

}  // namespace

template <class T>
std::size_t ParameterSet<T>::add(const std::string& name, std::vector<int> shape) {
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(s);
  ParamView v{name, std::move(shape), values.size(), n};
  values.resize(values.size() + n, T(0));
  views.push_back(std::move(v));
  return views.back().offset;
}

template <class T>
const ParamView& ParameterSet<T>::view(const std::string& name) const {
  for (const auto& v : views)
    if (v.name == name) return v;
  fail(ErrorCode::invalid_argument, "no parameter named " + name);
}

template <class T>
Conv add_conv(ParameterSet<T>& p, const std::string& name, int in, int out, int kernel) {
  require(in >= 1 && out >= 1, "conv " + name + " needs positive channel counts");
  Conv c;
  c.in = in;
  c.out = out;
  c.kernel = kernel;
  c.weight = p.add(name + ".weight", {out, in, kernel, kernel});
  c.bias = p.add(name + ".bias", {out});
  return c;
}

template <class T>
void init_conv(const Conv& c, ParameterSet<T>& p, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(c.in) * c.kernel * c.kernel);
  const std::size_t n = static_cast<std::size_t>(c.out) * c.in * c.kernel * c.kernel;
  for (std::size_t i = 0; i < n; ++i) p.values[c.weight + i] = static_cast<T>(rng.uniform(-bound, bound));
  for (int i = 0; i < c.out; ++i) p.values[c.bias + i] = static_cast<T>(rng.uniform(-bound, bound));
}

template <class T>
Volume<T> conv_forward(const Conv& c, std::span<const T> params, const Volume<T>& in) {
  require(in.channels == c.in, "conv expects " + std::to_string(c.in) + " input channels, got " +
                                   std::to_string(in.channels));
  const int kk = c.in * c.kernel * c.kernel;
  const auto hw = static_cast<Eigen::Index>(in.plane());
  Volume<T> out(c.out, in.height, in.width);
  ConstMapMat<T> weight(params.data() + c.weight, c.out, kk);
  MapMat<T> o(out.data.data(), c.out, hw);
  if (c.kernel == 1) {
    o.noalias() = weight * ConstMapMat<T>(in.data.data(), kk, hw);
  } else {
    const Buffer<T> col = im2col(in, c.kernel);
    o.noalias() = weight * ConstMapMat<T>(col.data(), kk, hw);
  }
  for (int oc = 0; oc < c.out; ++oc) o.row(oc).array() += params[c.bias + oc];
  return out;
}

template <class T>
Volume<T> conv_backward(const Conv& c, std::span<const T> params, const Volume<T>& in,
                        const Volume<T>& dout, std::span<T> grad, bool need_input_grad) {
  const int kk = c.in * c.kernel * c.kernel;
  const auto hw = static_cast<Eigen::Index>(in.plane());
  ConstMapMat<T> weight(params.data() + c.weight, c.out, kk);
  ConstMapMat<T> g(dout.data.data(), c.out, hw);
  MapMat<T> dw(grad.data() + c.weight, c.out, kk);
  for (int oc = 0; oc < c.out; ++oc) grad[c.bias + oc] += g.row(oc).sum();

  if (c.kernel == 1) {
    ConstMapMat<T> x(in.data.data(), kk, hw);
    dw.noalias() += g * x.transpose();
    if (!need_input_grad) return {};
    Volume<T> din(c.in, in.height, in.width);
    MapMat<T>(din.data.data(), kk, hw).noalias() = weight.transpose() * g;
    return din;
  }
  const Buffer<T> col = im2col(in, c.kernel);
  dw.noalias() += g * ConstMapMat<T>(col.data(), kk, hw).transpose();
  if (!need_input_grad) return {};
  Buffer<T> dcol(static_cast<std::size_t>(kk) * hw);
  MapMat<T>(dcol.data(), kk, hw).noalias() = weight.transpose() * g;
  return col2im(dcol, c.in, in.height, in.width, c.kernel);
}

template <class T>
void leaky_relu_inplace(Volume<T>& v, T slope) {
  for (auto& x : v.data) x = x > T(0) ? x : x * slope;
}

template <class T>
void leaky_relu_backward_inplace(const Volume<T>& out, Volume<T>& grad, T slope) {
  for (std::size_t i = 0; i < grad.data.size(); ++i)
    if (!(out.data[i] > T(0))) grad.data[i] *= slope;
}

template <class T>
Volume<T> maxpool2(const Volume<T>& in, std::vector<int>* argmax) {
  const int oh = (in.height + 1) / 2, ow = (in.width + 1) / 2;
  Volume<T> out(in.channels, oh, ow);
  if (argmax) argmax->assign(out.data.size(), 0);
  std::size_t o = 0;
  for (int c = 0; c < in.channels; ++c) {
    const std::size_t base = c * in.plane();
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x, ++o) {
        T best = -std::numeric_limits<T>::infinity();
        int best_i = 0;
        for (int dy = 0; dy < 2; ++dy) {
          const int sy = 2 * y + dy;
          if (sy >= in.height) break;
          for (int dx = 0; dx < 2; ++dx) {
            const int sx = 2 * x + dx;
            if (sx >= in.width) break;
            const int idx = static_cast<int>(base + static_cast<std::size_t>(sy) * in.width + sx);
            if (in.data[idx] > best) {
              best = in.data[idx];
              best_i = idx;
            }
          }
        }
        out.data[o] = best;
        if (argmax) (*argmax)[o] = best_i;
      }
    }
  }
  return out;
}

template <class T>
Volume<T> maxpool2_backward(const Volume<T>& dout, const std::vector<int>& argmax,
                            int in_channels, int in_height, int in_width) {
  Volume<T> din(in_channels, in_height, in_width);
  for (std::size_t i = 0; i < dout.data.size(); ++i) din.data[argmax[i]] += dout.data[i];
  return din;
}

template <class T>
Volume<T> upsample2(const Volume<T>& in) {
  Volume<T> out(in.channels, in.height * 2, in.width * 2);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
  return out;
}

template <class T>
Volume<T> upsample2_backward(const Volume<T>& dout) {
  Volume<T> din(dout.channels, dout.height / 2, dout.width / 2);
  for (int c = 0; c < dout.channels; ++c)
    for (int y = 0; y < dout.height; ++y)
      for (int x = 0; x < dout.width; ++x) din.at(c, y / 2, x / 2) += dout.at(c, y, x);
  return din;
}

template <class T>
Volume<T> concat_channels(const Volume<T>& a, const Volume<T>& b) {
  require(a.height == b.height && a.width == b.width, "concat needs equal spatial size");
  Volume<T> out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
  return out;
}

template <class T>
std::pair<Volume<T>, Volume<T>> split_channels(const Volume<T>& v, int a_channels) {
  Volume<T> a(a_channels, v.height, v.width), b(v.channels - a_channels, v.height, v.width);
  std::copy(v.data.begin(), v.data.begin() + a.data.size(), a.data.begin());
  std::copy(v.data.begin() + a.data.size(), v.data.end(), b.data.begin());
  return {std::move(a), std::move(b)};
}

template <class T>
DoubleConv add_double_conv(ParameterSet<T>& p, const std::string& name, int in, int out) {
  return DoubleConv{add_conv(p, name + ".0", in, out, 3), add_conv(p, name + ".1", out, out, 3)};
}

template <class T>
Volume<T> DoubleConv::forward(std::span<const T> params, const Volume<T>& in, T slope,
                              Cache<T>* cache) const {
  Volume<T> mid = conv_forward(first, params, in);
  leaky_relu_inplace(mid, slope);
  Volume<T> out = conv_forward(second, params, mid);
  leaky_relu_inplace(out, slope);
  if (cache) {
    cache->input = in;
    cache->mid = mid;
    cache->out = out;
  }
  return out;
}

template <class T>
Volume<T> DoubleConv::backward(std::span<const T> params, const Cache<T>& cache, Volume<T> dout,
                               std::span<T> grad, T slope, bool need_input_grad) const {
  leaky_relu_backward_inplace(cache.out, dout, slope);
  Volume<T> dmid = conv_backward(second, params, cache.mid, dout, grad);
  leaky_relu_backward_inplace(cache.mid, dmid, slope);
  return conv_backward(first, params, cache.input, dmid, grad, need_input_grad);
}

#define PAL_NN_INSTANTIATE(T)                                                                    \
  template struct ParameterSet<T>;                                                               \
  template Conv add_conv<T>(ParameterSet<T>&, const std::string&, int, int, int);                \
  template void init_conv<T>(const Conv&, ParameterSet<T>&, Rng&);                               \
  template Volume<T> conv_forward<T>(const Conv&, std::span<const T>, const Volume<T>&);         \
  template Volume<T> conv_backward<T>(const Conv&, std::span<const T>, const Volume<T>&,         \
                                      const Volume<T>&, std::span<T>, bool);                     \
  template void leaky_relu_inplace<T>(Volume<T>&, T);                                            \
  template void leaky_relu_backward_inplace<T>(const Volume<T>&, Volume<T>&, T);                 \
  template Volume<T> maxpool2<T>(const Volume<T>&, std::vector<int>*);                           \
  template Volume<T> maxpool2_backward<T>(const Volume<T>&, const std::vector<int>&, int, int,   \
                                          int);                                                  \
  template Volume<T> upsample2<T>(const Volume<T>&);                                             \
  template Volume<T> upsample2_backward<T>(const Volume<T>&);                                    \
  template Volume<T> concat_channels<T>(const Volume<T>&, const Volume<T>&);                     \
  template std::pair<Volume<T>, Volume<T>> split_channels<T>(const Volume<T>&, int);             \
  template DoubleConv add_double_conv<T>(ParameterSet<T>&, const std::string&, int, int);        \
  template Volume<T> DoubleConv::forward<T>(std::span<const T>, const Volume<T>&, T,             \
                                            DoubleConv::Cache<T>*) const;                        \
  template Volume<T> DoubleConv::backward<T>(std::span<const T>, const DoubleConv::Cache<T>&,    \
                                             Volume<T>, std::span<T>, T, bool) const;

PAL_NN_INSTANTIATE(float)
PAL_NN_INSTANTIATE(double)

#undef PAL_NN_INSTANTIATE

}  // namespace pal::nn
