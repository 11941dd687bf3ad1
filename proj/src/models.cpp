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

#include "models.hpp"

#include <cmath>
#include <cstdio>

#include "image_io.hpp"
#include "json.hpp"

namespace pal {
using nlohmann::json;

void ModelProfile::validate() const {
  require(seg_depth >= 2, "segmentation depth must be >= 2");
  require(seg_base_width >= 1, "segmentation base width must be >= 1");
  require(qam_block_widths.size() == 5, "quality network needs exactly 5 block widths");
  for (int w : qam_block_widths) require(w >= 1, "quality network widths must be positive");
  require(nonlinearity == "leaky_relu", "only the leaky_relu nonlinearity is supported");
  require(leaky_slope > 0.0 && leaky_slope < 1.0, "leaky slope must lie in (0, 1)");
  require(normalization == "none", "only normalization 'none' is supported");
  require(padding == "zero", "only zero padding is supported");
}

std::string ModelProfile::canonical_json() const {
  json j{{"name", name},
         {"segnet", {{"depth", seg_depth}, {"base_width", seg_base_width}}},
         {"qam", {{"block_widths", qam_block_widths}}},
         {"nonlinearity", nonlinearity},
         {"leaky_slope", leaky_slope},
         {"normalization", normalization},
         {"padding", padding}};
  return j.dump();
}

std::string ModelProfile::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical_json())));
  return buf;
}

ModelProfile ModelProfile::from_json_text(const std::string& text) {
  ModelProfile p;
  try {
    const json j = json::parse(text);
    for (const auto& [key, _] : j.items())
      if (key != "name" && key != "segnet" && key != "qam" && key != "nonlinearity" &&
          key != "leaky_slope" && key != "normalization" && key != "padding")
        fail(ErrorCode::format, "unknown model profile key '" + key + "'");
    p.name = j.value("name", p.name);
    p.seg_depth = j.at("segnet").at("depth").get<int>();
    p.seg_base_width = j.at("segnet").at("base_width").get<int>();
    p.qam_block_widths = j.at("qam").at("block_widths").get<std::vector<int>>();
    p.nonlinearity = j.value("nonlinearity", p.nonlinearity);
    p.leaky_slope = j.value("leaky_slope", p.leaky_slope);
    p.normalization = j.value("normalization", p.normalization);
    p.padding = j.value("padding", p.padding);
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("model profile: ") + e.what());
  }
  p.validate();
  return p;
}

ModelProfile ModelProfile::load(const std::filesystem::path& path) {
  return from_json_text(read_text_file(path));
}

void SegNetConfig::validate() const {
  require(in_channels >= 1, "segmentation in_channels must be >= 1");
  require(n_classes >= 1, "segmentation n_classes must be >= 1");
  require(depth >= 2, "segmentation depth must be >= 2");
  require(base_width >= 1, "segmentation base_width must be >= 1");
}

void QamConfig::validate() const {
  require(in_channels >= 2, "quality network needs image and label channels");
  require(!block_widths.empty(), "quality network needs at least one block");
  for (int w : block_widths) require(w >= 1, "quality network widths must be positive");
}

SegNetConfig segnet_config(const ModelProfile& profile, int n_classes, int image_channels) {
  return {image_channels, n_classes, profile.seg_depth, profile.seg_base_width,
          profile.leaky_slope};
}

QamConfig qam_config(const ModelProfile& profile, int n_classes, int image_channels) {
  return {image_channels + n_classes, profile.qam_block_widths, profile.leaky_slope};
}

// ---------------------------------------------------------------------------
// SegNet

template <class T>
SegNet<T>::SegNet(const SegNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  params_.seed = seed;
  std::vector<int> widths;
  int in = cfg.in_channels;
  for (int d = 0; d < cfg.depth; ++d) {
    const int w = cfg.base_width << d;
    enc_.push_back(nn::add_double_conv(params_, "enc" + std::to_string(d), in, w));
    widths.push_back(w);
    in = w;
  }
  dec_.resize(cfg.depth - 1);
  for (int d = cfg.depth - 2; d >= 0; --d)
    dec_[d] = nn::add_double_conv(params_, "dec" + std::to_string(d), widths[d + 1] + widths[d],
                                  widths[d]);
  head_ = nn::add_conv(params_, "head", widths[0], cfg.n_classes, 1);

  Rng rng = Rng::derive(seed, 0x5345474e4554ULL);
  for (const auto& b : enc_) {
    nn::init_conv(b.first, params_, rng);
    nn::init_conv(b.second, params_, rng);
  }
  for (int d = cfg.depth - 2; d >= 0; --d) {
    nn::init_conv(dec_[d].first, params_, rng);
    nn::init_conv(dec_[d].second, params_, rng);
  }
  nn::init_conv(head_, params_, rng);
}

template <class T>
nn::Volume<T> SegNet<T>::forward(const nn::Volume<T>& image, Cache* cache) const {
  const int factor = 1 << (cfg_.depth - 1);
  if (image.height % factor != 0 || image.width % factor != 0)
    fail(ErrorCode::invalid_argument,
         "input " + std::to_string(image.height) + "x" + std::to_string(image.width) +
             " is not divisible by " + std::to_string(factor) + " (depth " +
             std::to_string(cfg_.depth) + ")");
  require(image.channels == cfg_.in_channels, "segmentation input channel mismatch");
  const std::span<const T> p(params_.values);
  const T slope = static_cast<T>(cfg_.leaky_slope);
  if (cache) {
    cache->enc.assign(cfg_.depth, {});
    cache->pool_argmax.assign(cfg_.depth, {});
    cache->dec.assign(cfg_.depth - 1, {});
  }

  std::vector<nn::Volume<T>> skips(cfg_.depth);
  nn::Volume<T> cur = image;
  for (int d = 0; d < cfg_.depth; ++d) {
    if (d > 0) cur = nn::maxpool2(cur, cache ? &cache->pool_argmax[d] : nullptr);
    cur = enc_[d].forward(p, cur, slope, cache ? &cache->enc[d] : nullptr);
    if (d < cfg_.depth - 1) skips[d] = cur;
  }
  for (int d = cfg_.depth - 2; d >= 0; --d) {
    nn::Volume<T> joined = nn::concat_channels(nn::upsample2(cur), skips[d]);
    cur = dec_[d].forward(p, joined, slope, cache ? &cache->dec[d] : nullptr);
  }
  if (cache) cache->head_input = cur;
  return nn::conv_forward(head_, p, cur);
}

template <class T>
void SegNet<T>::backward(const Cache& cache, const nn::Volume<T>& dlogits, std::span<T> grad) const {
  const std::span<const T> p(params_.values);
  const T slope = static_cast<T>(cfg_.leaky_slope);
  std::vector<nn::Volume<T>> dskip(cfg_.depth);

  nn::Volume<T> g = nn::conv_backward(head_, p, cache.head_input, dlogits, grad);
  for (int d = 0; d <= cfg_.depth - 2; ++d) {
    nn::Volume<T> djoined = dec_[d].backward(p, cache.dec[d], std::move(g), grad, slope);
    const int up_channels = djoined.channels - cache.enc[d].out.channels;
    auto [dup, ds] = nn::split_channels(djoined, up_channels);
    dskip[d] = std::move(ds);
    g = nn::upsample2_backward(dup);
  }
  for (int d = cfg_.depth - 1; d >= 0; --d) {
    if (d < cfg_.depth - 1)
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += dskip[d].data[i];
    g = enc_[d].backward(p, cache.enc[d], std::move(g), grad, slope, d > 0);
    if (d > 0) {
      const auto& in = cache.enc[d - 1].out;
      g = nn::maxpool2_backward(g, cache.pool_argmax[d], in.channels, in.height, in.width);
    }
  }
}

// ---------------------------------------------------------------------------
// Qam

template <class T>
Qam<T>::Qam(const QamConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  params_.seed = seed;
  int in = cfg.in_channels;
  for (std::size_t b = 0; b < cfg.block_widths.size(); ++b) {
    blocks_.push_back(
        nn::add_double_conv(params_, "block" + std::to_string(b), in, cfg.block_widths[b]));
    in = cfg.block_widths[b];
  }
  head_ = nn::add_conv(params_, "score", in, 1, 1);

  Rng rng = Rng::derive(seed, 0x51414dULL);
  for (const auto& b : blocks_) {
    nn::init_conv(b.first, params_, rng);
    nn::init_conv(b.second, params_, rng);
  }
  nn::init_conv(head_, params_, rng);
}

template <class T>
T Qam<T>::forward(const nn::Volume<T>& input, Cache* cache) const {
  require(input.channels == cfg_.in_channels,
          "quality network expects " + std::to_string(cfg_.in_channels) +
              " input channels, got " + std::to_string(input.channels));
  const std::span<const T> p(params_.values);
  const T slope = static_cast<T>(cfg_.leaky_slope);
  if (cache) {
    cache->blocks.assign(blocks_.size(), {});
    cache->pool_argmax.assign(blocks_.size(), {});
    cache->pool_input_shape.assign(blocks_.size(), {});
  }
  nn::Volume<T> cur = input;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    cur = blocks_[b].forward(p, cur, slope, cache ? &cache->blocks[b] : nullptr);
    if (cache) cache->pool_input_shape[b] = {cur.channels, cur.height, cur.width};
    cur = nn::maxpool2(cur, cache ? &cache->pool_argmax[b] : nullptr);
  }
  if (cache) cache->head_input = cur;
  const nn::Volume<T> score_map = nn::conv_forward(head_, p, cur);
  T sum = T(0);
  for (T v : score_map.data) sum += v;
  return sum / static_cast<T>(score_map.data.size());
}

template <class T>
void Qam<T>::backward(const Cache& cache, T dscore, std::span<T> grad) const {
  const std::span<const T> p(params_.values);
  const T slope = static_cast<T>(cfg_.leaky_slope);
  const auto& hin = cache.head_input;
  nn::Volume<T> dmap(1, hin.height, hin.width, dscore / static_cast<T>(hin.plane()));
  nn::Volume<T> g = nn::conv_backward(head_, p, hin, dmap, grad);
  for (int b = static_cast<int>(blocks_.size()) - 1; b >= 0; --b) {
    const auto& s = cache.pool_input_shape[b];
    g = nn::maxpool2_backward(g, cache.pool_argmax[b], s[0], s[1], s[2]);
    g = blocks_[b].backward(p, cache.blocks[b], std::move(g), grad, slope, b > 0);
  }
}

// ---------------------------------------------------------------------------
// Batch helpers

template <class T>
nn::Volume<T> image_volume(const Image2D& image) {
  nn::Volume<T> v(1, image.height, image.width);
  for (std::size_t i = 0; i < image.size(); ++i) v.data[i] = static_cast<T>(image.values[i]);
  return v;
}

template <class T>
nn::Volume<T> mask_volume(const MaskSet& masks) {
  require(!masks.channels.empty(), "mask set has no channels");
  const auto& first = masks.channels.front();
  nn::Volume<T> v(static_cast<int>(masks.channels.size()), first.height, first.width);
  for (std::size_t c = 0; c < masks.channels.size(); ++c)
    for (std::size_t i = 0; i < first.size(); ++i)
      v.data[c * v.plane() + i] = masks.channels[c].values[i] ? T(1) : T(0);
  return v;
}

template <class T>
nn::Volume<T> qam_input(const Sample& s) {
  for (const auto& ch : s.masks.channels)
    require(ch.height == s.image.height && ch.width == s.image.width, "labels of " + s.id + " are not aligned with the image");
  return nn::concat_channels(image_volume<T>(s.image), mask_volume<T>(s.masks));
}

template <class T>
std::vector<nn::Volume<T>> seg_forward(const SegNet<T>& net, std::span<const Sample* const> batch) {
  std::vector<nn::Volume<T>> out;
  out.reserve(batch.size());
  for (const Sample* s : batch) out.push_back(net.forward(image_volume<T>(s->image)));
  return out;
}

template <class T>
std::vector<T> qam_forward(const Qam<T>& net, std::span<const Sample* const> batch) {
  require(!batch.empty(), "quality scoring needs a non-empty batch");
  std::vector<T> out;
  out.reserve(batch.size());
  for (const Sample* s : batch) out.push_back(net.forward(qam_input<T>(*s)));
  return out;
}

#define PAL_MODELS_INSTANTIATE(T)                                                           \
  template class SegNet<T>;                                                                 \
  template class Qam<T>;                                                                    \
  template nn::Volume<T> image_volume<T>(const Image2D&);                                   \
  template nn::Volume<T> mask_volume<T>(const MaskSet&);                                    \
  template nn::Volume<T> qam_input<T>(const Sample&);                                       \
  template std::vector<nn::Volume<T>> seg_forward<T>(const SegNet<T>&,                      \
                                                     std::span<const Sample* const>);       \
  template std::vector<T> qam_forward<T>(const Qam<T>&, std::span<const Sample* const>);

PAL_MODELS_INSTANTIATE(float)
PAL_MODELS_INSTANTIATE(double)

#undef PAL_MODELS_INSTANTIATE

}  // namespace pal
