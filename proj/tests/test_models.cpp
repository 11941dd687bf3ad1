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


#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "models.hpp"

using namespace pal;

namespace {

// Relative error with an absolute floor at the central-difference roundoff
// level (machine epsilon * |f| / h with |f| ~ 1, h = 1e-6).
double rel_err(double a, double b) {
  return std::abs(a - b) / (std::max(std::abs(a), std::abs(b)) + 1e-4);
}

template <class V, class F>
double central_diff(V& params, std::size_t i, F&& f) {
  const double old = params[i], h = 1e-6;
  params[i] = old + h;
  const double a = f();
  params[i] = old - h;
  const double b = f();
  params[i] = old;
  return (a - b) / (2 * h);
}

}  // namespace

TEST_CASE("layer primitives") {
  SUBCASE("3x3 conv against a hand sum") {
    nn::ParameterSet<double> p;
    const nn::Conv c = nn::add_conv(p, "c", 1, 1, 3);
    for (std::size_t i = 0; i < 9; ++i) p.values[c.weight + i] = 1.0;
    p.values[c.bias] = 0.5;
    nn::Volume<double> in(1, 3, 3, 1.0);
    const auto out = nn::conv_forward<double>(c, p.values, in);
    CHECK(out.at(0, 1, 1) == doctest::Approx(9.5));
    CHECK(out.at(0, 0, 0) == doctest::Approx(4.5));  // zero padding
    CHECK(out.at(0, 0, 1) == doctest::Approx(6.5));
  }
  SUBCASE("ceil-mode max pool keeps the odd border") {
    nn::Volume<double> in(1, 3, 3);
    for (int i = 0; i < 9; ++i) in.data[i] = i;
    std::vector<int> arg;
    const auto out = nn::maxpool2(in, &arg);
    CHECK(out.height == 2);
    CHECK(out.width == 2);
    CHECK(out.at(0, 0, 0) == 4);
    CHECK(out.at(0, 1, 1) == 8);
    CHECK(out.at(0, 1, 0) == 7);
  }
  SUBCASE("upsample repeats each pixel") {
    nn::Volume<double> in(1, 1, 2);
    in.data = {1.0, 2.0};
    const auto out = nn::upsample2(in);
    CHECK(out.height == 2);
    CHECK(out.width == 4);
    CHECK(out.at(0, 1, 1) == 1.0);
    CHECK(out.at(0, 0, 2) == 2.0);
  }
  SUBCASE("initialisation stays inside the fan-in bound") {
    nn::ParameterSet<double> p;
    const nn::Conv c = nn::add_conv(p, "c", 4, 6, 3);
    Rng rng(1);
    nn::init_conv(c, p, rng);
    const double bound = 1.0 / std::sqrt(36.0);
    for (double v : p.values) CHECK(std::abs(v) <= bound);
  }
}

TEST_CASE("segmentation network shapes and gradients") {
  const ModelProfile profile;
  SUBCASE("logits match the image size, one map per class") {
    const auto net = build_segnet<double>(segnet_config(profile, 3), 1);
    nn::Volume<double> im(1, 32, 32, 0.5);
    const auto out = net.forward(im);
    CHECK(out.channels == 3);
    CHECK(out.height == 32);
    CHECK(out.width == 32);
    for (double v : out.data) CHECK(std::isfinite(v));
  }
  SUBCASE("same seed, same weights") {
    CHECK(build_segnet<double>(segnet_config(profile, 1), 9).params() ==
          build_segnet<double>(segnet_config(profile, 1), 9).params());
    CHECK_FALSE(build_segnet<double>(segnet_config(profile, 1), 9).params() ==
                build_segnet<double>(segnet_config(profile, 1), 10).params());
  }
  SUBCASE("sizes not divisible by the pooling factor are refused") {
    SegNetConfig cfg = segnet_config(profile, 1);
    cfg.depth = 4;
    const auto net = build_segnet<double>(cfg, 1);
    CHECK_THROWS_AS(net.forward(nn::Volume<double>(1, 70, 70)), Error);
    CHECK_NOTHROW(net.forward(nn::Volume<double>(1, 64, 64)));
  }
  SUBCASE("depth one is refused") {
    SegNetConfig cfg = segnet_config(profile, 1);
    cfg.depth = 1;
    CHECK_THROWS_AS(build_segnet<double>(cfg, 1), Error);
  }
  SUBCASE("backward matches central differences") {
    auto net = build_segnet<double>(segnet_config(profile, 2), 4);
    Rng rng(3);
    nn::Volume<double> im(1, 16, 16);
    for (auto& v : im.data) v = rng.uniform();
    typename SegNet<double>::Cache cache;
    const auto out = net.forward(im, &cache);
    nn::Volume<double> dl(out.channels, out.height, out.width);
    for (auto& v : dl.data) v = rng.uniform() - 0.5;
    std::vector<double> grad(net.params().size(), 0.0);
    net.backward(cache, dl, grad);
    auto f = [&] {
      const auto o = net.forward(im);
      double t = 0;
      for (std::size_t j = 0; j < o.data.size(); ++j) t += o.data[j] * dl.data[j];
      return t;
    };
    double worst = 0;
    for (int k = 0; k < 60; ++k) {
      const std::size_t i = rng.below(grad.size());
      worst = std::max(worst, rel_err(central_diff(net.params().values, i, f), grad[i]));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("quality network shapes and gradients") {
  const ModelProfile profile;
  SUBCASE("input has one channel per class plus the image") {
    CHECK(qam_config(profile, 1).in_channels == 2);
    CHECK(qam_config(profile, 3).in_channels == 4);
  }
  SUBCASE("all-zero input yields a finite score") {
    const auto q = build_qam<double>(qam_config(profile, 1), 2);
    CHECK(std::isfinite(q.forward(nn::Volume<double>(2, 32, 32))));
    const auto qf = build_qam<float>(qam_config(profile, 1), 2);
    CHECK(std::isfinite(qf.forward(nn::Volume<float>(2, 48, 48))));
  }
  SUBCASE("a wrong channel count is refused") {
    const auto q = build_qam<double>(qam_config(profile, 1), 2);
    CHECK_THROWS_AS(q.forward(nn::Volume<double>(3, 32, 32)), Error);
  }
  SUBCASE("backward matches central differences") {
    auto q = build_qam<double>(qam_config(profile, 1), 4);
    Rng rng(6);
    nn::Volume<double> x(2, 32, 32);
    for (auto& v : x.data) v = rng.uniform();
    typename Qam<double>::Cache cache;
    q.forward(x, &cache);
    std::vector<double> grad(q.params().size(), 0.0);
    q.backward(cache, 1.0, grad);
    double worst = 0;
    for (int k = 0; k < 60; ++k) {
      const std::size_t i = rng.below(grad.size());
      worst = std::max(worst, rel_err(central_diff(q.params().values, i,
                                                   [&] { return q.forward(x); }),
                                      grad[i]));
    }
    CHECK(worst < 1e-5);
  }
  SUBCASE("scores depend on the labels") {
    const auto q = build_qam<double>(qam_config(profile, 1), 4);
    const Dataset d = generate_synthetic(1, 32, 1, 3);
    Sample other = d.samples[0];
    other.masks.channels[0] = Mask(32, 32, 1);
    const std::vector<const Sample*> batch{&d.samples[0], &other};
    const auto s = qam_forward(q, std::span<const Sample* const>(batch));
    CHECK(s.size() == 2);
    CHECK(s[0] != s[1]);
  }
}

TEST_CASE("model profile") {
  ModelProfile p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.hash() == ModelProfile::from_json_text(p.canonical_json()).hash());
  ModelProfile q = p;
  q.seg_base_width = 16;
  CHECK(p.hash() != q.hash());
  CHECK_THROWS_AS(ModelProfile::from_json_text(R"({"name":"x","mystery":1})"), Error);
  q = p;
  q.normalization = "batch";
  CHECK_THROWS_AS(q.validate(), Error);
}
