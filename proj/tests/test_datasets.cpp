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
#include <set>

#include "datasets.hpp"
#include "doctest.h"
#include "image_io.hpp"
#include "test_util.hpp"

using namespace pal;

TEST_CASE("round_half_up rounds halves away from zero") {
  CHECK(round_half_up(82.5) == 83);
  CHECK(round_half_up(100.0) == 100);
  CHECK(round_half_up(0.0) == 0);
  CHECK(round_half_up(41.25) == 41);
  CHECK(round_half_up(123.75) == 124);
}

TEST_CASE("rng streams are reproducible and bounded") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng c(7);
  for (int i = 0; i < 10000; ++i) {
    const auto k = c.below(13);
    CHECK(k < 13);
    const int v = c.integer(5, 13);
    CHECK(v >= 5);
    CHECK(v <= 13);
  }
  CHECK(Rng::derive(1, 2).next() != Rng::derive(1, 3).next());
}

TEST_CASE("synthetic generator") {
  SUBCASE("four samples, one non-empty channel each") {
    const Dataset d = generate_synthetic(4, 64, 1, 7);
    REQUIRE(d.size() == 4);
    for (const auto& s : d.samples) {
      REQUIRE(s.masks.channels.size() == 1);
      CHECK(count_foreground(s.masks.channels[0]) > 0);
      CHECK(s.image.height == 64);
      CHECK_FALSE(s.corrupted);
      for (float v : s.image.values) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
    CHECK(d.class_names == std::vector<std::string>{"class0"});
  }
  SUBCASE("deterministic in the seed") {
    CHECK(generate_synthetic(20, 64, 2, 1) == generate_synthetic(20, 64, 2, 1));
    CHECK_FALSE(generate_synthetic(5, 32, 1, 1) == generate_synthetic(5, 32, 1, 2));
  }
  SUBCASE("rejects sizes below the minimum") {
    CHECK_THROWS_AS(generate_synthetic(4, 8, 1, 1), Error);
    CHECK_THROWS_AS(generate_synthetic(0, 32, 1, 1), Error);
  }
}

TEST_CASE("split") {
  const Dataset d = generate_synthetic(10, 32, 1, 3);
  SUBCASE("half and half, disjoint") {
    auto [a, b] = split(d, SplitSpec{0.5, 3});
    CHECK(a.size() == 5);
    CHECK(b.size() == 5);
    std::set<std::string> ids;
    for (const auto& s : a.samples) ids.insert(s.id);
    for (const auto& s : b.samples) CHECK(ids.count(s.id) == 0);
  }
  SUBCASE("same seed, same partition") {
    auto [a1, b1] = split(d, SplitSpec{0.7, 9});
    auto [a2, b2] = split(d, SplitSpec{0.7, 9});
    CHECK(a1 == a2);
    CHECK(b1 == b2);
  }
  SUBCASE("247 samples at 165/247 give 165 and 82") {
    Dataset big;
    big.class_names = {"c"};
    for (int i = 0; i < 247; ++i) {
      Sample s;
      s.id = "x" + std::to_string(i);
      s.image = Image2D(16, 16);
      s.masks.class_names = {"c"};
      s.masks.channels = {Mask(16, 16)};
      big.samples.push_back(s);
    }
    auto [a, b] = split(big, SplitSpec{165.0 / 247.0, 1});
    CHECK(a.size() == 165);
    CHECK(b.size() == 82);
  }
  SUBCASE("an empty side is refused") {
    CHECK_THROWS_AS(split(generate_synthetic(2, 16, 1, 1), SplitSpec{0.1, 0}), Error);
  }
}

TEST_CASE("batch iterator") {
  Dataset d;
  d.class_names = {"c"};
  for (int i = 0; i < 165; ++i) {
    Sample s;
    s.id = "x" + std::to_string(i);
    s.image = Image2D(16, 16);
    s.masks.class_names = {"c"};
    s.masks.channels = {Mask(16, 16)};
    d.samples.push_back(s);
  }
  SUBCASE("165 by 32 gives six batches, the last short") {
    const auto batches = batch_iterator(d, 32, 5, 2);
    REQUIRE(batches.size() == 6);
    for (int i = 0; i < 5; ++i) {
      CHECK(batches[i].size() == 32);
      CHECK_FALSE(batches[i].partial);
    }
    CHECK(batches[5].size() == 5);
    CHECK(batches[5].partial);
  }
  SUBCASE("batch size N is one permutation") {
    const auto batches = batch_iterator(d, 165, 1, 0);
    REQUIRE(batches.size() == 1);
    std::set<const Sample*> seen(batches[0].samples.begin(), batches[0].samples.end());
    CHECK(seen.size() == 165);
  }
  SUBCASE("deterministic in seed and epoch") {
    const auto a = batch_iterator(d, 16, 5, 2), b = batch_iterator(d, 16, 5, 2);
    const auto c = batch_iterator(d, 16, 5, 3);
    REQUIRE(a.size() == b.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].samples == b[i].samples);
      differs = differs || a[i].samples != c[i].samples;
    }
    CHECK(differs);
  }
}

TEST_CASE("resize") {
  const Dataset d = generate_synthetic(3, 32, 2, 4);
  SUBCASE("identity at the current size") { CHECK(resize_dataset(d, 32) == d); }
  SUBCASE("downscale keeps binary masks") {
    const Dataset r = resize_dataset(d, 16);
    for (const auto& s : r.samples) {
      CHECK(s.image.height == 16);
      CHECK(s.image.width == 16);
      for (const auto& ch : s.masks.channels)
        for (auto v : ch.values) CHECK((v == 0 || v == 1));
    }
  }
  SUBCASE("1024 to 256") {
    Dataset big;
    big.class_names = {"c"};
    Sample s;
    s.id = "big";
    s.image = Image2D(1024, 1024, 0.5f);
    s.masks.class_names = {"c"};
    s.masks.channels = {Mask(1024, 1024, 1)};
    big.samples.push_back(s);
    const Dataset r = resize_dataset(big, 256);
    CHECK(r.samples[0].image.height == 256);
    CHECK(r.samples[0].masks.channels[0].width == 256);
  }
}

TEST_CASE("dataset persistence round trip") {
  test::TempDir tmp("ds");
  const Dataset d = generate_synthetic(5, 32, 2, 11);
  save_dataset(d, tmp / "a");
  const Dataset back = load_dataset(tmp / "a");
  REQUIRE(back.size() == d.size());
  CHECK(back.class_names == d.class_names);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back.samples[i].id == d.samples[i].id);
    CHECK(back.samples[i].masks == d.samples[i].masks);
    // Images are stored as 8-bit PNG.
    for (std::size_t k = 0; k < d.samples[i].image.values.size(); ++k)
      CHECK(std::abs(back.samples[i].image.values[k] - d.samples[i].image.values[k]) <= 0.5f / 255.0f + 1e-6f);
  }
  // Saving the reloaded copy reproduces the same files.
  save_dataset(back, tmp / "b");
  for (const auto& e : std::filesystem::recursive_directory_iterator(tmp / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), tmp / "a");
    CHECK(test::slurp(e.path()) == test::slurp(tmp / "b" / rel.string()));
  }
}

TEST_CASE("JSRT-style ingestion") {
  test::TempDir tmp("jsrt");
  const auto img_dir = tmp / "images", mask_dir = tmp / "masks";
  std::filesystem::create_directories(img_dir);
  const std::vector<std::string> structures{"left lung", "right lung", "heart", "left clavicle",
                                            "right clavicle"};
  for (const auto& s : structures) std::filesystem::create_directories(mask_dir / s);

  auto write_mask = [&](const std::string& structure, const std::string& stem, int x0, int x1) {
    Mask m(32, 32);
    for (int y = 4; y < 20; ++y)
      for (int x = x0; x < x1; ++x) m(y, x) = 1;
    write_png_gray8(mask_dir / structure / (stem + ".png"), mask_to_gray8(m));
  };
  for (const std::string stem : {"a", "b"}) {
    Image2D img(32, 32);
    for (int i = 0; i < 32 * 32; ++i) img.values[i] = static_cast<float>(i % 97) / 96.0f;
    write_png_gray8(img_dir / (stem + ".png"), to_gray8(img));
    write_mask("left lung", stem, 2, 8);
    write_mask("right lung", stem, 20, 26);
    write_mask("heart", stem, 10, 18);
    write_mask("left clavicle", stem, 0, 2);
    if (stem == "a") write_mask("right clavicle", stem, 28, 30);
  }

  const auto r = load_jsrt(img_dir, mask_dir, ClassGrouping::scr_default());
  REQUIRE(r.dataset.size() == 1);
  CHECK(r.skipped == 1);
  CHECK(r.dataset.class_names == std::vector<std::string>{"lungs", "heart", "clavicles"});
  const Sample& s = r.dataset.samples[0];
  // lungs channel is the pixelwise OR of both lung masks.
  CHECK(count_foreground(s.masks.channels[0]) == 2 * 16 * 6);
  CHECK(s.masks.channels[0](10, 3) == 1);
  CHECK(s.masks.channels[0](10, 22) == 1);
  CHECK(s.masks.channels[0](10, 12) == 0);
  CHECK(count_foreground(s.masks.channels[1]) == 16 * 8);
  const auto [lo, hi] = std::minmax_element(s.image.values.begin(), s.image.values.end());
  CHECK(*lo == doctest::Approx(0.0));
  CHECK(*hi == doctest::Approx(1.0));

  test::TempDir empty("jsrt_empty");
  std::filesystem::create_directories(empty / "i");
  CHECK_THROWS_AS(load_jsrt(empty / "i", empty / "m", ClassGrouping::scr_default()), Error);
}
