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


#include <set>

#include "corruption.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace pal;

TEST_CASE("disk structuring element") {
  CHECK_THROWS_AS(StructuringElement::disk(0), Error);
  CHECK(StructuringElement::disk(1).offsets.size() == 5);
  CHECK(StructuringElement::disk(2).offsets.size() == 13);
  for (int r = 1; r <= 15; ++r) {
    std::size_t n = 0;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) n += dy * dy + dx * dx <= r * r;
    CHECK(StructuringElement::disk(r).offsets.size() == n);
  }
}

TEST_CASE("morphology worked examples") {
  SUBCASE("dilating a single pixel by 1 gives a plus") {
    Mask m(9, 9);
    m(4, 4) = 1;
    const Mask d = dilate(m, 1);
    CHECK(count_foreground(d) == 5);
    CHECK(d(3, 4) == 1);
    CHECK(d(5, 4) == 1);
    CHECK(d(4, 3) == 1);
    CHECK(d(4, 5) == 1);
    CHECK(d(3, 3) == 0);
  }
  SUBCASE("eroding a full image by 1 keeps the 7x7 interior") {
    const Mask e = erode(Mask(9, 9, 1), 1);
    CHECK(count_foreground(e) == 49);
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x) {
        const bool interior = y >= 1 && y <= 7 && x >= 1 && x <= 7;
        CHECK(e(y, x) == interior);
      }
  }
  SUBCASE("erosion can empty a small region") {
    Mask m(16, 16);
    for (int y = 6; y < 9; ++y)
      for (int x = 6; x < 9; ++x) m(y, x) = 1;
    CHECK(count_foreground(erode(m, 2)) == 0);
  }
  SUBCASE("radius below one is refused") {
    CHECK_THROWS_AS(dilate(Mask(4, 4), 0), Error);
    CHECK_THROWS_AS(erode(Mask(4, 4), -1), Error);
  }
}

TEST_CASE("morphology matches a brute-force disk oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const int h = rng.integer(5, 40), w = rng.integer(5, 40), r = rng.integer(1, 9);
    const Mask m = test::random_mask(rng, h, w, rng.uniform(0.02, 0.9));
    const Mask d = dilate(m, r), e = erode(m, r);
    CHECK(d == test::naive_morph(m, r, true));
    CHECK(e == test::naive_morph(m, r, false));
    CHECK(test::subset(m, d));
    CHECK(test::subset(e, m));
  }
}

namespace {

Dataset blank_dataset(int n) {
  Dataset d = generate_synthetic(n, 32, 2, 5);
  return d;
}

}  // namespace

TEST_CASE("corrupt") {
  const Dataset d = blank_dataset(10);
  NoiseSpec spec;
  spec.fraction = 0.5;
  spec.radius_min = 1;
  spec.radius_max = 3;
  spec.op_policy = OpPolicy::random_either;
  spec.seed = 9;

  SUBCASE("corrupts round_half_up(fraction * N) distinct samples") {
    const auto r = corrupt(d, spec);
    CHECK(r.records.size() == 5);
    std::set<std::string> ids;
    for (const auto& rec : r.records) {
      ids.insert(rec.sample_id);
      CHECK(rec.radius >= 1);
      CHECK(rec.radius <= 3);
    }
    CHECK(ids.size() == 5);
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < r.dataset.size(); ++i) {
      const Sample& s = r.dataset.samples[i];
      flagged += s.corrupted;
      CHECK(s.image == d.samples[i].image);
      if (s.corrupted) {
        REQUIRE(s.clean_masks.has_value());
        CHECK(*s.clean_masks == d.samples[i].masks);
        CHECK(ids.count(s.id) == 1);
      } else {
        CHECK(s.masks == d.samples[i].masks);
      }
    }
    CHECK(flagged == 5);
  }
  SUBCASE("one op and radius per sample, applied to every channel") {
    const auto r = corrupt(d, spec);
    for (const auto& rec : r.records) {
      const Sample* s = nullptr;
      for (const auto& x : r.dataset.samples)
        if (x.id == rec.sample_id) s = &x;
      REQUIRE(s);
      for (std::size_t c = 0; c < s->masks.channels.size(); ++c) {
        const Mask expect = test::naive_morph(s->clean_masks->channels[c], rec.radius,
                                              rec.op == MorphOp::dilate);
        CHECK(s->masks.channels[c] == expect);
      }
    }
  }
  SUBCASE("deterministic in the seed") {
    CHECK(corrupt(d, spec).records == corrupt(d, spec).records);
    NoiseSpec other = spec;
    other.seed = 10;
    CHECK(corrupt(d, spec).records != corrupt(d, other).records);
  }
  SUBCASE("165 samples at one half corrupt 83 (round half up)") {
    Dataset big;
    big.class_names = {"c"};
    for (int i = 0; i < 165; ++i) {
      Sample s;
      s.id = "s" + std::to_string(i);
      s.image = Image2D(8, 8);
      s.masks.class_names = {"c"};
      s.masks.channels = {Mask(8, 8)};
      big.samples.push_back(s);
    }
    const auto r = corrupt(big, spec);
    CHECK(r.records.size() == 83);
  }
  SUBCASE("fraction zero leaves the data alone") {
    NoiseSpec none = spec;
    none.fraction = 0.0;
    const auto r = corrupt(d, none);
    CHECK(r.records.empty());
    CHECK(r.dataset == d);
  }
  SUBCASE("already corrupted data is refused") {
    const auto r = corrupt(d, spec);
    try {
      corrupt(r.dataset, spec);
      FAIL("expected a state conflict");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::state_conflict);
    }
  }
  SUBCASE("emptied classes are recorded") {
    Dataset tiny;
    tiny.class_names = {"a", "b"};
    Sample s;
    s.id = "t";
    s.image = Image2D(20, 20);
    s.masks.class_names = tiny.class_names;
    Mask small(20, 20), large(20, 20);
    small(10, 10) = 1;
    for (int y = 2; y < 18; ++y)
      for (int x = 2; x < 18; ++x) large(y, x) = 1;
    s.masks.channels = {small, large};
    tiny.samples.push_back(s);
    NoiseSpec er{1.0, 2, 2, OpPolicy::erode, 1};
    const auto r = corrupt(tiny, er);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].op == MorphOp::erode);
    CHECK(r.records[0].emptied_classes == std::vector<std::string>{"a"});
  }
}

TEST_CASE("noise spec validation") {
  CHECK_THROWS_AS((NoiseSpec{1.5, 1, 2, OpPolicy::dilate, 0}).validate(), Error);
  CHECK_THROWS_AS((NoiseSpec{0.5, 3, 2, OpPolicy::dilate, 0}).validate(), Error);
  CHECK_THROWS_AS((NoiseSpec{0.5, 0, 2, OpPolicy::dilate, 0}).validate(), Error);
  CHECK_NOTHROW((NoiseSpec{0.5, 5, 13, OpPolicy::dilate, 0}).validate());
  CHECK_THROWS_AS(NoiseSpec::from_json_text(R"({"fraction":0.5,"bogus":1})"), Error);
  const auto s = NoiseSpec::from_json_text(
      R"({"fraction":0.25,"radius_min":2,"radius_max":4,"op_policy":"erode","seed":3})");
  CHECK(s.fraction == 0.25);
  CHECK(s.op_policy == OpPolicy::erode);
  CHECK(parse_op_policy("random_either") == OpPolicy::random_either);
  CHECK_THROWS_AS(parse_op_policy("blur"), Error);
}

TEST_CASE("manifest round trip") {
  test::TempDir tmp("manifest");
  const Dataset d = blank_dataset(6);
  const NoiseSpec spec{0.5, 1, 4, OpPolicy::random_either, 77};
  const auto r = corrupt(d, spec);
  save_manifest(tmp / "m.json", spec, r.records);
  const auto [spec2, recs2] = load_manifest(tmp / "m.json");
  CHECK(spec2.fraction == spec.fraction);
  CHECK(spec2.radius_min == 1);
  CHECK(spec2.radius_max == 4);
  CHECK(spec2.seed == 77);
  CHECK(recs2 == r.records);
  const auto j = nlohmann::json::parse(test::slurp(tmp / "m.json"));
  CHECK(j.contains("noise_spec"));
  CHECK(j["records"].size() == 3);
}
