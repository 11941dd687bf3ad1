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

#include "corruption.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "image_io.hpp"
#include "json.hpp"

namespace pal {
using nlohmann::json;

std::string to_string(MorphOp op) { return op == MorphOp::erode ? "erode" : "dilate"; }

std::string to_string(OpPolicy p) {
  switch (p) {
    case OpPolicy::erode: return "erode";
    case OpPolicy::dilate: return "dilate";
    case OpPolicy::random_either: return "random_either";
  }
  return "random_either";
}

MorphOp parse_morph_op(const std::string& s) {
  if (s == "erode") return MorphOp::erode;
  if (s == "dilate") return MorphOp::dilate;
  fail(ErrorCode::invalid_argument, "unknown morphological op '" + s + "'");
}

OpPolicy parse_op_policy(const std::string& s) {
  if (s == "erode") return OpPolicy::erode;
  if (s == "dilate") return OpPolicy::dilate;
  if (s == "random_either" || s == "either") return OpPolicy::random_either;
  fail(ErrorCode::invalid_argument, "unknown op policy '" + s + "' (erode|dilate|random_either)");
}

void NoiseSpec::validate() const {
  require(fraction >= 0.0 && fraction <= 1.0, "noise fraction must lie in [0, 1]");
  require(radius_min >= 1, "radius_min must be >= 1");
  require(radius_max >= radius_min, "radius_max must be >= radius_min");
}

NoiseSpec NoiseSpec::from_json_text(const std::string& text) {
  NoiseSpec ns;
  try {
    const json n = json::parse(text);
    require(n.is_object(), "noise spec must be a JSON object");
    for (const auto& [key, _] : n.items())
      if (key != "fraction" && key != "radius_min" && key != "radius_max" && key != "op_policy" &&
          key != "seed")
        fail(ErrorCode::invalid_argument, "unknown noise spec key '" + key + "'");
    ns.fraction = n.at("fraction").get<double>();
    ns.radius_min = n.at("radius_min").get<int>();
    ns.radius_max = n.at("radius_max").get<int>();
    if (n.contains("op_policy")) ns.op_policy = parse_op_policy(n["op_policy"].get<std::string>());
    ns.seed = n.value("seed", ns.seed);
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("noise spec: ") + e.what());
  }
  ns.validate();
  return ns;
}

StructuringElement StructuringElement::disk(int radius) {
  require(radius >= 1, "structuring element radius must be >= 1");
  StructuringElement se;
  se.radius = radius;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dy * dy + dx * dx <= radius * radius) se.offsets.emplace_back(dy, dx);
  return se;
}

namespace {

// Half-width of the disk's horizontal chord at vertical offset dy.
std::vector<int> chord_half_widths(int r) {
  std::vector<int> w(2 * r + 1);
  for (int dy = -r; dy <= r; ++dy) {
    int hw = 0;
    while ((hw + 1) * (hw + 1) + dy * dy <= r * r) ++hw;
    w[dy + r] = hw;
  }
  return w;
}

// Row-wise inclusive prefix counts: p(y, x+1) = number of ones in row y
// before column x+1.
std::vector<int> row_prefix(const Mask& m) {
  const int w1 = m.width + 1;
  std::vector<int> p(static_cast<std::size_t>(m.height) * w1, 0);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      p[y * w1 + x + 1] = p[y * w1 + x] + (m(y, x) != 0);
  return p;
}

// Ones in row y within columns [x0, x1], clipped to the image.
inline int row_count(const std::vector<int>& p, int w, int y, int x0, int x1) {
  const int a = std::max(x0, 0), b = std::min(x1, w - 1);
  if (a > b) return 0;
  const int w1 = w + 1;
  return p[y * w1 + b + 1] - p[y * w1 + a];
}

}  // namespace

Mask dilate(const Mask& mask, int radius) {
  require(radius >= 1, "dilation radius must be >= 1");
  const auto hw = chord_half_widths(radius);
  const auto p = row_prefix(mask);
  Mask out(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      bool hit = false;
      for (int dy = -radius; dy <= radius && !hit; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= mask.height) continue;
        const int h = hw[dy + radius];
        hit = row_count(p, mask.width, yy, x - h, x + h) > 0;
      }
      out(y, x) = hit;
    }
  }
  return out;
}

Mask erode(const Mask& mask, int radius) {
  require(radius >= 1, "erosion radius must be >= 1");
  const auto hw = chord_half_widths(radius);
  const auto p = row_prefix(mask);
  Mask out(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask(y, x)) continue;
      bool keep = true;
      for (int dy = -radius; dy <= radius && keep; ++dy) {
        const int yy = y + dy;
        const int h = hw[dy + radius];
        // Any part of the element outside the image lands on background.
        if (yy < 0 || yy >= mask.height || x - h < 0 || x + h >= mask.width) {
          keep = false;
          break;
        }
        keep = row_count(p, mask.width, yy, x - h, x + h) == 2 * h + 1;
      }
      out(y, x) = keep;
    }
  }
  return out;
}

CorruptionResult corrupt(const Dataset& d, const NoiseSpec& spec) {
  spec.validate();
  require(!d.empty(), "cannot corrupt an empty dataset");
  if (d.any_corrupted())
    fail(ErrorCode::state_conflict, "dataset already carries corrupted labels");

  const std::size_t n = d.size();
  const std::size_t k = round_half_up(spec.fraction * static_cast<double>(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng pick = Rng::derive(spec.seed, 0x504943);
  pick.shuffle(order);
  std::vector<std::size_t> chosen(order.begin(), order.begin() + k);
  std::sort(chosen.begin(), chosen.end());

  // All draws happen serially in sample order before any mask is touched.
  Rng draw = Rng::derive(spec.seed, 0x445257);
  CorruptionResult result;
  result.dataset = d;
  for (std::size_t idx : chosen) {
    CorruptionRecord rec;
    rec.sample_id = d.samples[idx].id;
    switch (spec.op_policy) {
      case OpPolicy::erode: rec.op = MorphOp::erode; break;
      case OpPolicy::dilate: rec.op = MorphOp::dilate; break;
      case OpPolicy::random_either:
        rec.op = draw.uniform() < 0.5 ? MorphOp::erode : MorphOp::dilate;
        break;
    }
    rec.radius = draw.integer(spec.radius_min, spec.radius_max);
    result.records.push_back(std::move(rec));
  }

  for (std::size_t i = 0; i < chosen.size(); ++i) {
    Sample& s = result.dataset.samples[chosen[i]];
    CorruptionRecord& rec = result.records[i];
    s.clean_masks = s.masks;
    s.corrupted = true;
    for (std::size_t c = 0; c < s.masks.channels.size(); ++c) {
      Mask& ch = s.masks.channels[c];
      ch = rec.op == MorphOp::erode ? erode(ch, rec.radius) : dilate(ch, rec.radius);
      if (count_foreground(ch) == 0 && count_foreground(s.clean_masks->channels[c]) > 0)
        rec.emptied_classes.push_back(s.masks.class_names[c]);
    }
  }
  return result;
}

std::string manifest_json(const NoiseSpec& spec, const std::vector<CorruptionRecord>& records) {
  json recs = json::array();
  for (const auto& r : records)
    recs.push_back({{"sample_id", r.sample_id},
                    {"op", to_string(r.op)},
                    {"radius", r.radius},
                    {"emptied_classes", r.emptied_classes}});
  json j{{"noise_spec",
          {{"fraction", spec.fraction},
           {"radius_min", spec.radius_min},
           {"radius_max", spec.radius_max},
           {"op_policy", to_string(spec.op_policy)},
           {"seed", spec.seed}}},
         {"records", recs}};
  return j.dump(2) + "\n";
}

void save_manifest(const std::filesystem::path& path, const NoiseSpec& spec,
                   const std::vector<CorruptionRecord>& records) {
  write_text_file(path, manifest_json(spec, records));
}

std::pair<NoiseSpec, std::vector<CorruptionRecord>> load_manifest(
    const std::filesystem::path& path) {
  try {
    return parse_manifest(read_text_file(path));
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

std::pair<NoiseSpec, std::vector<CorruptionRecord>> parse_manifest(const std::string& text) {
  try {
    const json j = json::parse(text);
    NoiseSpec spec;
    const auto& ns = j.at("noise_spec");
    spec.fraction = ns.at("fraction").get<double>();
    spec.radius_min = ns.at("radius_min").get<int>();
    spec.radius_max = ns.at("radius_max").get<int>();
    spec.op_policy = parse_op_policy(ns.at("op_policy").get<std::string>());
    spec.seed = ns.at("seed").get<std::uint64_t>();
    std::vector<CorruptionRecord> records;
    for (const auto& r : j.at("records")) {
      CorruptionRecord rec;
      rec.sample_id = r.at("sample_id").get<std::string>();
      rec.op = parse_morph_op(r.at("op").get<std::string>());
      rec.radius = r.at("radius").get<int>();
      rec.emptied_classes = r.at("emptied_classes").get<std::vector<std::string>>();
      records.push_back(std::move(rec));
    }
    return {spec, std::move(records)};
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("corruption manifest: ") + e.what());
  }
}

}  // namespace pal
