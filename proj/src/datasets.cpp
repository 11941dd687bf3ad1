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

#include "datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <set>

#include "image_io.hpp"
#include "json.hpp"

namespace pal {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Rasterised ellipse with pixel centres at (x + 0.5, y + 0.5).
Mask draw_ellipse(int size, double cx, double cy, double a, double b, double theta) {
  Mask m(size, size);
  const double c = std::cos(theta), s = std::sin(theta);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double u = (dx * c + dy * s) / a;
      const double v = (-dx * s + dy * c) / b;
      m(y, x) = (u * u + v * v) <= 1.0;
    }
  }
  return m;
}

std::string sample_id(int index, int count) {
  const int digits = std::max(4, static_cast<int>(std::to_string(count).size()));
  std::string num = std::to_string(index);
  if (static_cast<int>(num.size()) < digits) num.insert(0, digits - num.size(), '0');
  return "s" + num;
}

}  // namespace

bool Dataset::any_corrupted() const {
  return std::any_of(samples.begin(), samples.end(), [](const Sample& s) { return s.corrupted; });
}

void Dataset::validate() const {
  if (samples.empty()) return;
  const int h = samples.front().image.height, w = samples.front().image.width;
  std::set<std::string> ids;
  for (const auto& s : samples) {
    require(ids.insert(s.id).second, "duplicate sample id " + s.id);
    require(s.image.height == h && s.image.width == w, "sample " + s.id + " has a different size");
    require(s.masks.class_names == class_names, "sample " + s.id + " has a different class layout");
    require(s.masks.channels.size() == class_names.size(), "sample " + s.id + " channel count");
    for (const auto& ch : s.masks.channels)
      require(ch.height == h && ch.width == w, "sample " + s.id + " mask/image shape mismatch");
    require(s.corrupted == s.clean_masks.has_value(),
            "sample " + s.id + " corruption flag and clean masks disagree");
    if (s.clean_masks) {
      require(s.clean_masks->channels.size() == s.masks.channels.size(),
              "sample " + s.id + " clean mask channel count");
      for (const auto& ch : s.clean_masks->channels)
        require(ch.height == h && ch.width == w, "sample " + s.id + " clean mask shape");
    }
  }
}

Dataset generate_synthetic(int count, int size, int n_classes, std::uint64_t seed) {
  require(count >= 1, "count must be >= 1");
  require(size >= 16, "size must be >= 16");
  require(n_classes >= 1, "n_classes must be >= 1");

  Dataset d;
  d.seed = seed;
  for (int k = 0; k < n_classes; ++k) d.class_names.push_back("class" + std::to_string(k));

  Rng rng = Rng::derive(seed, 0x53594e);
  for (int i = 0; i < count; ++i) {
    Sample s;
    s.id = sample_id(i, count);
    s.masks.class_names = d.class_names;
    std::vector<double> intensity(n_classes);
    for (int k = 0; k < n_classes; ++k) {
      Mask m;
      // Semi-axes between 10% and 28% of the side, centre kept well inside
      // the frame so the ellipse never vanishes at the border.
      do {
        const double a = rng.uniform(0.10, 0.28) * size;
        const double b = rng.uniform(0.10, 0.28) * size;
        const double cx = rng.uniform(0.3, 0.7) * size;
        const double cy = rng.uniform(0.3, 0.7) * size;
        const double theta = rng.uniform(0.0, kPi);
        m = draw_ellipse(size, cx, cy, a, b, theta);
      } while (count_foreground(m) == 0);
      intensity[k] = rng.uniform(0.35, 0.65) / std::sqrt(static_cast<double>(n_classes));
      s.masks.channels.push_back(std::move(m));
    }
    s.image = Image2D(size, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        double v = 0.2;
        for (int k = 0; k < n_classes; ++k) v += intensity[k] * s.masks.channels[k](y, x);
        v += 0.1 * rng.normal();
        s.image(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

ClassGrouping ClassGrouping::scr_default() {
  return {{{"lungs", {"left lung", "right lung"}},
           {"heart", {"heart"}},
           {"clavicles", {"left clavicle", "right clavicle"}}}};
}

ClassGrouping ClassGrouping::from_json_file(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "grouping file " + path.string() + ": " + e.what());
  }
  // {"classes": [{"name": "lungs", "structures": ["left lung", "right lung"]}, ...]}
  ClassGrouping g;
  if (!j.contains("classes") || !j["classes"].is_array())
    fail(ErrorCode::format, "grouping file needs a 'classes' array");
  for (const auto& c : j["classes"]) {
    std::vector<std::string> structures = c.at("structures").get<std::vector<std::string>>();
    if (structures.empty()) fail(ErrorCode::format, "class with no structures in grouping");
    g.classes.emplace_back(c.at("name").get<std::string>(), std::move(structures));
  }
  if (g.classes.empty()) fail(ErrorCode::format, "grouping defines no classes");
  return g;
}

JsrtLoadResult load_jsrt(const fs::path& image_dir, const fs::path& mask_dir,
                         const ClassGrouping& grouping) {
  if (!fs::is_directory(image_dir)) fail(ErrorCode::io, "image dir not found: " + image_dir.string());
  if (!fs::is_directory(mask_dir)) fail(ErrorCode::io, "mask dir not found: " + mask_dir.string());
  require(!grouping.classes.empty(), "grouping defines no classes");

  std::vector<fs::path> images;
  for (const auto& e : fs::directory_iterator(image_dir))
    if (e.is_regular_file() && e.path().extension() == ".png") images.push_back(e.path());
  std::sort(images.begin(), images.end());

  JsrtLoadResult result;
  for (const auto& [name, _] : grouping.classes) result.dataset.class_names.push_back(name);

  for (const auto& img_path : images) {
    const std::string stem = img_path.stem().string();
    Sample s;
    s.id = stem;
    s.masks.class_names = result.dataset.class_names;
    const GrayRaster raster = read_png(img_path);
    s.image = normalize_minmax(raster);

    bool complete = true;
    for (const auto& [name, structures] : grouping.classes) {
      Mask merged(s.image.height, s.image.width);
      for (const auto& st : structures) {
        const fs::path mp = mask_dir / st / (stem + ".png");
        if (!fs::exists(mp)) {
          complete = false;
          break;
        }
        const Mask m = mask_from_raster(read_png(mp));
        if (!m.same_shape(merged))
          fail(ErrorCode::invalid_argument, "mask " + mp.string() + " is " +
                                                std::to_string(m.width) + "x" +
                                                std::to_string(m.height) + ", image is " +
                                                std::to_string(merged.width) + "x" +
                                                std::to_string(merged.height));
        for (std::size_t i = 0; i < m.size(); ++i) merged.values[i] |= m.values[i];
      }
      if (!complete) break;
      s.masks.channels.push_back(std::move(merged));
    }
    if (!complete) {
      ++result.skipped;
      continue;
    }
    result.dataset.samples.push_back(std::move(s));
  }
  if (result.skipped > 0)
    std::cerr << "warning: skipped " << result.skipped << " image(s) with missing masks\n";
  if (result.dataset.empty())
    fail(ErrorCode::invalid_argument, "zero samples loaded from " + image_dir.string());
  return result;
}

namespace {

Image2D resize_bilinear(const Image2D& in, int target) {
  Image2D out(target, target);
  const double scale = static_cast<double>(in.height) / target;
  for (int y = 0; y < target; ++y) {
    const double sy = std::clamp((y + 0.5) * scale - 0.5, 0.0, in.height - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, in.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < target; ++x) {
      const double sx = std::clamp((x + 0.5) * scale - 0.5, 0.0, in.width - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, in.width - 1);
      const double fx = sx - x0;
      const double top = in(y0, x0) * (1 - fx) + in(y0, x1) * fx;
      const double bot = in(y1, x0) * (1 - fx) + in(y1, x1) * fx;
      out(y, x) = static_cast<float>(std::clamp(top * (1 - fy) + bot * fy, 0.0, 1.0));
    }
  }
  return out;
}

Mask resize_nearest(const Mask& in, int target) {
  Mask out(target, target);
  const double scale = static_cast<double>(in.height) / target;
  for (int y = 0; y < target; ++y) {
    const int sy = std::min(static_cast<int>((y + 0.5) * scale), in.height - 1);
    for (int x = 0; x < target; ++x) {
      const int sx = std::min(static_cast<int>((x + 0.5) * scale), in.width - 1);
      out(y, x) = in(sy, sx);
    }
  }
  return out;
}

MaskSet resize_masks(const MaskSet& in, int target) {
  MaskSet out;
  out.class_names = in.class_names;
  for (const auto& ch : in.channels) out.channels.push_back(resize_nearest(ch, target));
  return out;
}

}  // namespace

Dataset resize_dataset(const Dataset& d, int target) {
  require(target >= 16, "resize target must be >= 16");
  for (const auto& s : d.samples)
    require(s.image.height == s.image.width,
            "sample " + s.id + " is not square; pad or crop before resizing");
  Dataset out = d;
  for (auto& s : out.samples) {
    if (s.image.height == target) continue;
    s.image = resize_bilinear(s.image, target);
    s.masks = resize_masks(s.masks, target);
    if (s.clean_masks) s.clean_masks = resize_masks(*s.clean_masks, target);
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& d, const SplitSpec& spec) {
  require(spec.train_fraction > 0.0 && spec.train_fraction < 1.0,
          "train_fraction must lie in (0, 1)");
  const std::size_t n = d.size();
  const std::size_t n_train = round_half_up(spec.train_fraction * static_cast<double>(n));
  require(n_train >= 1 && n_train < n, "split of " + std::to_string(n) +
                                           " samples at fraction " +
                                           std::to_string(spec.train_fraction) +
                                           " leaves one side empty");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::derive(spec.seed, 0x53504c);
  rng.shuffle(order);

  Dataset train, test;
  train.class_names = test.class_names = d.class_names;
  train.seed = test.seed = d.seed;
  std::vector<std::size_t> head(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> tail(order.begin() + n_train, order.end());
  // Keep the source order within each side.
  std::sort(head.begin(), head.end());
  std::sort(tail.begin(), tail.end());
  for (auto i : head) train.samples.push_back(d.samples[i]);
  for (auto i : tail) test.samples.push_back(d.samples[i]);
  return {std::move(train), std::move(test)};
}

std::vector<Batch> batch_iterator(const Dataset& d, int batch_size, std::uint64_t seed,
                                  int epoch) {
  require(batch_size >= 1 && static_cast<std::size_t>(batch_size) <= d.size(),
          "batch_size must lie in [1, N]");
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::derive(seed, 0xBA7C000000000000ULL + static_cast<std::uint64_t>(epoch));
  rng.shuffle(order);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch b;
    const std::size_t end = std::min(order.size(), start + batch_size);
    for (std::size_t i = start; i < end; ++i) b.samples.push_back(&d.samples[order[i]]);
    b.partial = b.size() < static_cast<std::size_t>(batch_size);
    batches.push_back(std::move(b));
  }
  return batches;
}

namespace {

void write_masks(const fs::path& dir, const std::string& id, const MaskSet& masks) {
  for (std::size_t k = 0; k < masks.channels.size(); ++k)
    write_png_gray8(dir / (id + "_" + masks.class_names[k] + ".png"),
                    mask_to_gray8(masks.channels[k]));
}

MaskSet read_masks(const fs::path& dir, const std::string& id,
                   const std::vector<std::string>& class_names) {
  MaskSet m;
  m.class_names = class_names;
  for (const auto& c : class_names) m.channels.push_back(mask_from_raster(read_png(dir / (id + "_" + c + ".png"))));
  return m;
}

}  // namespace

void save_dataset(const Dataset& d, const fs::path& dir) {
  d.validate();
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "masks", ec);
  if (ec) fail(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());

  json ids = json::array(), corrupted = json::array();
  for (const auto& s : d.samples) {
    ids.push_back(s.id);
    write_png_gray8(dir / "images" / (s.id + ".png"), to_gray8(s.image));
    write_masks(dir / "masks", s.id, s.masks);
    if (s.clean_masks) {
      fs::create_directories(dir / "clean_masks", ec);
      if (ec) fail(ErrorCode::io, "cannot create clean_masks dir: " + ec.message());
      write_masks(dir / "clean_masks", s.id, *s.clean_masks);
      corrupted.push_back(s.id);
    }
  }
  json manifest{{"ids", ids},
                {"class_names", d.class_names},
                {"size", d.image_size()},
                {"seed", d.seed ? json(*d.seed) : json(nullptr)},
                {"corrupted_ids", corrupted}};
  write_text_file(dir / "dataset.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "dataset.json";
  if (!fs::exists(manifest_path)) fail(ErrorCode::io, "no dataset.json in " + dir.string());
  json j;
  try {
    j = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "dataset.json: " + std::string(e.what()));
  }
  Dataset d;
  std::set<std::string> corrupted;
  try {
    d.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (!j.at("seed").is_null()) d.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("corrupted_ids"))
      for (const auto& id : j["corrupted_ids"]) corrupted.insert(id.get<std::string>());
    for (const auto& idj : j.at("ids")) {
      Sample s;
      s.id = idj.get<std::string>();
      const GrayRaster raster = read_png(dir / "images" / (s.id + ".png"));
      s.image = Image2D(raster.pixels.height, raster.pixels.width);
      for (std::size_t i = 0; i < raster.pixels.size(); ++i)
        s.image.values[i] = static_cast<float>(
            raster.bit_depth == 16 ? raster.pixels.values[i] / 65535.0 : raster.pixels.values[i] / 255.0);
      s.masks = read_masks(dir / "masks", s.id, d.class_names);
      if (corrupted.count(s.id)) {
        s.corrupted = true;
        s.clean_masks = read_masks(dir / "clean_masks", s.id, d.class_names);
      }
      d.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "dataset.json: " + std::string(e.what()));
  }
  d.validate();
  return d;
}

}  // namespace pal
