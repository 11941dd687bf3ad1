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

#include "evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "image_io.hpp"
#include "json.hpp"
#include "training.hpp"

namespace pal {
namespace fs = std::filesystem;
using nlohmann::json;

std::string DiceReport::to_json() const {
  json per = json::object();
  for (std::size_t c = 0; c < class_names.size(); ++c) per[class_names[c]] = per_class[c];
  return json{{"per_class", per}, {"average", average}}.dump(2);
}

Mask binarize(const Grid<double>& prob, double threshold) {
  require(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0, 1)");
  Mask m(prob.height, prob.width);
  for (std::size_t i = 0; i < prob.values.size(); ++i) m.values[i] = prob.values[i] >= threshold;
  return m;
}

double dice(const Mask& pred, const Mask& gt) {
  require(pred.same_shape(gt), "dice: masks differ in shape");
  std::size_t inter = 0, a = 0, b = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const bool p = pred.values[i] != 0, g = gt.values[i] != 0;
    a += p;
    b += g;
    inter += p && g;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

template <class T>
DiceReport evaluate_model(const SegNet<T>& net, const Dataset& d,
                          const std::vector<std::string>& class_names) {
  require(!d.empty(), "cannot evaluate an empty dataset");
  require(d.class_names == class_names, "dataset classes differ from the model's");
  const std::size_t n = class_names.size();
  DiceReport r;
  r.class_names = class_names;
  r.per_class.assign(n, 0.0);
  for (const Sample& s : d.samples) {
    const nn::Volume<T> logits = net.forward(image_volume<T>(s.image));
    const MaskSet& ref = s.reference_masks();
    const std::size_t plane = static_cast<std::size_t>(logits.height) * logits.width;
    for (std::size_t c = 0; c < n; ++c) {
      Grid<double> prob(logits.height, logits.width);
      for (std::size_t k = 0; k < plane; ++k) {
        const double z = static_cast<double>(logits.data[c * plane + k]);
        prob.values[k] = 1.0 / (1.0 + std::exp(-z));
      }
      r.per_class[c] += dice(binarize(prob), ref.channels[c]);
    }
  }
  for (auto& v : r.per_class) v /= static_cast<double>(d.size());
  for (double v : r.per_class) r.average += v;
  r.average /= static_cast<double>(n);
  return r;
}

DiceReport evaluate_checkpoint(const fs::path& checkpoint_dir, const Dataset& d) {
  const CheckpointMeta meta = read_checkpoint_meta(checkpoint_dir);
  const ModelProfile profile = ModelProfile::from_json_text(meta.profile_json);
  if (meta.precision == "f64") {
    const auto st = load_checkpoint<double>(checkpoint_dir, profile);
    return evaluate_model(st.segnet, d, st.class_names);
  }
  const auto st = load_checkpoint<float>(checkpoint_dir, profile);
  return evaluate_model(st.segnet, d, st.class_names);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::optional<ResultRow> read_run(const fs::path& dir, std::string& why) {
  const fs::path cfg_path = dir / "run_config.json", metrics_path = dir / "metrics.csv";
  if (!fs::exists(cfg_path)) {
    why = "missing run_config.json";
    return std::nullopt;
  }
  if (!fs::exists(metrics_path)) {
    why = "missing metrics.csv";
    return std::nullopt;
  }
  ResultRow row;
  row.run_name = dir.filename().string();
  try {
    const json cfg = json::parse(read_text_file(cfg_path));
    row.strategy = cfg.at("train").at("strategy").get<std::string>();
    if (cfg.contains("run_name")) row.run_name = cfg["run_name"].get<std::string>();
    if (cfg.contains("noise") && !cfg["noise"].is_null()) {
      const json& n = cfg["noise"];
      row.noise_fraction = n.at("fraction").get<double>();
      row.radius_min = n.at("radius_min").get<int>();
      row.radius_max = n.at("radius_max").get<int>();
      row.op_policy = n.at("op_policy").get<std::string>();
    } else {
      row.op_policy = "none";
    }
  } catch (const json::exception& e) {
    why = std::string("bad run_config.json: ") + e.what();
    return std::nullopt;
  }

  std::stringstream lines(read_text_file(metrics_path));
  std::string header;
  std::getline(lines, header);
  const auto cols = split_csv(header);
  std::vector<std::size_t> dice_cols;
  std::size_t avg_col = cols.size();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] == "dice_avg") avg_col = i;
    else if (cols[i].rfind("dice_", 0) == 0) {
      dice_cols.push_back(i);
      row.class_names.push_back(cols[i].substr(5));
    }
  }
  if (avg_col == cols.size() || cols.empty() || cols[0] != "epoch") {
    why = "metrics.csv has an unexpected header";
    return std::nullopt;
  }
  bool any = false;
  double best = -1.0;
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != cols.size()) continue;
    const double avg = std::strtod(cells[avg_col].c_str(), nullptr);
    if (!std::isfinite(avg) || avg <= best) continue;
    best = avg;
    any = true;
    row.average = avg;
    row.best_epoch = std::atoi(cells[0].c_str());
    row.per_class.clear();
    for (std::size_t c : dice_cols) row.per_class.push_back(std::strtod(cells[c].c_str(), nullptr));
  }
  if (!any) {
    why = "metrics.csv has no evaluation rows";
    return std::nullopt;
  }
  return row;
}

int strategy_rank(const std::string& s) {
  if (s == "baseline") return 0;
  if (s == "qam") return 1;
  return 2;
}

}  // namespace

ResultsTable results_table(const std::vector<fs::path>& run_dirs, std::vector<std::string>* warnings) {
  ResultsTable t;
  for (const auto& dir : run_dirs) {
    std::string why;
    if (auto row = read_run(dir, why)) t.rows.push_back(std::move(*row));
    else if (warnings) warnings->push_back(dir.string() + ": " + why);
  }
  std::stable_sort(t.rows.begin(), t.rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::make_tuple(a.noise_fraction, a.radius_min, a.radius_max, strategy_rank(a.strategy)) <
           std::make_tuple(b.noise_fraction, b.radius_min, b.radius_max, strategy_rank(b.strategy));
  });
  return t;
}

std::string ResultsTable::render_csv() const {
  std::vector<std::string> classes;
  for (const auto& r : rows)
    for (const auto& c : r.class_names)
      if (std::find(classes.begin(), classes.end(), c) == classes.end()) classes.push_back(c);
  std::string out = "run,noise_fraction,radius_min,radius_max,op_policy,strategy";
  for (const auto& c : classes) out += ",dice_" + c;
  out += ",dice_avg,best_epoch\n";
  for (const auto& r : rows) {
    out += r.run_name + "," + fixed(r.noise_fraction, 4) + "," + std::to_string(r.radius_min) + "," +
           std::to_string(r.radius_max) + "," + r.op_policy + "," + r.strategy;
    for (const auto& c : classes) {
      const auto it = std::find(r.class_names.begin(), r.class_names.end(), c);
      out += ",";
      if (it != r.class_names.end())
        out += fixed(r.per_class[static_cast<std::size_t>(it - r.class_names.begin())], 6);
    }
    out += "," + fixed(r.average, 6) + "," + std::to_string(r.best_epoch) + "\n";
  }
  return out;
}

std::string ResultsTable::render_text() const {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> classes;
  for (const auto& r : rows)
    for (const auto& c : r.class_names)
      if (std::find(classes.begin(), classes.end(), c) == classes.end()) classes.push_back(c);
  std::vector<std::string> head{"run", "noise", "radii", "policy", "strategy"};
  for (const auto& c : classes) head.push_back(c);
  head.push_back("avg");
  head.push_back("best_epoch");
  cells.push_back(head);
  for (const auto& r : rows) {
    std::vector<std::string> line{r.run_name, fixed(100.0 * r.noise_fraction, 0) + "%",
                                  r.noise_fraction > 0 ? std::to_string(r.radius_min) + "-" +
                                                             std::to_string(r.radius_max)
                                                       : "-",
                                  r.op_policy, r.strategy};
    for (const auto& c : classes) {
      const auto it = std::find(r.class_names.begin(), r.class_names.end(), c);
      line.push_back(it == r.class_names.end()
                         ? "-"
                         : fixed(r.per_class[static_cast<std::size_t>(it - r.class_names.begin())], 4));
    }
    line.push_back(fixed(r.average, 4));
    line.push_back(std::to_string(r.best_epoch));
    cells.push_back(line);
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      out += cells[r][i];
      if (i + 1 < cells[r].size()) out += std::string(width[i] - cells[r][i].size() + 2, ' ');
    }
    out += "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out += std::string(total - 2, '-') + "\n";
    }
  }
  return out;
}

template DiceReport evaluate_model<float>(const SegNet<float>&, const Dataset&,
                                          const std::vector<std::string>&);
template DiceReport evaluate_model<double>(const SegNet<double>&, const Dataset&,
                                           const std::vector<std::string>&);

}  // namespace pal
