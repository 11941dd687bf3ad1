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

#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "common.hpp"
#include "evaluation.hpp"
#include "image_io.hpp"
#include "json.hpp"

namespace pal {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Ticks at 1, 2 or 5 times a power of ten.
std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(v);
  return t;
}

}  // namespace

std::string LinePlot::to_svg(int width, int height) const {
  const double left = 70, right = 20, top = 36, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(title) << "</text>\n";
  for (double t : nice_ticks(x0, x1)) {
    o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(top) << "\" x2=\"" << num(px(t))
      << "\" y2=\"" << num(top + ph) << "\" stroke=\"#e6e6e6\"/>\n";
    o << "<text x=\"" << num(px(t)) << "\" y=\"" << num(top + ph + 15)
      << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
  }
  for (double t : nice_ticks(y0, y1)) {
    o << "<line x1=\"" << num(left) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(left + pw)
      << "\" y2=\"" << num(py(t)) << "\" stroke=\"#e6e6e6\"/>\n";
    o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(t) + 4)
      << "\" text-anchor=\"end\">" << tick_label(t) << "</text>\n";
  }
  o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
    << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << height - 10
    << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  o << "<text transform=\"translate(16," << num(top + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
        o << num(px(s.x[i])) << "," << num(py(s.y[i])) << " ";
    o << "\"/>\n";
    const double ly = top + 14 + 14.0 * static_cast<double>(k);
    o << "<line x1=\"" << num(left + pw - 120) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
      << num(left + pw - 100) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << num(left + pw - 95) << "\" y=\"" << num(ly) << "\">" << escape(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

namespace {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  }
  std::vector<double> numbers(int col) const {
    std::vector<double> v;
    for (const auto& r : rows)
      v.push_back(col >= 0 && col < static_cast<int>(r.size()) && !r[col].empty()
                      ? std::strtod(r[col].c_str(), nullptr)
                      : std::numeric_limits<double>::quiet_NaN());
    return v;
  }
};

Csv read_csv(const fs::path& p) {
  Csv csv;
  std::istringstream in(read_text_file(p));
  std::string line;
  auto cells = [](const std::string& l) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(l);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (std::getline(in, line)) csv.header = cells(line);
  while (std::getline(in, line))
    if (!line.empty()) csv.rows.push_back(cells(line));
  return csv;
}

void emit(const LinePlot& plot, const fs::path& path, ReportSummary& summary) {
  write_text_file(path, plot.to_svg());
  summary.plots.push_back(path);
}

void run_plots(const fs::path& run, const std::string& name, const fs::path& plot_dir,
               ReportSummary& summary) {
  // Loss against optimisation step.
  if (fs::exists(run / "steps.jsonl")) {
    Series s{"weighted batch loss", {}, {}};
    std::istringstream in(read_text_file(run / "steps.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;
      s.x.push_back(j.value("step", 0.0));
      s.y.push_back(j.value("scalar_loss", std::numeric_limits<double>::quiet_NaN()));
    }
    emit(LinePlot{name + ": training loss", "step", "loss", {s}}, plot_dir / (name + "_loss.svg"),
         summary);
  } else {
    summary.notes.push_back(name + ": no steps.jsonl, loss plot skipped");
  }

  const Csv metrics = read_csv(run / "metrics.csv");
  LinePlot dice{name + ": evaluation Dice", "epoch", "Dice", {}};
  const auto epochs = metrics.numbers(metrics.column("epoch"));
  for (std::size_t c = 0; c < metrics.header.size(); ++c)
    if (metrics.header[c].rfind("dice_", 0) == 0)
      dice.series.push_back({metrics.header[c].substr(5), epochs, metrics.numbers(static_cast<int>(c))});
  emit(dice, plot_dir / (name + "_dice.svg"), summary);

  const json cfg = json::parse(read_text_file(run / "run_config.json"));
  const std::string strategy = cfg.at("train").at("strategy").get<std::string>();
  if (strategy == "baseline") return;
  if (!fs::exists(run / "corruption_manifest.json") || !fs::exists(run / "weight_stats.csv")) {
    summary.notes.push_back(name + ": no corruption manifest, weight-dynamics plot skipped");
    return;
  }
  const Csv ws = read_csv(run / "weight_stats.csv");
  if (ws.rows.empty()) {
    summary.notes.push_back(name + ": weight_stats.csv is empty, weight-dynamics plot skipped");
    return;
  }
  const auto steps = ws.numbers(ws.column("step"));
  LinePlot weights{name + ": relative weights by group", "step", "B * w", {}};
  weights.series.push_back({"mean clean", steps, ws.numbers(ws.column("mean_clean"))});
  weights.series.push_back({"mean noisy", steps, ws.numbers(ws.column("mean_noisy"))});
  weights.series.push_back({"var clean", steps, ws.numbers(ws.column("var_clean"))});
  weights.series.push_back({"var noisy", steps, ws.numbers(ws.column("var_noisy"))});
  emit(weights, plot_dir / (name + "_weights.svg"), summary);
}

}  // namespace

ReportSummary write_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
  ReportSummary summary;
  const ResultsTable table = results_table(run_dirs, &summary.notes);
  if (table.rows.empty() && !run_dirs.empty()) fail(ErrorCode::io, "no valid runs to report");
  summary.rows = table.rows.size();
  const fs::path plot_dir = out_dir / "plots";
  std::error_code ec;
  fs::create_directories(plot_dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create " + plot_dir.string() + ": " + ec.message());
  write_text_file(out_dir / "results_table.csv", table.render_csv());
  write_text_file(out_dir / "results_table.txt", table.render_text());
  for (const auto& run : run_dirs) {
    if (!fs::exists(run / "metrics.csv") || !fs::exists(run / "run_config.json")) continue;
    run_plots(run, run.filename().string(), plot_dir, summary);
  }
  return summary;
}

}  // namespace pal
