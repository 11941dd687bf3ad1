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

// Command-line front end over the C API.
//
// Exit codes: 0 ok, 1 I/O or format failure, 2 usage or invalid input,
// 3 state conflict (double corruption, occupied run dir), 4 divergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pal/pal.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kIo = 1, kUsage = 2, kConflict = 3, kDiverged = 4 };

int exit_code(pal_status s) {
  switch (s) {
    case PAL_OK: return kOk;
    case PAL_ERR_INVALID_ARGUMENT: return kUsage;
    case PAL_ERR_STATE_CONFLICT: return kConflict;
    case PAL_ERR_DIVERGED: return kDiverged;
    default: return kIo;
  }
}

// Thrown to unwind a subcommand with a specific exit code.
struct CliExit {
  int code;
};

void check(pal_status s, const std::string& context) {
  if (s == PAL_OK) return;
  std::cerr << "error: " << context << ": " << pal_last_error() << " (" << pal_status_name(s)
            << ")\n";
  throw CliExit{exit_code(s)};
}

[[noreturn]] void die(int code, const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  throw CliExit{code};
}

struct DatasetDeleter {
  void operator()(pal_dataset* d) const { pal_dataset_free(d); }
};
using DatasetPtr = std::unique_ptr<pal_dataset, DatasetDeleter>;

struct StringDeleter {
  void operator()(char* s) const { pal_string_free(s); }
};
using PalString = std::unique_ptr<char, StringDeleter>;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) die(kIo, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) die(kIo, "cannot write " + p.string());
}

bool occupied(const fs::path& dir) { return fs::exists(dir) && !fs::is_empty(dir); }

void print_log(const char* message, void*) {
  std::cout << message << std::endl;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  int count = 200;
  int size = 64;
  int classes = 1;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  if (occupied(a.out)) die(kConflict, a.out + " already exists and is not empty");
  pal_dataset* raw = nullptr;
  check(pal_dataset_synthetic(a.count, a.size, a.classes, a.seed, &raw), "synth");
  DatasetPtr d(raw);
  check(pal_dataset_save(d.get(), a.out.c_str()), "save");
  std::cout << (fs::path(a.out) / "dataset.json").string() << "\n";
  return kOk;
}

struct CorruptArgs {
  std::string in;
  std::string out;
  double fraction = 0.0;
  int radius_min = 1;
  int radius_max = 1;
  std::string op_policy = "random_either";
  std::uint64_t seed = 0;
};

int cmd_corrupt(CorruptArgs a) {
  const json spec{{"fraction", a.fraction},
                  {"radius_min", a.radius_min},
                  {"radius_max", a.radius_max},
                  {"op_policy", a.op_policy},
                  {"seed", a.seed}};
  // Flag validation first, so bad input never touches the disk.
  if (a.fraction < 0.0 || a.fraction > 1.0) die(kUsage, "--fraction must lie in [0, 1]");
  if (a.radius_min < 1 || a.radius_max < a.radius_min)
    die(kUsage, "need 1 <= --radius-min <= --radius-max");
  if (a.op_policy != "erode" && a.op_policy != "dilate" && a.op_policy != "random_either" &&
      a.op_policy != "either")
    die(kUsage, "--op-policy must be erode, dilate or random_either");
  if (fs::exists(fs::path(a.in) / "corruption_manifest.json"))
    die(kConflict, a.in + " already carries a corruption manifest");
  if (a.out.empty()) a.out = fs::path(a.in).string() + "_noisy";
  if (occupied(a.out)) die(kConflict, a.out + " already exists and is not empty");

  pal_dataset* raw = nullptr;
  check(pal_dataset_load(a.in.c_str(), &raw), "load " + a.in);
  DatasetPtr in(raw);
  char* manifest_raw = nullptr;
  check(pal_dataset_corrupt(in.get(), spec.dump().c_str(), &raw, &manifest_raw), "corrupt");
  DatasetPtr out(raw);
  PalString manifest(manifest_raw);
  check(pal_dataset_save(out.get(), a.out.c_str()), "save " + a.out);
  const std::string manifest_path = (fs::path(a.out) / "corruption_manifest.json").string();
  check(pal_manifest_write(manifest_path.c_str(), manifest.get()), "manifest");
  std::cout << manifest_path << " (" << pal_dataset_num_corrupted(out.get()) << " of "
            << pal_dataset_size(out.get()) << " samples corrupted)\n";
  return kOk;
}

struct TrainArgs {
  std::string config;
  std::string data, train_data, eval_data, out, profile, strategy, run_name;
  std::optional<double> lr, qam_lr_scale, lambda, train_fraction;
  std::optional<int> epochs, batch_size, patience;
  std::optional<std::uint64_t> seed;
  bool resume = false;
};

json train_json(const TrainArgs& a) {
  json j = json::object();
  if (!a.config.empty()) {
    j = json::parse(read_file(a.config), nullptr, false);
    if (j.is_discarded() || !j.is_object()) die(kUsage, a.config + " is not a JSON object");
  }
  auto set = [&](const char* key, const auto& v) { j[key] = v; };
  if (!a.data.empty()) set("data", a.data);
  if (!a.train_data.empty()) set("train_data", a.train_data);
  if (!a.eval_data.empty()) set("eval_data", a.eval_data);
  if (!a.out.empty()) set("output_dir", a.out);
  if (!a.profile.empty()) set("profile", a.profile);
  if (!a.strategy.empty()) set("strategy", a.strategy);
  if (!a.run_name.empty()) set("run_name", a.run_name);
  if (a.lr) set("learning_rate", *a.lr);
  if (a.qam_lr_scale) set("qam_lr_scale", *a.qam_lr_scale);
  if (a.lambda) set("lambda", *a.lambda);
  if (a.train_fraction) set("train_fraction", *a.train_fraction);
  if (a.epochs) set("epochs", *a.epochs);
  if (a.batch_size) set("batch_size", *a.batch_size);
  if (a.patience) set("patience", *a.patience);
  if (a.seed) set("seed", *a.seed);
  if (a.resume) set("resume", true);
  return j;
}

int run_training(const std::string& config_text) {
  char* summary_raw = nullptr;
  check(pal_train(config_text.c_str(), print_log, nullptr, &summary_raw), "train");
  PalString summary(summary_raw);
  std::cout << summary.get() << "\n";
  return kOk;
}

int cmd_train(const TrainArgs& a) {
  const std::string text = train_json(a).dump();
  check(pal_run_config_check(text.c_str(), nullptr), "run config");
  return run_training(text);
}

struct GridArgs {
  TrainArgs base;
  std::string out_root;
  std::vector<std::string> strategies{"baseline", "qam", "qam_ocm"};
  std::vector<double> fractions{0.25, 0.5, 0.75};
  int radius_min = 5;
  int radius_max = 13;
  std::string op_policy = "random_either";
  std::uint64_t noise_seed = 0;
  bool keep_going = false;
};

std::string fraction_tag(double f) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", static_cast<int>(f * 100.0 + 0.5));
  return buf;
}

int cmd_train_grid(const GridArgs& g) {
  TrainArgs base = g.base;
  base.out.clear();
  const json base_json = train_json(base);
  if (base_json.contains("noise")) die(kUsage, "the grid sets noise itself; drop it from --config");

  // Build and check every cell before training any of them.
  std::vector<std::pair<std::string, std::string>> cells;
  for (double f : g.fractions)
    for (const auto& s : g.strategies) {
      json j = base_json;
      const std::string name = s + (f > 0.0 ? "_f" + fraction_tag(f) + "_r" +
                                                  std::to_string(g.radius_min) + "-" +
                                                  std::to_string(g.radius_max)
                                            : std::string("_clean"));
      j["strategy"] = s;
      j["run_name"] = name;
      j["output_dir"] = (fs::path(g.out_root) / name).string();
      if (f > 0.0)
        j["noise"] = {{"fraction", f},
                      {"radius_min", g.radius_min},
                      {"radius_max", g.radius_max},
                      {"op_policy", g.op_policy},
                      {"seed", g.noise_seed}};
      const std::string text = j.dump();
      check(pal_run_config_check(text.c_str(), nullptr), "grid cell " + name);
      if (fs::exists(fs::path(g.out_root) / name / "metrics.csv") && !g.base.resume)
        die(kConflict, "grid cell " + name + " already has a run in " + g.out_root);
      cells.emplace_back(name, text);
    }

  int worst = kOk;
  for (const auto& [name, text] : cells) {
    std::cout << "== " << name << std::endl;
    try {
      run_training(text);
    } catch (const CliExit& e) {
      if (!g.keep_going) throw;
      worst = std::max(worst, e.code);
    }
  }
  std::cout << cells.size() << " runs under " << g.out_root << "\n";
  return worst;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  pal_dataset* raw = nullptr;
  check(pal_dataset_load(a.data.c_str(), &raw), "load " + a.data);
  DatasetPtr d(raw);
  char* report_raw = nullptr;
  check(pal_evaluate_checkpoint(a.checkpoint.c_str(), d.get(), &report_raw), "evaluate");
  PalString report(report_raw);
  std::string out = a.out;
  // checkpoints/<name> inside a run dir: keep the report next to the run's metrics.
  const fs::path run_dir = fs::path(a.checkpoint).lexically_normal().parent_path().parent_path();
  if (out.empty() && fs::exists(run_dir / "run_config.json"))
    out = (run_dir / "dice_report.json").string();
  if (!out.empty()) write_file(out, std::string(report.get()) + "\n");
  std::cout << report.get() << "\n";
  return kOk;
}

struct ReportArgs {
  std::vector<std::string> runs;
  std::string root;
  std::string out;
};

int cmd_report(const ReportArgs& a) {
  std::vector<std::string> runs = a.runs;
  if (!a.root.empty()) {
    if (!fs::is_directory(a.root)) die(kIo, a.root + " is not a directory");
    std::vector<std::string> found;
    for (const auto& e : fs::directory_iterator(a.root))
      if (e.is_directory() && fs::exists(e.path() / "run_config.json")) found.push_back(e.path().string());
    std::sort(found.begin(), found.end());
    runs.insert(runs.end(), found.begin(), found.end());
  }
  std::vector<const char*> ptrs;
  for (const auto& r : runs) ptrs.push_back(r.c_str());
  char* summary_raw = nullptr;
  check(pal_report(ptrs.data(), ptrs.size(), a.out.c_str(), &summary_raw), "report");
  PalString summary(summary_raw);
  const json s = json::parse(summary.get());
  for (const auto& note : s["notes"]) std::cerr << "note: " << note.get<std::string>() << "\n";
  std::cout << read_file(fs::path(a.out) / "results_table.txt");
  std::cout << s["rows"].get<int>() << " rows, " << s["plots"].size() << " plots in " << a.out
            << "\n";
  return kOk;
}

void add_train_flags(CLI::App* c, TrainArgs& a, bool with_out) {
  c->add_option("--config", a.config, "Run config JSON")->check(CLI::ExistingFile);
  c->add_option("--data", a.data, "Dataset dir, split by --train-fraction");
  c->add_option("--train-fraction", a.train_fraction, "Train share when splitting --data");
  c->add_option("--train-data", a.train_data, "Training dataset dir");
  c->add_option("--eval-data", a.eval_data, "Evaluation dataset dir (clean labels)");
  if (with_out) c->add_option("--out", a.out, "Run directory");
  c->add_option("--profile", a.profile, "Model profile JSON");
  c->add_option("--strategy", a.strategy, "baseline | qam | qam_ocm");
  c->add_option("--lr", a.lr, "Learning rate");
  c->add_option("--qam-lr-scale", a.qam_lr_scale, "Quality-network learning-rate multiple");
  c->add_option("--lambda", a.lambda, "Squash bound");
  c->add_option("--epochs", a.epochs, "Epoch count");
  c->add_option("--batch-size", a.batch_size, "Mini-batch size");
  c->add_option("--patience", a.patience, "Early-stop patience in epochs, 0 disables");
  c->add_option("--seed", a.seed, "Training seed");
  if (with_out) c->add_option("--run-name", a.run_name, "Name shown in reports");
  c->add_flag("--resume", a.resume, "Continue an existing run from its final checkpoint");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noisy-label segmentation training with quality-aware re-weighting"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  app.set_version_flag("--version", std::string(pal_version()));

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic shapes dataset");
  c_synth->add_option("--count", synth.count, "Number of samples")->capture_default_str();
  c_synth->add_option("--size", synth.size, "Image side length")->capture_default_str();
  c_synth->add_option("--classes", synth.classes, "Number of classes")->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  c_synth->add_option("--out", synth.out, "Output dataset dir")->required();

  CorruptArgs corrupt;
  auto* c_corrupt = app.add_subcommand("corrupt", "Erode or dilate a fraction of the labels");
  c_corrupt->add_option("--in", corrupt.in, "Input dataset dir")->required()->check(CLI::ExistingDirectory);
  c_corrupt->add_option("--out", corrupt.out, "Output dataset dir (default <in>_noisy)");
  c_corrupt->add_option("--fraction,--noise-fraction", corrupt.fraction, "Share of samples to corrupt")->required();
  c_corrupt->add_option("--radius-min", corrupt.radius_min, "Smallest disk radius")->required();
  c_corrupt->add_option("--radius-max", corrupt.radius_max, "Largest disk radius")->required();
  c_corrupt->add_option("--op-policy", corrupt.op_policy, "erode | dilate | random_either")
      ->capture_default_str();
  c_corrupt->add_option("--seed", corrupt.seed, "Corruption seed")->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train one run from a config and/or flags");
  add_train_flags(c_train, train, true);

  GridArgs grid;
  auto* c_grid = app.add_subcommand("train-grid", "Train every strategy x noise fraction cell");
  add_train_flags(c_grid, grid.base, false);
  c_grid->add_option("--out-root", grid.out_root, "Directory receiving one run dir per cell")->required();
  c_grid->add_option("--strategies", grid.strategies, "Comma-separated strategies")->delimiter(',');
  c_grid->add_option("--fractions", grid.fractions, "Comma-separated noise fractions")->delimiter(',');
  c_grid->add_option("--radius-min", grid.radius_min, "Smallest disk radius")->capture_default_str();
  c_grid->add_option("--radius-max", grid.radius_max, "Largest disk radius")->capture_default_str();
  c_grid->add_option("--op-policy", grid.op_policy, "erode | dilate | random_either")->capture_default_str();
  c_grid->add_option("--noise-seed", grid.noise_seed, "Corruption seed")->capture_default_str();
  c_grid->add_flag("--keep-going", grid.keep_going, "Continue after a failed cell");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Dice of a checkpoint on a dataset's clean labels");
  c_eval->add_option("--checkpoint", eval.checkpoint, "Checkpoint dir")->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--data", eval.data, "Dataset dir")->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--out", eval.out, "Report path (default <run>/dice_report.json)");

  ReportArgs report;
  auto* c_report = app.add_subcommand("report", "Results table and plots over run dirs");
  c_report->add_option("--runs", report.runs, "Run directories");
  c_report->add_option("--root", report.root, "Use every run dir directly under this dir");
  c_report->add_option("--out", report.out, "Report output dir")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "\n" << app.help();
    return kUsage;
  }

  try {
    if (*c_synth) return cmd_synth(synth);
    if (*c_corrupt) return cmd_corrupt(corrupt);
    if (*c_train) return cmd_train(train);
    if (*c_grid) return cmd_train_grid(grid);
    if (*c_eval) return cmd_eval(eval);
    if (*c_report) return cmd_report(report);
  } catch (const CliExit& e) {
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
