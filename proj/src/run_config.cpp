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

#include "run_config.hpp"

#include <cstdio>
#include <set>

#include "image_io.hpp"
#include "json.hpp"

namespace pal {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) fail(ErrorCode::invalid_argument, "unknown key '" + key + "' in " + where);
}

json noise_json(const NoiseSpec& n) {
  return {{"fraction", n.fraction},
          {"radius_min", n.radius_min},
          {"radius_max", n.radius_max},
          {"op_policy", to_string(n.op_policy)},
          {"seed", n.seed}};
}

std::string fraction_tag(double f) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", static_cast<int>(round_half_up(100.0 * f)));
  return buf;
}

}  // namespace

std::string default_run_name(Strategy strategy, const std::optional<NoiseSpec>& noise) {
  if (!noise || noise->fraction == 0.0) return to_string(strategy) + "_clean";
  return to_string(strategy) + "_f" + fraction_tag(noise->fraction) + "_r" +
         std::to_string(noise->radius_min) + "-" + std::to_string(noise->radius_max);
}

void RunConfig::validate() const {
  train.validate();
  if (noise) noise->validate();
  require(!output_dir.empty(), "output_dir is required");
  const bool pair = train_data || eval_data;
  require(pair != data.has_value(), "give either data or train_data + eval_data");
  if (pair) require(train_data && eval_data, "train_data and eval_data go together");
  if (data)
    require(split.train_fraction > 0.0 && split.train_fraction < 1.0,
            "train_fraction must lie in (0, 1)");
}

std::string RunConfig::to_json() const {
  json j{{"run_name", run_name},
         {"output_dir", output_dir.string()},
         {"strategy", to_string(train.strategy)},
         {"learning_rate", train.learning_rate},
         {"qam_lr_scale", train.qam_lr_scale},
         {"batch_size", train.batch_size},
         {"epochs", train.epochs},
         {"lambda", train.lambda},
         {"seed", train.seed},
         {"loss_kind", train.loss_kind},
         {"patience", train.patience},
         {"precision", to_string(train.precision)},
         {"resume", resume}};
  if (train_data) j["train_data"] = train_data->string();
  if (eval_data) j["eval_data"] = eval_data->string();
  if (data) {
    j["data"] = data->string();
    j["train_fraction"] = split.train_fraction;
    j["split_seed"] = split.seed;
  }
  if (profile) j["profile"] = profile->string();
  if (noise) j["noise"] = noise_json(*noise);
  return j.dump(2);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  RunConfig c;
  try {
    const json j = json::parse(text);
    require(j.is_object(), "run config must be a JSON object");
    reject_unknown(j,
                   {"run_name", "output_dir", "train_data", "eval_data", "data", "train_fraction",
                    "split_seed", "profile", "strategy", "learning_rate", "qam_lr_scale",
                    "batch_size", "epochs", "lambda", "seed", "loss_kind", "patience", "precision",
                    "noise", "resume"},
                   "run config");
    c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("train_data")) c.train_data = j["train_data"].get<std::string>();
    if (j.contains("eval_data")) c.eval_data = j["eval_data"].get<std::string>();
    if (j.contains("data")) c.data = j["data"].get<std::string>();
    c.split.train_fraction = j.value("train_fraction", c.split.train_fraction);
    c.split.seed = j.value("split_seed", c.split.seed);
    if (j.contains("profile")) c.profile = j["profile"].get<std::string>();
    if (j.contains("strategy")) c.train.strategy = parse_strategy(j["strategy"].get<std::string>());
    c.train.learning_rate = j.value("learning_rate", c.train.learning_rate);
    c.train.qam_lr_scale = j.value("qam_lr_scale", c.train.qam_lr_scale);
    c.train.batch_size = j.value("batch_size", c.train.batch_size);
    c.train.epochs = j.value("epochs", c.train.epochs);
    c.train.lambda = j.value("lambda", c.train.lambda);
    c.train.seed = j.value("seed", c.train.seed);
    c.train.loss_kind = j.value("loss_kind", c.train.loss_kind);
    c.train.patience = j.value("patience", c.train.patience);
    if (j.contains("precision")) {
      const auto p = j["precision"].get<std::string>();
      require(p == "f32" || p == "f64", "precision must be f32 or f64");
      c.train.precision = p == "f64" ? Precision::f64 : Precision::f32;
    }
    if (precision_from_env() == Precision::f64) c.train.precision = Precision::f64;
    if (j.contains("noise") && !j["noise"].is_null()) {
      c.noise = NoiseSpec::from_json_text(j["noise"].dump());
    }
    c.resume = j.value("resume", false);
    c.run_name = j.value("run_name", std::string());
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) { return from_json_text(read_text_file(path)); }

TrainArtifacts execute_run(const RunConfig& cfg, const LogFn& log) {
  cfg.validate();
  const ModelProfile profile = cfg.profile ? ModelProfile::load(*cfg.profile) : ModelProfile{};

  Dataset train_set, eval_set;
  std::optional<std::pair<NoiseSpec, std::vector<CorruptionRecord>>> manifest;
  if (cfg.data) {
    const Dataset all = load_dataset(*cfg.data);
    if (all.any_corrupted())
      fail(ErrorCode::state_conflict, "data " + cfg.data->string() +
                                          " is already corrupted; split it before corrupting");
    std::tie(train_set, eval_set) = split(all, cfg.split);
  } else {
    train_set = load_dataset(*cfg.train_data);
    eval_set = load_dataset(*cfg.eval_data);
    const fs::path m = *cfg.train_data / "corruption_manifest.json";
    if (fs::exists(m)) manifest = load_manifest(m);
  }
  if (cfg.noise) {
    if (train_set.any_corrupted() || manifest)
      fail(ErrorCode::state_conflict, "training data already carries corruption; drop the noise block");
    CorruptionResult r = corrupt(train_set, *cfg.noise);
    train_set = std::move(r.dataset);
    manifest.emplace(*cfg.noise, std::move(r.records));
  }

  const fs::path& dir = cfg.output_dir;
  std::optional<fs::path> resume_from;
  if (fs::exists(dir / "metrics.csv")) {
    if (!cfg.resume)
      fail(ErrorCode::state_conflict, "run directory " + dir.string() +
                                          " already holds a run; set resume or pick another output_dir");
    resume_from = dir / "checkpoints" / "final";
    if (!fs::exists(*resume_from / "checkpoint_meta.json"))
      fail(ErrorCode::state_conflict, "cannot resume: no final checkpoint in " + dir.string());
  }

  json echo = json::parse(cfg.to_json());
  echo["noise"] = manifest ? noise_json(manifest->first) : json(nullptr);
  if (cfg.run_name.empty())
    echo["run_name"] = default_run_name(
        cfg.train.strategy, manifest ? std::optional<NoiseSpec>(manifest->first) : std::nullopt);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
  if (manifest) save_manifest(dir / "corruption_manifest.json", manifest->first, manifest->second);

  TrainOptions opt;
  opt.run_dir = dir;
  opt.resume_from = resume_from;
  opt.log = log;
  opt.config_echo_extra = echo.dump();
  return train_any(cfg.train, profile, train_set, eval_set, opt);
}

}  // namespace pal
