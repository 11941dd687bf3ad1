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

#include "training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "evaluation.hpp"
#include "image_io.hpp"
#include "json.hpp"

namespace pal {
namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Precision p) { return p == Precision::f64 ? "f64" : "f32"; }

Precision precision_from_env() {
  const char* v = std::getenv("PAL_TEST_MODE");
  return (v && std::string(v) == "1") ? Precision::f64 : Precision::f32;
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(qam_lr_scale > 0.0, "qam_lr_scale must be > 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(epochs >= 1, "epochs must be >= 1");
  require(lambda > 0.0, "lambda must be > 0");
  require(loss_kind == "bce", "loss_kind must be 'bce'");
  require(patience >= 0, "patience must be >= 0");
}

std::string train_config_to_json(const TrainConfig& cfg) {
  json j{{"strategy", to_string(cfg.strategy)},
         {"learning_rate", cfg.learning_rate},
         {"qam_lr_scale", cfg.qam_lr_scale},
         {"batch_size", cfg.batch_size},
         {"epochs", cfg.epochs},
         {"lambda", cfg.lambda},
         {"seed", cfg.seed},
         {"loss_kind", cfg.loss_kind},
         {"patience", cfg.patience},
         {"precision", to_string(cfg.precision)}};
  return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig cfg;
  try {
    const json j = json::parse(text);
    cfg.strategy = parse_strategy(j.at("strategy").get<std::string>());
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.qam_lr_scale = j.value("qam_lr_scale", TrainConfig{}.qam_lr_scale);
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.lambda = j.at("lambda").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.loss_kind = j.at("loss_kind").get<std::string>();
    cfg.patience = j.at("patience").get<int>();
    cfg.precision = j.at("precision").get<std::string>() == "f64" ? Precision::f64 : Precision::f32;
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("train config: ") + e.what());
  }
  return cfg;
}

template <class T>
void adam_step(nn::Buffer<T>& params, const nn::Buffer<T>& grad, AdamState<T>& state, double lr,
               const AdamConfig& cfg) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), T(0));
    state.v.assign(params.size(), T(0));
  }
  ++state.steps;
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.steps)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.steps)));
  const T step = static_cast<T>(lr), eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * grad[i];
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * grad[i] * grad[i];
    const T mhat = state.m[i] / c1;
    const T vhat = state.v[i] / c2;
    params[i] -= step * mhat / (std::sqrt(vhat) + eps);
  }
}

template <class T>
TrainState<T> init_train_state(const TrainConfig& cfg, const ModelProfile& profile,
                               const std::vector<std::string>& class_names) {
  cfg.validate();
  profile.validate();
  require(!class_names.empty(), "need at least one class");
  TrainState<T> st;
  st.config = cfg;
  st.profile = profile;
  st.class_names = class_names;
  const int n = static_cast<int>(class_names.size());
  st.segnet = build_segnet<T>(segnet_config(profile, n), cfg.seed);
  st.segnet_opt.m.assign(st.segnet.params().size(), T(0));
  st.segnet_opt.v = st.segnet_opt.m;
  if (uses_quality_network(cfg.strategy)) {
    st.qam = build_qam<T>(qam_config(profile, n), cfg.seed);
    st.qam_opt = AdamState<T>{};
    st.qam_opt->m.assign(st.qam->params().size(), T(0));
    st.qam_opt->v = st.qam_opt->m;
  }
  return st;
}

template <class T>
std::vector<T> per_sample_loss(std::span<const nn::Volume<T>> logits,
                               std::span<const nn::Volume<T>> masks,
                               std::vector<nn::Volume<T>>* dlogits) {
  require(logits.size() == masks.size(), "logits and masks differ in batch size");
  std::vector<T> losses(logits.size());
  if (dlogits) dlogits->assign(logits.size(), {});
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto& z = logits[i];
    const auto& y = masks[i];
    require(z.channels == y.channels && z.height == y.height && z.width == y.width,
            "logits and masks are not aligned");
    const T inv_count = T(1) / static_cast<T>(z.data.size());
    // Accumulate in double so the mean does not depend on the precision of a
    // long running sum.
    double total = 0.0;
    if (dlogits) (*dlogits)[i] = nn::Volume<T>(z.channels, z.height, z.width);
    for (std::size_t k = 0; k < z.data.size(); ++k) {
      const T v = z.data[k], t = y.data[k];
      const T l = std::max(v, T(0)) - v * t + std::log1p(std::exp(-std::abs(v)));
      total += static_cast<double>(l);
      if (dlogits) {
        const T p = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
        (*dlogits)[i].data[k] = (p - t) * inv_count;
      }
    }
    losses[i] = static_cast<T>(total / static_cast<double>(z.data.size()));
  }
  return losses;
}

namespace {

template <class C>
bool all_finite(const C& v) {
  return std::all_of(v.begin(), v.end(), [](auto x) { return std::isfinite(x); });
}

// Rough bytes of activations cached for one sample by both networks.
std::size_t cache_bytes_per_sample(const ModelProfile& profile, int h, int w, int n_classes,
                                   std::size_t scalar) {
  const std::size_t px = static_cast<std::size_t>(h) * w;
  const std::size_t seg = px * (static_cast<std::size_t>(profile.seg_base_width) * 14 + n_classes);
  const std::size_t qam = px * (static_cast<std::size_t>(profile.qam_block_widths.front()) * 4 + 2);
  return (seg + qam) * scalar;
}

constexpr std::size_t kCacheBudget = std::size_t{1} << 30;

}  // namespace

template <class T>
StepRecord train_step(TrainState<T>& state, const Batch& batch) {
  const std::size_t b = batch.size();
  require(b >= 1, "empty batch");
  const bool use_qam = uses_quality_network(state.config.strategy);
  require(!use_qam || state.qam.has_value(), "strategy needs a quality network");
  const int h = batch.samples.front()->image.height, w = batch.samples.front()->image.width;
  const bool keep_caches =
      b * cache_bytes_per_sample(state.profile, h, w, static_cast<int>(state.class_names.size()),
                                 sizeof(T)) <= kCacheBudget;

  std::vector<nn::Volume<T>> images(b), masks(b), logits(b);
  std::vector<typename SegNet<T>::Cache> seg_caches(keep_caches ? b : 0);
  std::vector<typename Qam<T>::Cache> qam_caches(keep_caches && use_qam ? b : 0);
  std::vector<T> scores(b, T(0));
  for (std::size_t i = 0; i < b; ++i) {
    const Sample& s = *batch.samples[i];
    require(s.masks.class_names == state.class_names, "sample " + s.id + " has a different class layout");
    images[i] = image_volume<T>(s.image);
    masks[i] = mask_volume<T>(s.masks);
    logits[i] = state.segnet.forward(images[i], keep_caches ? &seg_caches[i] : nullptr);
    if (use_qam)
      scores[i] = state.qam->forward(nn::concat_channels(images[i], masks[i]),
                                     keep_caches ? &qam_caches[i] : nullptr);
  }

  std::vector<nn::Volume<T>> dlogits;
  const std::vector<T> losses = per_sample_loss<T>(logits, masks, &dlogits);
  const OcmConfig ocm{state.config.lambda};
  const std::vector<T> weights = compute_weights<T>(scores, state.config.strategy, ocm);
  const T scalar = combine_loss<T>(weights, losses);
  if (!std::isfinite(scalar) || !all_finite(losses) || !all_finite(scores))
    fail(ErrorCode::diverged, "non-finite loss at step " + std::to_string(state.global_step + 1));

  nn::Buffer<T> seg_grad(state.segnet.params().size(), T(0));
  nn::Buffer<T> qam_grad(use_qam ? state.qam->params().size() : 0, T(0));
  const std::vector<T> dscores = score_gradient<T>(scores, weights, losses, state.config.strategy, ocm);
  for (std::size_t i = 0; i < b; ++i) {
    for (auto& g : dlogits[i].data) g *= weights[i];
    if (keep_caches) {
      state.segnet.backward(seg_caches[i], dlogits[i], seg_grad);
      if (use_qam) state.qam->backward(qam_caches[i], dscores[i], qam_grad);
    } else {
      typename SegNet<T>::Cache sc;
      state.segnet.forward(images[i], &sc);
      state.segnet.backward(sc, dlogits[i], seg_grad);
      if (use_qam) {
        typename Qam<T>::Cache qc;
        state.qam->forward(nn::concat_channels(images[i], masks[i]), &qc);
        state.qam->backward(qc, dscores[i], qam_grad);
      }
    }
  }
  if (!all_finite(seg_grad) || !all_finite(qam_grad))
    fail(ErrorCode::diverged, "non-finite gradient at step " + std::to_string(state.global_step + 1));

  adam_step(state.segnet.params().values, seg_grad, state.segnet_opt, state.config.learning_rate);
  if (use_qam) adam_step(state.qam->params().values, qam_grad, *state.qam_opt,
                          state.config.learning_rate * state.config.qam_lr_scale);
  ++state.global_step;

  StepRecord rec;
  rec.step = state.global_step;
  rec.epoch = state.epoch + 1;
  rec.scalar_loss = static_cast<double>(scalar);
  rec.partial = batch.partial;
  for (std::size_t i = 0; i < b; ++i)
    rec.per_sample.push_back({batch.samples[i]->id, static_cast<double>(scores[i]),
                              static_cast<double>(weights[i]), static_cast<double>(losses[i]),
                              batch.samples[i]->corrupted});
  return rec;
}

std::vector<WeightStats> track_group_weights(const std::vector<StepRecord>& records,
                                             const std::vector<std::string>& noisy_ids) {
  const std::set<std::string> noisy(noisy_ids.begin(), noisy_ids.end());
  std::vector<WeightStats> out;
  std::size_t i = 0;
  while (i < records.size()) {
    const int epoch = records[i].epoch;
    std::vector<double> clean_w, noisy_w;
    std::int64_t last_step = records[i].step;
    for (; i < records.size() && records[i].epoch == epoch; ++i) {
      last_step = records[i].step;
      if (records[i].partial) continue;
      const double b = static_cast<double>(records[i].per_sample.size());
      for (const auto& s : records[i].per_sample)
        (noisy.count(s.sample_id) ? noisy_w : clean_w).push_back(b * s.weight);
    }
    auto moments = [](const std::vector<double>& v) -> std::pair<double, double> {
      if (v.empty()) return {0.0, 0.0};
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      return {mean, var / static_cast<double>(v.size())};
    };
    WeightStats ws;
    ws.step = last_step;
    ws.epoch = epoch;
    ws.n_clean = clean_w.size();
    ws.n_noisy = noisy_w.size();
    std::tie(ws.mean_clean, ws.var_clean) = moments(clean_w);
    std::tie(ws.mean_noisy, ws.var_noisy) = moments(noisy_w);
    if (!clean_w.empty() && !noisy_w.empty() && ws.mean_noisy > 0.0)
      ws.ratio = ws.mean_clean / ws.mean_noisy;
    out.push_back(ws);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'P', 'A', 'L', 'C', 'K', 'P', 'T', '1'};

template <class T>
void write_array(std::ostream& out, const nn::Buffer<T>& v) {
  const std::uint64_t n = v.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
}

template <class T>
nn::Buffer<T> read_array(std::istream& in, std::size_t expected, const std::string& what) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n != expected)
    fail(ErrorCode::format, "checkpoint array '" + what + "' has the wrong length");
  nn::Buffer<T> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) fail(ErrorCode::format, "checkpoint truncated in '" + what + "'");
  return v;
}

template <class T>
constexpr const char* precision_name() {
  return sizeof(T) == 8 ? "f64" : "f32";
}

json meta_json(const TrainConfig& cfg, const ModelProfile& profile,
               const std::vector<std::string>& class_names, const char* precision, int epoch,
               std::int64_t step, double best_dice, int best_epoch, int since_best, bool has_qam,
               std::int64_t seg_steps, std::int64_t qam_steps) {
  return json{{"format", "pal-checkpoint-1"},
              {"config", json::parse(train_config_to_json(cfg))},
              {"profile", json::parse(profile.canonical_json())},
              {"profile_hash", profile.hash()},
              {"class_names", class_names},
              {"precision", precision},
              {"epoch", epoch},
              {"global_step", step},
              {"best_dice", best_dice},
              {"best_epoch", best_epoch},
              {"epochs_since_best", since_best},
              {"has_qam", has_qam},
              {"segnet_adam_steps", seg_steps},
              {"qam_adam_steps", qam_steps}};
}

json read_meta_json(const fs::path& dir) {
  const fs::path p = dir / "checkpoint_meta.json";
  if (!fs::exists(p)) fail(ErrorCode::io, "no checkpoint_meta.json in " + dir.string());
  try {
    return json::parse(read_text_file(p));
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "checkpoint_meta.json: " + std::string(e.what()));
  }
}

}  // namespace

template <class T>
void save_checkpoint(const TrainState<T>& state, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
  const bool has_qam = state.qam.has_value();
  {
    const fs::path tmp = dir / "params.bin.tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    write_array(out, state.segnet.params().values);
    write_array(out, state.segnet_opt.m);
    write_array(out, state.segnet_opt.v);
    if (has_qam) {
      write_array(out, state.qam->params().values);
      write_array(out, state.qam_opt->m);
      write_array(out, state.qam_opt->v);
    }
    if (!out.flush()) fail(ErrorCode::io, "write failed: " + tmp.string());
    out.close();
    fs::rename(tmp, dir / "params.bin", ec);
    if (ec) fail(ErrorCode::io, "rename failed in " + dir.string() + ": " + ec.message());
  }
  const json meta = meta_json(state.config, state.profile, state.class_names, precision_name<T>(),
                              state.epoch, state.global_step, state.best_dice, state.best_epoch,
                              state.epochs_since_best, has_qam, state.segnet_opt.steps,
                              has_qam ? state.qam_opt->steps : 0);
  write_text_file(dir / "checkpoint_meta.json", meta.dump(2) + "\n");
}

CheckpointMeta read_checkpoint_meta(const fs::path& dir) {
  const json j = read_meta_json(dir);
  CheckpointMeta m;
  try {
    m.config = train_config_from_json(j.at("config").dump());
    m.profile_hash = j.at("profile_hash").get<std::string>();
    m.profile_json = j.at("profile").dump();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.precision = j.at("precision").get<std::string>();
    m.epoch = j.at("epoch").get<int>();
    m.global_step = j.at("global_step").get<std::int64_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "checkpoint_meta.json: " + std::string(e.what()));
  }
  return m;
}

template <class T>
TrainState<T> load_checkpoint(const fs::path& dir, const ModelProfile& expected_profile) {
  const json j = read_meta_json(dir);
  TrainState<T> st;
  try {
    const std::string stored_hash = j.at("profile_hash").get<std::string>();
    if (stored_hash != expected_profile.hash())
      fail(ErrorCode::state_conflict, "checkpoint profile hash " + stored_hash +
                                          " does not match model profile " + expected_profile.hash());
    const ModelProfile stored = ModelProfile::from_json_text(j.at("profile").dump());
    if (stored.hash() != stored_hash)
      fail(ErrorCode::state_conflict, "checkpoint profile does not match its recorded hash");
    if (j.at("precision").get<std::string>() != precision_name<T>())
      fail(ErrorCode::state_conflict, "checkpoint precision is " +
                                          j.at("precision").get<std::string>() + ", expected " +
                                          precision_name<T>());
    const TrainConfig cfg = train_config_from_json(j.at("config").dump());
    st = init_train_state<T>(cfg, stored, j.at("class_names").get<std::vector<std::string>>());
    st.epoch = j.at("epoch").get<int>();
    st.global_step = j.at("global_step").get<std::int64_t>();
    st.best_dice = j.at("best_dice").get<double>();
    st.best_epoch = j.at("best_epoch").get<int>();
    st.epochs_since_best = j.at("epochs_since_best").get<int>();
    if (j.at("has_qam").get<bool>() != st.qam.has_value())
      fail(ErrorCode::format, "checkpoint quality-network flag disagrees with its strategy");

    std::ifstream in(dir / "params.bin", std::ios::binary);
    if (!in) fail(ErrorCode::io, "no params.bin in " + dir.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 8, kMagic))
      fail(ErrorCode::format, "params.bin is not a checkpoint blob");
    const std::size_t ns = st.segnet.params().size();
    st.segnet.params().values = read_array<T>(in, ns, "segnet");
    st.segnet_opt.m = read_array<T>(in, ns, "segnet.m");
    st.segnet_opt.v = read_array<T>(in, ns, "segnet.v");
    st.segnet_opt.steps = j.at("segnet_adam_steps").get<std::int64_t>();
    if (st.qam) {
      const std::size_t nq = st.qam->params().size();
      st.qam->params().values = read_array<T>(in, nq, "qam");
      st.qam_opt->m = read_array<T>(in, nq, "qam.m");
      st.qam_opt->v = read_array<T>(in, nq, "qam.v");
      st.qam_opt->steps = j.at("qam_adam_steps").get<std::int64_t>();
    }
    if (in.peek() != std::char_traits<char>::eof())
      fail(ErrorCode::format, "trailing bytes in params.bin");
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "checkpoint_meta.json: " + std::string(e.what()));
  }
  return st;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void append_line(const fs::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  if (!out) fail(ErrorCode::io, "cannot append to " + path.string());
  out << line << '\n';
  if (!out.flush()) fail(ErrorCode::io, "write failed: " + path.string());
}

json step_json(const StepRecord& r, bool has_scores) {
  json per = json::array();
  for (const auto& s : r.per_sample)
    per.push_back({{"sample_id", s.sample_id},
                   {"raw_score", has_scores ? json(s.raw_score) : json(nullptr)},
                   {"weight", s.weight},
                   {"loss", s.loss},
                   {"corrupted", s.corrupted}});
  return {{"step", r.step},
          {"epoch", r.epoch},
          {"scalar_loss", r.scalar_loss},
          {"partial", r.partial},
          {"per_sample", per}};
}

}  // namespace

template <class T>
TrainArtifacts train(const TrainConfig& cfg, const ModelProfile& profile, const Dataset& train_set,
                     const Dataset& eval_set, const TrainOptions& options) {
  cfg.validate();
  profile.validate();
  require(!train_set.empty(), "training set is empty");
  require(!eval_set.empty(), "evaluation set is empty");
  require(train_set.class_names == eval_set.class_names, "train and eval class names differ");
  require(train_set.image_size() == eval_set.image_size(), "train and eval image sizes differ");
  require(static_cast<std::size_t>(cfg.batch_size) <= train_set.size(),
          "batch_size exceeds the training set size");
  train_set.validate();
  eval_set.validate();
  const int factor = 1 << (profile.seg_depth - 1);
  require(train_set.image_size() % factor == 0,
          "image size " + std::to_string(train_set.image_size()) + " is not divisible by " +
              std::to_string(factor));

  TrainState<T> state;
  if (options.resume_from) {
    state = load_checkpoint<T>(*options.resume_from, profile);
    require(state.class_names == train_set.class_names, "checkpoint classes differ from the dataset");
    require(state.config.strategy == cfg.strategy && state.config.seed == cfg.seed &&
                state.config.batch_size == cfg.batch_size,
            "resumed checkpoint was trained with a different strategy, seed or batch size");
    state.config = cfg;
  } else {
    state = init_train_state<T>(cfg, profile, train_set.class_names);
  }

  const fs::path& dir = options.run_dir;
  std::error_code ec;
  fs::create_directories(dir / "checkpoints", ec);
  if (ec) fail(ErrorCode::io, "cannot create run dir " + dir.string() + ": " + ec.message());

  json echo = json::parse(options.config_echo_extra);
  echo["train"] = json::parse(train_config_to_json(cfg));
  echo["profile"] = json::parse(profile.canonical_json());
  echo["profile_hash"] = profile.hash();
  echo["class_names"] = train_set.class_names;
  write_text_file(dir / "run_config.json", echo.dump(2) + "\n");

  const fs::path metrics = dir / "metrics.csv", steps = dir / "steps.jsonl",
                 wstats = dir / "weight_stats.csv";
  if (!options.resume_from) {
    std::string header = "epoch,split";
    for (const auto& c : train_set.class_names) header += ",dice_" + c;
    header += ",dice_avg,mean_loss";
    write_text_file(metrics, header + "\n");
    write_text_file(steps, "");
    write_text_file(wstats, "epoch,step,mean_clean,mean_noisy,var_clean,var_noisy,ratio,n_clean,n_noisy\n");
  }

  std::vector<std::string> noisy_ids;
  for (const auto& s : train_set.samples)
    if (s.corrupted) noisy_ids.push_back(s.id);
  const bool track = !noisy_ids.empty() && uses_quality_network(cfg.strategy);

  TrainArtifacts art;
  art.run_dir = dir;
  const bool has_scores = uses_quality_network(cfg.strategy);
  while (state.epoch < cfg.epochs) {
    const auto batches = batch_iterator(train_set, cfg.batch_size, cfg.seed, state.epoch);
    std::vector<StepRecord> records;
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
      StepRecord rec = train_step(state, batch);
      loss_sum += rec.scalar_loss;
      append_line(steps, step_json(rec, has_scores).dump());
      records.push_back(std::move(rec));
    }
    if (track) {
      for (const auto& ws : track_group_weights(records, noisy_ids))
        append_line(wstats, std::to_string(ws.epoch) + "," + std::to_string(ws.step) + "," +
                                fmt(ws.mean_clean) + "," + fmt(ws.mean_noisy) + "," +
                                fmt(ws.var_clean) + "," + fmt(ws.var_noisy) + "," +
                                (ws.ratio ? fmt(*ws.ratio) : std::string("nan")) + "," +
                                std::to_string(ws.n_clean) + "," + std::to_string(ws.n_noisy));
    }

    const DiceReport report = evaluate_model(state.segnet, eval_set, state.class_names);
    const double mean_loss = loss_sum / static_cast<double>(records.size());
    std::string row = std::to_string(state.epoch + 1) + ",eval";
    std::vector<double> values;
    for (double d : report.per_class) {
      row += "," + fmt(d);
      values.push_back(d);
    }
    row += "," + fmt(report.average) + "," + fmt(mean_loss);
    values.push_back(report.average);
    values.push_back(mean_loss);
    append_line(metrics, row);
    art.eval_rows.push_back(values);

    ++state.epoch;
    if (report.average > state.best_dice) {
      state.best_dice = report.average;
      state.best_epoch = state.epoch;
      state.epochs_since_best = 0;
      save_checkpoint(state, dir / "checkpoints" / "best");
    } else {
      ++state.epochs_since_best;
    }
    save_checkpoint(state, dir / "checkpoints" / "final");
    if (options.log) {
      std::ostringstream msg;
      msg << "epoch " << state.epoch << "/" << cfg.epochs << " loss " << fmt(mean_loss)
          << " dice " << fmt(report.average);
      if (track && !records.empty()) {
        const auto ws = track_group_weights(records, noisy_ids);
        if (!ws.empty() && ws.back().ratio) msg << " clean/noisy " << fmt(*ws.back().ratio);
      }
      options.log(msg.str());
    }
    ++art.epochs_run;
    if (cfg.patience > 0 && state.epochs_since_best >= cfg.patience && state.epoch < cfg.epochs) {
      art.stopped_early = true;
      break;
    }
  }
  art.best_dice = state.best_dice;
  art.best_epoch = state.best_epoch;
  return art;
}

TrainArtifacts train_any(const TrainConfig& cfg, const ModelProfile& profile,
                         const Dataset& train_set, const Dataset& eval_set,
                         const TrainOptions& options) {
  if (cfg.precision == Precision::f64) return train<double>(cfg, profile, train_set, eval_set, options);
  return train<float>(cfg, profile, train_set, eval_set, options);
}

#define PAL_TRAIN_INSTANTIATE(T)                                                                 \
  template void adam_step<T>(nn::Buffer<T>&, const nn::Buffer<T>&, AdamState<T>&, double,      \
                             const AdamConfig&);                                                 \
  template TrainState<T> init_train_state<T>(const TrainConfig&, const ModelProfile&,            \
                                             const std::vector<std::string>&);                   \
  template std::vector<T> per_sample_loss<T>(std::span<const nn::Volume<T>>,                     \
                                             std::span<const nn::Volume<T>>,                     \
                                             std::vector<nn::Volume<T>>*);                       \
  template StepRecord train_step<T>(TrainState<T>&, const Batch&);                               \
  template void save_checkpoint<T>(const TrainState<T>&, const fs::path&);                       \
  template TrainState<T> load_checkpoint<T>(const fs::path&, const ModelProfile&);               \
  template TrainArtifacts train<T>(const TrainConfig&, const ModelProfile&, const Dataset&,      \
                                   const Dataset&, const TrainOptions&);

PAL_TRAIN_INSTANTIATE(float)
PAL_TRAIN_INSTANTIATE(double)

#undef PAL_TRAIN_INSTANTIATE

}  // namespace pal
