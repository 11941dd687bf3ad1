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

#include "pal/pal.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "corruption.hpp"
#include "datasets.hpp"
#include "evaluation.hpp"
#include "json.hpp"
#include "report.hpp"
#include "reweighting.hpp"
#include "run_config.hpp"

struct pal_dataset {
  pal::Dataset value;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

pal_status to_status(pal::ErrorCode code) {
  switch (code) {
    case pal::ErrorCode::invalid_argument: return PAL_ERR_INVALID_ARGUMENT;
    case pal::ErrorCode::io: return PAL_ERR_IO;
    case pal::ErrorCode::format: return PAL_ERR_FORMAT;
    case pal::ErrorCode::state_conflict: return PAL_ERR_STATE_CONFLICT;
    case pal::ErrorCode::diverged: return PAL_ERR_DIVERGED;
  }
  return PAL_ERR_INTERNAL;
}

template <class F>
pal_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return PAL_OK;
  } catch (const pal::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PAL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PAL_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) pal::fail(pal::ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

pal_dataset* wrap(pal::Dataset d) { return new pal_dataset{std::move(d)}; }

pal::Strategy to_strategy(pal_strategy s) {
  switch (s) {
    case PAL_STRATEGY_BASELINE: return pal::Strategy::baseline;
    case PAL_STRATEGY_QAM: return pal::Strategy::qam;
    case PAL_STRATEGY_QAM_OCM: return pal::Strategy::qam_ocm;
  }
  pal::fail(pal::ErrorCode::invalid_argument, "unknown strategy");
}

pal::Mask to_mask(const uint8_t* data, int height, int width) {
  need(data, "mask");
  pal::require(height >= 1 && width >= 1, "mask dimensions must be positive");
  pal::Mask m(height, width);
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = data[i] != 0;
  return m;
}

}  // namespace

extern "C" {

const char* pal_version(void) { return "1.0.0"; }

const char* pal_last_error(void) { return g_last_error.c_str(); }

const char* pal_status_name(pal_status status) {
  switch (status) {
    case PAL_OK: return "ok";
    case PAL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PAL_ERR_IO: return "i/o error";
    case PAL_ERR_FORMAT: return "format error";
    case PAL_ERR_STATE_CONFLICT: return "state conflict";
    case PAL_ERR_DIVERGED: return "diverged";
    case PAL_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

void pal_string_free(char* s) { std::free(s); }

pal_status pal_dataset_synthetic(int count, int size, int n_classes, uint64_t seed,
                                 pal_dataset** out) {
  return guarded([&] {
    need(out, "out");
    *out = wrap(pal::generate_synthetic(count, size, n_classes, seed));
  });
}

pal_status pal_dataset_load(const char* dir, pal_dataset** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    *out = wrap(pal::load_dataset(dir));
  });
}

pal_status pal_dataset_load_jsrt(const char* image_dir, const char* mask_dir,
                                 const char* grouping_json_path, pal_dataset** out,
                                 size_t* skipped) {
  return guarded([&] {
    need(image_dir, "image_dir");
    need(mask_dir, "mask_dir");
    need(out, "out");
    const auto grouping = grouping_json_path ? pal::ClassGrouping::from_json_file(grouping_json_path)
                                             : pal::ClassGrouping::scr_default();
    auto r = pal::load_jsrt(image_dir, mask_dir, grouping);
    if (skipped) *skipped = r.skipped;
    *out = wrap(std::move(r.dataset));
  });
}

pal_status pal_dataset_save(const pal_dataset* d, const char* dir) {
  return guarded([&] {
    need(d, "dataset");
    need(dir, "dir");
    pal::save_dataset(d->value, dir);
  });
}

pal_status pal_dataset_resize(const pal_dataset* d, int size, pal_dataset** out) {
  return guarded([&] {
    need(d, "dataset");
    need(out, "out");
    *out = wrap(pal::resize_dataset(d->value, size));
  });
}

pal_status pal_dataset_split(const pal_dataset* d, double train_fraction, uint64_t seed,
                             pal_dataset** train, pal_dataset** test) {
  return guarded([&] {
    need(d, "dataset");
    need(train, "train");
    need(test, "test");
    auto [a, b] = pal::split(d->value, pal::SplitSpec{train_fraction, seed});
    auto ta = std::make_unique<pal_dataset>(pal_dataset{std::move(a)});
    *test = wrap(std::move(b));
    *train = ta.release();
  });
}

void pal_dataset_free(pal_dataset* d) { delete d; }

size_t pal_dataset_size(const pal_dataset* d) { return d ? d->value.size() : 0; }

int pal_dataset_image_size(const pal_dataset* d) { return d ? d->value.image_size() : 0; }

size_t pal_dataset_num_classes(const pal_dataset* d) {
  return d ? d->value.class_names.size() : 0;
}

size_t pal_dataset_num_corrupted(const pal_dataset* d) {
  if (!d) return 0;
  size_t n = 0;
  for (const auto& s : d->value.samples) n += s.corrupted;
  return n;
}

pal_status pal_dataset_class_names(const pal_dataset* d, char** out) {
  return guarded([&] {
    need(d, "dataset");
    need(out, "out");
    std::string joined;
    for (const auto& c : d->value.class_names) joined += (joined.empty() ? "" : ",") + c;
    *out = dup_string(joined);
  });
}

pal_status pal_dataset_corrupt(const pal_dataset* d, const char* noise_spec_json,
                               pal_dataset** out, char** manifest_json) {
  return guarded([&] {
    need(d, "dataset");
    need(noise_spec_json, "noise_spec_json");
    need(out, "out");
    const auto spec = pal::NoiseSpec::from_json_text(noise_spec_json);
    auto r = pal::corrupt(d->value, spec);
    char* manifest = manifest_json ? dup_string(pal::manifest_json(spec, r.records)) : nullptr;
    *out = wrap(std::move(r.dataset));
    if (manifest_json) *manifest_json = manifest;
  });
}

pal_status pal_manifest_write(const char* path, const char* manifest_json) {
  return guarded([&] {
    need(path, "path");
    need(manifest_json, "manifest_json");
    const auto [spec, records] = pal::parse_manifest(manifest_json);
    pal::save_manifest(path, spec, records);
  });
}

pal_status pal_dilate(const uint8_t* mask, int height, int width, int radius, uint8_t* out) {
  return guarded([&] {
    need(out, "out");
    const auto r = pal::dilate(to_mask(mask, height, width), radius);
    std::memcpy(out, r.values.data(), r.values.size());
  });
}

pal_status pal_erode(const uint8_t* mask, int height, int width, int radius, uint8_t* out) {
  return guarded([&] {
    need(out, "out");
    const auto r = pal::erode(to_mask(mask, height, width), radius);
    std::memcpy(out, r.values.data(), r.values.size());
  });
}

pal_status pal_compute_weights(pal_strategy strategy, double lambda, const double* scores,
                               size_t n, double* weights) {
  return guarded([&] {
    need(scores, "scores");
    need(weights, "weights");
    const auto w = pal::compute_weights<double>(std::span<const double>(scores, n),
                                                to_strategy(strategy), pal::OcmConfig{lambda});
    std::copy(w.begin(), w.end(), weights);
  });
}

pal_status pal_combine_loss(const double* weights, const double* losses, size_t n, double* out) {
  return guarded([&] {
    need(weights, "weights");
    need(losses, "losses");
    need(out, "out");
    *out = pal::combine_loss<double>(std::span<const double>(weights, n),
                                     std::span<const double>(losses, n));
  });
}

pal_status pal_score_gradient(pal_strategy strategy, double lambda, const double* scores,
                              const double* losses, size_t n, double* grad) {
  return guarded([&] {
    need(scores, "scores");
    need(losses, "losses");
    need(grad, "grad");
    const pal::Strategy s = to_strategy(strategy);
    const pal::OcmConfig cfg{lambda};
    const std::span<const double> t(scores, n);
    const auto w = pal::compute_weights<double>(t, s, cfg);
    const auto g = pal::score_gradient<double>(t, w, std::span<const double>(losses, n), s, cfg);
    std::copy(g.begin(), g.end(), grad);
  });
}

pal_status pal_dice(const uint8_t* pred, const uint8_t* gt, int height, int width, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = pal::dice(to_mask(pred, height, width), to_mask(gt, height, width));
  });
}

pal_status pal_evaluate_checkpoint(const char* checkpoint_dir, const pal_dataset* d,
                                   char** report_json) {
  return guarded([&] {
    need(checkpoint_dir, "checkpoint_dir");
    need(d, "dataset");
    need(report_json, "report_json");
    *report_json = dup_string(pal::evaluate_checkpoint(checkpoint_dir, d->value).to_json());
  });
}

pal_status pal_run_config_check(const char* run_config_json, char** normalized_json) {
  return guarded([&] {
    need(run_config_json, "run_config_json");
    const auto cfg = pal::RunConfig::from_json_text(run_config_json);
    if (normalized_json) *normalized_json = dup_string(cfg.to_json());
  });
}

pal_status pal_train(const char* run_config_json, pal_log_fn log, void* user, char** summary_json) {
  return guarded([&] {
    need(run_config_json, "run_config_json");
    const auto cfg = pal::RunConfig::from_json_text(run_config_json);
    pal::LogFn fn;
    if (log) fn = [log, user](const std::string& msg) { log(msg.c_str(), user); };
    const auto art = pal::execute_run(cfg, fn);
    if (summary_json)
      *summary_json = dup_string(json{{"run_dir", art.run_dir.string()},
                                      {"best_dice", art.best_dice},
                                      {"best_epoch", art.best_epoch},
                                      {"epochs_run", art.epochs_run},
                                      {"stopped_early", art.stopped_early}}
                                     .dump());
  });
}

pal_status pal_report(const char* const* run_dirs, size_t n, const char* out_dir,
                      char** summary_json) {
  return guarded([&] {
    need(out_dir, "out_dir");
    if (n > 0) need(run_dirs, "run_dirs");
    std::vector<std::filesystem::path> dirs;
    for (size_t i = 0; i < n; ++i) {
      need(run_dirs[i], "run_dirs[i]");
      dirs.emplace_back(run_dirs[i]);
    }
    const auto summary = pal::write_report(dirs, out_dir);
    if (summary_json) {
      json plots = json::array();
      for (const auto& p : summary.plots) plots.push_back(p.string());
      *summary_json =
          dup_string(json{{"rows", summary.rows}, {"plots", plots}, {"notes", summary.notes}}.dump());
    }
  });
}

}  // extern "C"
