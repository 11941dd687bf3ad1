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


// Exercises the shared library through its public header only.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "pal/pal.h"

namespace {

struct Tmp {
  std::filesystem::path path;
  Tmp() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("pal_capi_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~Tmp() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

struct DatasetPtr {
  pal_dataset* p = nullptr;
  ~DatasetPtr() { pal_dataset_free(p); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  pal_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(pal_version()) == "1.0.0");
  CHECK(std::string(pal_status_name(PAL_ERR_STATE_CONFLICT)) == "state conflict");
}

TEST_CASE("dataset lifecycle") {
  Tmp tmp;
  DatasetPtr d;
  REQUIRE(pal_dataset_synthetic(10, 32, 2, 3, &d.p) == PAL_OK);
  CHECK(pal_dataset_size(d.p) == 10);
  CHECK(pal_dataset_image_size(d.p) == 32);
  CHECK(pal_dataset_num_classes(d.p) == 2);
  char* names = nullptr;
  REQUIRE(pal_dataset_class_names(d.p, &names) == PAL_OK);
  CHECK(take(names) == "class0,class1");

  DatasetPtr tr, te;
  REQUIRE(pal_dataset_split(d.p, 0.5, 1, &tr.p, &te.p) == PAL_OK);
  CHECK(pal_dataset_size(tr.p) == 5);
  CHECK(pal_dataset_size(te.p) == 5);

  DatasetPtr noisy;
  char* manifest = nullptr;
  REQUIRE(pal_dataset_corrupt(
              tr.p, R"({"fraction":0.4,"radius_min":1,"radius_max":2,"op_policy":"dilate","seed":2})",
              &noisy.p, &manifest) == PAL_OK);
  CHECK(pal_dataset_num_corrupted(noisy.p) == 2);
  const std::string m = take(manifest);
  CHECK(nlohmann::json::parse(m)["records"].size() == 2);
  CHECK(pal_manifest_write((tmp.path / "m.json").c_str(), m.c_str()) == PAL_OK);

  DatasetPtr twice;
  CHECK(pal_dataset_corrupt(noisy.p, R"({"fraction":0.4,"radius_min":1,"radius_max":2,"op_policy":"dilate","seed":2})",
                            &twice.p, nullptr) == PAL_ERR_STATE_CONFLICT);
  CHECK(std::string(pal_last_error()).size() > 0);

  REQUIRE(pal_dataset_save(noisy.p, (tmp.path / "ds").c_str()) == PAL_OK);
  DatasetPtr back;
  REQUIRE(pal_dataset_load((tmp.path / "ds").c_str(), &back.p) == PAL_OK);
  CHECK(pal_dataset_num_corrupted(back.p) == 2);

  DatasetPtr missing;
  CHECK(pal_dataset_load((tmp.path / "nope").c_str(), &missing.p) != PAL_OK);
  CHECK(missing.p == nullptr);
}

TEST_CASE("argument errors") {
  pal_dataset* d = nullptr;
  CHECK(pal_dataset_synthetic(0, 32, 1, 1, &d) == PAL_ERR_INVALID_ARGUMENT);
  CHECK(pal_dataset_synthetic(4, 32, 1, 1, nullptr) == PAL_ERR_INVALID_ARGUMENT);
  CHECK(pal_dataset_corrupt(nullptr, "{}", &d, nullptr) == PAL_ERR_INVALID_ARGUMENT);
  double w[2];
  const double s[2] = {1.0, 2.0};
  CHECK(pal_compute_weights(PAL_STRATEGY_QAM_OCM, 2.0, s, 0, w) == PAL_ERR_INVALID_ARGUMENT);
  CHECK(pal_run_config_check(R"({"output_dir":"x","data":"y","typo":1})", nullptr) ==
        PAL_ERR_INVALID_ARGUMENT);
  CHECK(pal_run_config_check("not json", nullptr) != PAL_OK);
}

TEST_CASE("math entry points") {
  const double s[2] = {50.0, -50.0};
  double w[2];
  REQUIRE(pal_compute_weights(PAL_STRATEGY_QAM_OCM, 2.0, s, 2, w) == PAL_OK);
  CHECK(w[0] / w[1] == doctest::Approx(std::exp(4.0)));
  const double L[2] = {0.5, 2.0};
  double loss = 0;
  REQUIRE(pal_combine_loss(w, L, 2, &loss) == PAL_OK);
  CHECK(loss == doctest::Approx(w[0] * 0.5 + w[1] * 2.0));
  double g[2];
  REQUIRE(pal_score_gradient(PAL_STRATEGY_QAM_OCM, 2.0, s, L, 2, g) == PAL_OK);
  CHECK(std::abs(g[0]) < 1e-30);

  std::vector<uint8_t> m(81, 0), out(81, 0);
  m[40] = 1;
  REQUIRE(pal_dilate(m.data(), 9, 9, 1, out.data()) == PAL_OK);
  int n = 0;
  for (auto v : out) n += v;
  CHECK(n == 5);
  REQUIRE(pal_erode(out.data(), 9, 9, 1, m.data()) == PAL_OK);
  double dc = 0;
  CHECK(pal_dice(out.data(), out.data(), 9, 9, &dc) == PAL_OK);
  CHECK(dc == 1.0);
}

TEST_CASE("train, evaluate and report") {
  Tmp tmp;
  DatasetPtr d;
  REQUIRE(pal_dataset_synthetic(24, 32, 1, 3, &d.p) == PAL_OK);
  REQUIRE(pal_dataset_save(d.p, (tmp.path / "data").c_str()) == PAL_OK);
  nlohmann::json cfg = {{"output_dir", (tmp.path / "run").string()},
                        {"data", (tmp.path / "data").string()},
                        {"train_fraction", 0.75},
                        {"strategy", "qam_ocm"},
                        {"epochs", 1},
                        {"batch_size", 6},
                        {"learning_rate", 1e-3}};
  int calls = 0;
  char* summary = nullptr;
  const pal_status st = pal_train(
      cfg.dump().c_str(), [](const char*, void* u) { ++*static_cast<int*>(u); }, &calls, &summary);
  REQUIRE_MESSAGE(st == PAL_OK, pal_last_error());
  CHECK(calls == 1);
  const auto sj = nlohmann::json::parse(take(summary));
  CHECK(sj["epochs_run"] == 1);

  CHECK(pal_train(cfg.dump().c_str(), nullptr, nullptr, nullptr) == PAL_ERR_STATE_CONFLICT);

  char* report = nullptr;
  REQUIRE(pal_evaluate_checkpoint((tmp.path / "run" / "checkpoints" / "final").c_str(), d.p,
                                  &report) == PAL_OK);
  CHECK(nlohmann::json::parse(take(report)).contains("average"));

  const std::string run = (tmp.path / "run").string();
  const char* dirs[1] = {run.c_str()};
  char* rs = nullptr;
  REQUIRE(pal_report(dirs, 1, (tmp.path / "rep").c_str(), &rs) == PAL_OK);
  CHECK(nlohmann::json::parse(take(rs))["rows"] == 1);
}
