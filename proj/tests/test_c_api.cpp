// Copyright 2026 The occlift Authors.
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

// Exercises the shared library strictly through the C header.
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "occlift/occlift.h"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  occlift_string_free(s);
  return out;
}

occlift_dataset* tiny_dataset(uint64_t seed) {
  occlift_synth_options o;
  occlift_synth_options_default(&o);
  o.actions = 2;
  o.per_action = 4;
  o.frames = 40;
  o.subjects = 4;
  o.seed = seed;
  occlift_dataset* ds = nullptr;
  REQUIRE(occlift_dataset_synthesize(&o, &ds) == OCCLIFT_OK);
  return ds;
}

occlift_model_config tiny_config() {
  occlift_model_config c;
  occlift_model_config_default(&c);
  c.channels = 16;
  c.blocks = 1;
  return c;
}

std::filesystem::path scratch() {
  auto dir = std::filesystem::temp_directory_path() / "occlift_test_c_api";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(occlift_version()) > 0);
  CHECK(std::string(occlift_status_name(OCCLIFT_OK)) == "ok");
  CHECK(std::string(occlift_status_name(OCCLIFT_ERR_SHAPE_MISMATCH)) ==
        "shape_mismatch");
  CHECK(std::string(occlift_status_name(OCCLIFT_ERR_UNKNOWN_TOPOLOGY)) ==
        "unknown_topology");
  occlift_string_free(nullptr);
  occlift_dataset_free(nullptr);
  occlift_model_free(nullptr);
  occlift_mask_free(nullptr);
  occlift_report_free(nullptr);
  occlift_classifier_free(nullptr);
}

TEST_CASE("errors map onto status codes") {
  occlift_mask* m = nullptr;
  CHECK(occlift_mask_create("random_k:3", "nosuch", 10, 1, &m) ==
        OCCLIFT_ERR_UNKNOWN_TOPOLOGY);
  CHECK(m == nullptr);
  CHECK(std::string(occlift_last_error()).find("nosuch") != std::string::npos);
  CHECK(occlift_mask_create("body_part:Tail", "h36m17", 10, 1, &m) ==
        OCCLIFT_ERR_UNKNOWN_PART);
  CHECK(occlift_mask_create("fog", "h36m17", 10, 1, &m) == OCCLIFT_ERR_PARSE);
  CHECK(occlift_mask_create("random_k:17", "h36m17", 10, 1, &m) ==
        OCCLIFT_ERR_INVALID_ARGUMENT);
  CHECK(occlift_mask_create(nullptr, "h36m17", 10, 1, &m) ==
        OCCLIFT_ERR_INVALID_ARGUMENT);

  occlift_model* model = nullptr;
  CHECK(occlift_model_load((scratch() / "absent.ckpt").c_str(), &model) ==
        OCCLIFT_ERR_IO);
  auto cfg = tiny_config();
  cfg.channels = 0;
  CHECK(occlift_model_create(&cfg, 1, &model) == OCCLIFT_ERR_INVALID_ARGUMENT);
  CHECK(model == nullptr);
}

TEST_CASE("masks through the C API") {
  occlift_mask* m = nullptr;
  REQUIRE(occlift_mask_create("random_k:16", "h36m17", 5, 1, &m) == OCCLIFT_OK);
  for (int f = 0; f < 5; ++f) {
    int missing = -1;
    REQUIRE(occlift_mask_missing(m, f, &missing) == OCCLIFT_OK);
    CHECK(missing == 16);
  }
  int missing = 0;
  CHECK(occlift_mask_missing(m, 5, &missing) == OCCLIFT_ERR_INVALID_ARGUMENT);
  char* text = nullptr;
  REQUIRE(occlift_mask_format(m, &text) == OCCLIFT_OK);
  const auto s = take(text);
  CHECK(s.rfind("{\"schema\":\"occmask/1\"", 0) == 0);
  CHECK(occlift_mask_save(m, (scratch() / "m.txt").c_str()) == OCCLIFT_OK);
  occlift_mask_free(m);

  occlift_mask* a = nullptr;
  occlift_mask* b = nullptr;
  REQUIRE(occlift_mask_create("random_k:4", "h36m17", 30, 7, &a) == OCCLIFT_OK);
  REQUIRE(occlift_mask_create("random_k:4", "h36m17", 30, 7, &b) == OCCLIFT_OK);
  char* ta = nullptr;
  char* tb = nullptr;
  occlift_mask_format(a, &ta);
  occlift_mask_format(b, &tb);
  CHECK(take(ta) == take(tb));
  occlift_mask_free(a);
  occlift_mask_free(b);
}

TEST_CASE("dataset save and load") {
  occlift_dataset* ds = tiny_dataset(3);
  size_t all = 0, train = 0, test = 0;
  occlift_dataset_count(ds, OCCLIFT_SPLIT_ALL, &all);
  occlift_dataset_count(ds, OCCLIFT_SPLIT_TRAIN, &train);
  occlift_dataset_count(ds, OCCLIFT_SPLIT_TEST, &test);
  CHECK(all == 8);
  CHECK(train + test == all);
  int classes = 0;
  occlift_dataset_n_classes(ds, &classes);
  CHECK(classes == 2);
  CHECK(std::string(occlift_dataset_topology(ds)) == "h36m17");
  CHECK(occlift_dataset_count(ds, 5, &all) == OCCLIFT_ERR_INVALID_ARGUMENT);

  const auto dir = scratch() / "ds";
  std::filesystem::remove_all(dir);
  REQUIRE(occlift_dataset_save(ds, dir.c_str()) == OCCLIFT_OK);
  occlift_dataset* back = nullptr;
  REQUIRE(occlift_dataset_load(dir.c_str(), &back) == OCCLIFT_OK);
  size_t n = 0;
  occlift_dataset_count(back, OCCLIFT_SPLIT_ALL, &n);
  CHECK(n == 8);
  occlift_dataset_free(back);
  occlift_dataset_free(ds);
}

TEST_CASE("model lifecycle, training and evaluation") {
  occlift_dataset* ds = tiny_dataset(5);
  auto cfg = tiny_config();
  occlift_model* model = nullptr;
  REQUIRE(occlift_model_create(&cfg, 9, &model) == OCCLIFT_OK);
  int rf = 0;
  occlift_model_receptive_field(model, &rf);
  CHECK(rf == 9);
  int64_t params = 0;
  occlift_model_parameter_count(model, &params);
  CHECK(params > 0);
  char* json = nullptr;
  REQUIRE(occlift_model_config_json(model, &json) == OCCLIFT_OK);
  CHECK(take(json).find("\"channels\":16") != std::string::npos);

  occlift_train_options t;
  occlift_train_options_default(&t);
  t.epochs = 2;
  t.batch_size = 4;
  t.window_frames = 16;
  t.seed = 2;
  std::vector<std::string> records;
  auto cb = [](const char* rec, void* user) {
    static_cast<std::vector<std::string>*>(user)->push_back(rec);
  };
  REQUIRE(occlift_model_train(model, ds, &t, cb, &records) == OCCLIFT_OK);
  REQUIRE(records.size() == 2);
  CHECK(records[1].find("\"epoch\":2") != std::string::npos);

  uint64_t d1 = 0, d2 = 0;
  occlift_model_digest(model, &d1);
  const auto path = scratch() / "model.ckpt";
  REQUIRE(occlift_model_save(model, path.c_str()) == OCCLIFT_OK);
  occlift_model* loaded = nullptr;
  REQUIRE(occlift_model_load(path.c_str(), &loaded) == OCCLIFT_OK);
  occlift_model_digest(loaded, &d2);
  CHECK(d1 == d2);

  occlift_report* r1 = nullptr;
  occlift_report* r2 = nullptr;
  REQUIRE(occlift_evaluate(model, ds, OCCLIFT_SPLIT_TEST, 1, "random_k:4", 3, &r1) ==
          OCCLIFT_OK);
  REQUIRE(occlift_evaluate(loaded, ds, OCCLIFT_SPLIT_TEST, 1, "random_k:4", 3, &r2) ==
          OCCLIFT_OK);
  double m1 = 0, m2 = 0;
  occlift_report_overall(r1, &m1);
  occlift_report_overall(r2, &m2);
  CHECK(m1 > 0.0);
  CHECK(m1 == m2);
  char* rj = nullptr;
  REQUIRE(occlift_report_json(r1, &rj) == OCCLIFT_OK);
  CHECK(take(rj).find("\"evalreport/1\"") != std::string::npos);
  occlift_report* bad = nullptr;
  CHECK(occlift_evaluate(model, ds, OCCLIFT_SPLIT_TEST, 3, "none", 3, &bad) ==
        OCCLIFT_ERR_INVALID_ARGUMENT);

  occlift_report_free(r1);
  occlift_report_free(r2);
  occlift_model_free(loaded);
  occlift_model_free(model);
  occlift_dataset_free(ds);
}

TEST_CASE("classifier through the C API") {
  occlift_dataset* ds = tiny_dataset(8);
  occlift_classifier_options o;
  occlift_classifier_options_default(&o);
  o.size = 16;
  o.epochs = 2;
  occlift_classifier* clf = nullptr;
  REQUIRE(occlift_classifier_train(ds, &o, &clf) == OCCLIFT_OK);
  double acc = -1.0;
  REQUIRE(occlift_classifier_accuracy_gt(clf, ds, OCCLIFT_SPLIT_TEST, &acc) ==
          OCCLIFT_OK);
  CHECK((acc >= 0.0 && acc <= 1.0));

  auto cfg = tiny_config();
  occlift_model* model = nullptr;
  REQUIRE(occlift_model_create(&cfg, 1, &model) == OCCLIFT_OK);
  double pacc = -1.0;
  REQUIRE(occlift_classifier_accuracy_predicted(clf, model, ds, OCCLIFT_SPLIT_TEST,
                                                "random_k:8", 4, &pacc) == OCCLIFT_OK);
  CHECK((pacc >= 0.0 && pacc <= 1.0));

  occlift_classifier* again = nullptr;
  REQUIRE(occlift_classifier_train(ds, &o, &again) == OCCLIFT_OK);
  uint64_t h1 = 0, h2 = 0;
  occlift_classifier_digest(clf, &h1);
  occlift_classifier_digest(again, &h2);
  CHECK(h1 == h2);
  occlift_classifier_free(again);
  occlift_classifier_free(clf);
  occlift_model_free(model);
  occlift_dataset_free(ds);
}
