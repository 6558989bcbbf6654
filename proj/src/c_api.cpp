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

#include "occlift/occlift.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <string>
#include <variant>

#include <json.hpp>

#include "occlift/dataset.hpp"
#include "occlift/error.hpp"
#include "occlift/lifter.hpp"
#include "occlift/metrics.hpp"
#include "occlift/occlusion.hpp"
#include "occlift/quality.hpp"
#include "occlift/synth.hpp"
#include "occlift/trainer.hpp"

struct occlift_dataset {
  occlift::Dataset ds;
};

struct occlift_mask {
  occlift::OcclusionMask mask;
};

struct occlift_model {
  std::variant<occlift::LifterModel<float>, occlift::LifterModel<double>> model;
};

struct occlift_report {
  occlift::EvalReport report;
};

struct occlift_classifier {
  occlift::ActionClassifier clf;
};

namespace {

thread_local std::string g_last_error;

occlift_status status_of(occlift::ErrorKind kind) {
  using occlift::ErrorKind;
  switch (kind) {
    case ErrorKind::kInvalidArgument: return OCCLIFT_ERR_INVALID_ARGUMENT;
    case ErrorKind::kUnknownTopology: return OCCLIFT_ERR_UNKNOWN_TOPOLOGY;
    case ErrorKind::kUnknownPart: return OCCLIFT_ERR_UNKNOWN_PART;
    case ErrorKind::kParse: return OCCLIFT_ERR_PARSE;
    case ErrorKind::kShapeMismatch: return OCCLIFT_ERR_SHAPE_MISMATCH;
    case ErrorKind::kNonFinite: return OCCLIFT_ERR_NON_FINITE;
    case ErrorKind::kIo: return OCCLIFT_ERR_IO;
    case ErrorKind::kVersion: return OCCLIFT_ERR_VERSION;
    case ErrorKind::kNumeric: return OCCLIFT_ERR_NUMERIC;
  }
  return OCCLIFT_ERR_INTERNAL;
}

template <typename F>
occlift_status guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return OCCLIFT_OK;
  } catch (const occlift::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return OCCLIFT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return OCCLIFT_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr)
    throw occlift::Error(occlift::ErrorKind::kInvalidArgument,
                         std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<const occlift::LabeledPair*> select(const occlift::Dataset& ds, int split) {
  if (split == OCCLIFT_SPLIT_ALL) {
    std::vector<const occlift::LabeledPair*> all;
    for (const auto& p : ds.items) all.push_back(&p);
    return all;
  }
  if (split == OCCLIFT_SPLIT_TRAIN) return ds.select(occlift::Split::kTrain);
  if (split == OCCLIFT_SPLIT_TEST) return ds.select(occlift::Split::kTest);
  throw occlift::Error(occlift::ErrorKind::kInvalidArgument,
                       "unknown split " + std::to_string(split));
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

}  // namespace

extern "C" {

const char* occlift_version(void) { return "0.1.0"; }

const char* occlift_last_error(void) { return g_last_error.c_str(); }

const char* occlift_status_name(occlift_status status) {
  switch (status) {
    case OCCLIFT_OK: return "ok";
    case OCCLIFT_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case OCCLIFT_ERR_UNKNOWN_TOPOLOGY: return "unknown_topology";
    case OCCLIFT_ERR_UNKNOWN_PART: return "unknown_part";
    case OCCLIFT_ERR_PARSE: return "parse";
    case OCCLIFT_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case OCCLIFT_ERR_NON_FINITE: return "non_finite";
    case OCCLIFT_ERR_IO: return "io";
    case OCCLIFT_ERR_VERSION: return "version";
    case OCCLIFT_ERR_NUMERIC: return "numeric";
    case OCCLIFT_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void occlift_string_free(char* s) { std::free(s); }

// ---- datasets ---------------------------------------------------------------

void occlift_synth_options_default(occlift_synth_options* opts) {
  if (opts == nullptr) return;
  const occlift::synth::DatasetOptions d;
  opts->topology = "h36m17";
  opts->actions = d.n_actions;
  opts->per_action = d.sequences_per_action;
  opts->frames = d.frames;
  opts->fps = d.fps;
  opts->subjects = d.n_subjects;
  opts->seed = 0;
}

occlift_status occlift_dataset_synthesize(const occlift_synth_options* opts,
                                          occlift_dataset** out) {
  return guarded([&] {
    require(opts, "opts");
    require(out, "out");
    require(opts->topology, "opts->topology");
    occlift::synth::DatasetOptions d;
    d.n_actions = opts->actions;
    d.sequences_per_action = opts->per_action;
    d.frames = opts->frames;
    d.fps = opts->fps;
    d.n_subjects = opts->subjects;
    auto h = std::make_unique<occlift_dataset>();
    h->ds = occlift::synth::make_dataset(
        opts->seed, occlift::get_topology(opts->topology), d);
    *out = h.release();
  });
}

occlift_status occlift_dataset_load(const char* dir, occlift_dataset** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    auto h = std::make_unique<occlift_dataset>();
    h->ds = occlift::load_dataset(dir);
    *out = h.release();
  });
}

occlift_status occlift_dataset_save(const occlift_dataset* ds, const char* dir) {
  return guarded([&] {
    require(ds, "ds");
    require(dir, "dir");
    occlift::save_dataset(ds->ds, dir);
  });
}

occlift_status occlift_dataset_count(const occlift_dataset* ds, int split,
                                     size_t* out) {
  return guarded([&] {
    require(ds, "ds");
    require(out, "out");
    *out = select(ds->ds, split).size();
  });
}

occlift_status occlift_dataset_n_classes(const occlift_dataset* ds, int* out) {
  return guarded([&] {
    require(ds, "ds");
    require(out, "out");
    *out = ds->ds.n_classes();
  });
}

const char* occlift_dataset_topology(const occlift_dataset* ds) {
  return ds == nullptr ? "" : ds->ds.topology.c_str();
}

void occlift_dataset_free(occlift_dataset* ds) { delete ds; }

// ---- masks ------------------------------------------------------------------

occlift_status occlift_mask_create(const char* scheme, const char* topology,
                                   int frames, uint64_t seed, occlift_mask** out) {
  return guarded([&] {
    require(scheme, "scheme");
    require(topology, "topology");
    require(out, "out");
    auto mask = occlift::make_mask(occlift::parse_scheme(scheme), seed, frames,
                                   occlift::get_topology(topology));
    *out = new occlift_mask{std::move(mask)};
  });
}

occlift_status occlift_mask_missing(const occlift_mask* mask, int frame, int* out) {
  return guarded([&] {
    require(mask, "mask");
    require(out, "out");
    if (frame < 0 || frame >= mask->mask.frames())
      throw occlift::Error(occlift::ErrorKind::kInvalidArgument,
                           "frame " + std::to_string(frame) + " out of range");
    *out = mask->mask.missing_in_frame(frame);
  });
}

occlift_status occlift_mask_format(const occlift_mask* mask, char** out) {
  return guarded([&] {
    require(mask, "mask");
    require(out, "out");
    *out = dup_string(occlift::format_mask(mask->mask));
  });
}

occlift_status occlift_mask_save(const occlift_mask* mask, const char* path) {
  return guarded([&] {
    require(mask, "mask");
    require(path, "path");
    occlift::save_mask(mask->mask, path);
  });
}

void occlift_mask_free(occlift_mask* mask) { delete mask; }

// ---- models -----------------------------------------------------------------

void occlift_model_config_default(occlift_model_config* cfg) {
  if (cfg == nullptr) return;
  const occlift::LifterConfig d;
  cfg->topology = "h36m17";
  cfg->guided = 1;
  cfg->channels = d.channels;
  cfg->blocks = d.blocks;
  cfg->kernel = d.kernel;
  cfg->dilation_base = d.dilation_base;
  cfg->dropout_rate = d.dropout_rate;
  cfg->precision = 32;
}

occlift_status occlift_model_create(const occlift_model_config* cfg,
                                    uint64_t seed, occlift_model** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    require(cfg->topology, "cfg->topology");
    occlift::LifterConfig c;
    c.topology = cfg->topology;
    c.in_dims_per_joint = cfg->guided ? 4 : 2;
    c.channels = cfg->channels;
    c.blocks = cfg->blocks;
    c.kernel = cfg->kernel;
    c.dilation_base = cfg->dilation_base;
    c.dropout_rate = cfg->dropout_rate;
    if (cfg->precision == 32)
      *out = new occlift_model{occlift::LifterModel<float>::build(c, seed)};
    else if (cfg->precision == 64)
      *out = new occlift_model{occlift::LifterModel<double>::build(c, seed)};
    else
      throw occlift::Error(occlift::ErrorKind::kInvalidArgument,
                           "precision must be 32 or 64");
  });
}

occlift_status occlift_model_load(const char* path, occlift_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    // The stored dtype decides the precision.
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    const bool f64 = header.find("\"dtype\":\"f64\"") != std::string::npos;
    if (f64)
      *out = new occlift_model{occlift::load_checkpoint<double>(path)};
    else
      *out = new occlift_model{occlift::load_checkpoint<float>(path)};
  });
}

occlift_status occlift_model_save(const occlift_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    std::visit([&](const auto& m) { occlift::save_checkpoint(m, path); }, model->model);
  });
}

occlift_status occlift_model_receptive_field(const occlift_model* model, int* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = std::visit([](const auto& m) { return m.receptive_field(); }, model->model);
  });
}

occlift_status occlift_model_parameter_count(const occlift_model* model,
                                             int64_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = std::visit([](const auto& m) { return m.enumerated_parameter_count(); },
                      model->model);
  });
}

occlift_status occlift_model_digest(const occlift_model* model, uint64_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = std::visit(
        [](const auto& m) {
          std::uint64_t h = kFnvOffset;
          for (const auto* p : m.parameters())
            h = fnv1a(h, p->value.data(), p->value.size() * sizeof(p->value[0]));
          for (const auto* bn : m.batchnorms()) {
            h = fnv1a(h, bn->running_mean.data(),
                      bn->running_mean.size() * sizeof(bn->running_mean[0]));
            h = fnv1a(h, bn->running_var.data(),
                      bn->running_var.size() * sizeof(bn->running_var[0]));
          }
          return h;
        },
        model->model);
  });
}

occlift_status occlift_model_config_json(const occlift_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    const auto& c = std::visit(
        [](const auto& m) -> const occlift::LifterConfig& { return m.config(); },
        model->model);
    nlohmann::ordered_json j;
    j["topology"] = c.topology;
    j["guided"] = c.guided();
    j["in_dims_per_joint"] = c.in_dims_per_joint;
    j["channels"] = c.channels;
    j["blocks"] = c.blocks;
    j["kernel"] = c.kernel;
    j["dilation_base"] = c.dilation_base;
    j["dropout_rate"] = c.dropout_rate;
    j["precision"] = std::holds_alternative<occlift::LifterModel<float>>(model->model) ? 32 : 64;
    j["receptive_field"] = occlift::receptive_field(c);
    *out = dup_string(j.dump());
  });
}

void occlift_model_free(occlift_model* model) { delete model; }

// ---- training ---------------------------------------------------------------

void occlift_train_options_default(occlift_train_options* opts) {
  if (opts == nullptr) return;
  const occlift::TrainConfig d;
  opts->learning_rate = d.learning_rate;
  opts->lr_decay_per_epoch = d.lr_decay_per_epoch;
  opts->batch_size = d.batch_size;
  opts->window_frames = d.window_frames;
  opts->epochs = d.epochs;
  opts->seed = 0;
  opts->augment = 1;
  opts->p_apply = d.augmentation.p_apply;
  opts->k_max = -1;
  opts->validate = 1;
}

occlift_status occlift_model_train(occlift_model* model, const occlift_dataset* ds,
                                   const occlift_train_options* opts,
                                   occlift_epoch_callback cb, void* user) {
  return guarded([&] {
    require(model, "model");
    require(ds, "ds");
    require(opts, "opts");
    occlift::TrainConfig c;
    c.learning_rate = opts->learning_rate;
    c.lr_decay_per_epoch = opts->lr_decay_per_epoch;
    c.batch_size = opts->batch_size;
    c.window_frames = opts->window_frames;
    c.epochs = opts->epochs;
    c.seed = opts->seed;
    c.augmentation.enabled = opts->augment != 0;
    c.augmentation.p_apply = opts->p_apply;
    c.augmentation.k_max = opts->k_max;
    c.precision = std::holds_alternative<occlift::LifterModel<float>>(model->model) ? 32 : 64;
    const auto train = ds->ds.select(occlift::Split::kTrain);
    const auto val = opts->validate ? ds->ds.select(occlift::Split::kTest)
                                    : std::vector<const occlift::LabeledPair*>{};
    occlift::EpochCallback on_epoch;
    if (cb != nullptr)
      on_epoch = [&](const occlift::EpochRecord& r) {
        cb(occlift::format_epoch_record(r).c_str(), user);
      };
    std::visit([&](auto& m) { occlift::fit(m, train, val, c, on_epoch); }, model->model);
  });
}

// ---- evaluation -------------------------------------------------------------

occlift_status occlift_evaluate(occlift_model* model, const occlift_dataset* ds,
                                int split, int protocol, const char* scheme,
                                uint64_t seed, occlift_report** out) {
  return guarded([&] {
    require(model, "model");
    require(ds, "ds");
    require(scheme, "scheme");
    require(out, "out");
    const auto pairs = select(ds->ds, split);
    const auto parsed = occlift::parse_scheme(scheme);
    auto rep = std::visit(
        [&](auto& m) {
          return occlift::evaluate(m, pairs, ds->ds.action_names, protocol, parsed, seed);
        },
        model->model);
    *out = new occlift_report{std::move(rep)};
  });
}

occlift_status occlift_report_overall(const occlift_report* report, double* out_mm) {
  return guarded([&] {
    require(report, "report");
    require(out_mm, "out_mm");
    *out_mm = report->report.overall_mm;
  });
}

occlift_status occlift_report_json(const occlift_report* report, char** out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = dup_string(occlift::format_report_json(report->report));
  });
}

void occlift_report_free(occlift_report* report) { delete report; }

// ---- downstream quality -----------------------------------------------------

void occlift_classifier_options_default(occlift_classifier_options* opts) {
  if (opts == nullptr) return;
  const occlift::ClassifierConfig d;
  opts->size = d.size;
  opts->hidden = d.hidden;
  opts->epochs = d.epochs;
  opts->batch_size = d.batch_size;
  opts->learning_rate = d.learning_rate;
  opts->seed = 0;
}

occlift_status occlift_classifier_train(const occlift_dataset* ds,
                                        const occlift_classifier_options* opts,
                                        occlift_classifier** out) {
  return guarded([&] {
    require(ds, "ds");
    require(opts, "opts");
    require(out, "out");
    occlift::ClassifierConfig c;
    c.size = opts->size;
    c.hidden = opts->hidden;
    c.epochs = opts->epochs;
    c.batch_size = opts->batch_size;
    c.learning_rate = opts->learning_rate;
    c.seed = opts->seed;
    std::vector<const occlift::PoseSequence*> seqs;
    std::vector<int> labels;
    for (const auto* p : ds->ds.select(occlift::Split::kTrain)) {
      seqs.push_back(&p->pose3d);
      labels.push_back(p->label);
    }
    const auto samples = occlift::encode_all(seqs, labels, c.size);
    *out = new occlift_classifier{
        occlift::ActionClassifier::train(samples, ds->ds.n_classes(), c)};
  });
}

occlift_status occlift_classifier_accuracy_gt(const occlift_classifier* clf,
                                              const occlift_dataset* ds, int split,
                                              double* out) {
  return guarded([&] {
    require(clf, "clf");
    require(ds, "ds");
    require(out, "out");
    std::vector<const occlift::PoseSequence*> seqs;
    std::vector<int> labels;
    for (const auto* p : select(ds->ds, split)) {
      seqs.push_back(&p->pose3d);
      labels.push_back(p->label);
    }
    *out = clf->clf.accuracy(occlift::encode_all(seqs, labels, clf->clf.config().size));
  });
}

occlift_status occlift_classifier_accuracy_predicted(
    const occlift_classifier* clf, occlift_model* model, const occlift_dataset* ds,
    int split, const char* scheme, uint64_t seed, double* out) {
  return guarded([&] {
    require(clf, "clf");
    require(model, "model");
    require(ds, "ds");
    require(scheme, "scheme");
    require(out, "out");
    const auto pairs = select(ds->ds, split);
    const auto parsed = occlift::parse_scheme(scheme);
    const auto preds = std::visit(
        [&](auto& m) { return occlift::predict_all(m, pairs, parsed, seed); },
        model->model);
    std::vector<const occlift::PoseSequence*> seqs;
    std::vector<int> labels;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      seqs.push_back(&preds[i]);
      labels.push_back(pairs[i]->label);
    }
    *out = clf->clf.accuracy(occlift::encode_all(seqs, labels, clf->clf.config().size));
  });
}

occlift_status occlift_classifier_digest(const occlift_classifier* clf,
                                         uint64_t* out) {
  return guarded([&] {
    require(clf, "clf");
    require(out, "out");
    const auto params = clf->clf.flat_parameters();
    *out = fnv1a(kFnvOffset, params.data(), params.size() * sizeof(float));
  });
}

void occlift_classifier_free(occlift_classifier* clf) { delete clf; }

}  // extern "C"
