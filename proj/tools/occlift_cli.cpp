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

// occlift command line front end. Talks to the library only through the C API.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "occlift/occlift.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Failure {
  occlift_status status;
  std::string message;
};

void check(occlift_status s) {
  if (s != OCCLIFT_OK) throw Failure{s, occlift_last_error()};
}

[[noreturn]] void usage(const std::string& msg) {
  throw Failure{OCCLIFT_ERR_INVALID_ARGUMENT, msg};
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Dataset = Handle<occlift_dataset, occlift_dataset_free>;
using Model = Handle<occlift_model, occlift_model_free>;
using Report = Handle<occlift_report, occlift_report_free>;
using Mask = Handle<occlift_mask, occlift_mask_free>;
using Classifier = Handle<occlift_classifier, occlift_classifier_free>;

std::string take_string(char* s) {
  std::string out(s);
  occlift_string_free(s);
  return out;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) usage(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force)
        usage("output directory " + dir.string() + " is not empty (use --force)");
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Failure{OCCLIFT_ERR_IO, "cannot write " + path.string()};
}

// One manifest per output directory; timestamps are the only varying fields.
class Manifest {
 public:
  Manifest(std::string command, int argc, char** argv) {
    j_["command"] = std::move(command);
    j_["tool_version"] = occlift_version();
    auto& a = j_["argv"] = json::array();
    for (int i = 1; i < argc; ++i) a.push_back(argv[i]);
    j_["config"] = json::object();
    j_["seeds"] = json::object();
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
    j_["started_at"] = utc_now();
    start_ = std::chrono::steady_clock::now();
  }
  json& config() { return j_["config"]; }
  json& seeds() { return j_["seeds"]; }
  void input(const std::string& p) { j_["inputs"].push_back(p); }
  void output(const std::string& p) { j_["outputs"].push_back(p); }
  void write(const fs::path& dir) {
    j_["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_text(dir / "manifest.json", j_.dump(2) + "\n");
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

// ---- occlusion level lists shared by eval and quality -----------------------

// Comma lists are taken as raw text and split here: CLI11 silently drops
// empty items and turns "" into 0, both of which should be usage errors.
std::vector<std::string> split_list(const std::string& text, const std::string& flag) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = text.find(',', pos);
    std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                   : comma - pos);
    if (item.empty()) usage(flag + " needs a non-empty comma-separated list");
    out.push_back(std::move(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<int> int_list(const std::string& text, const std::string& flag) {
  std::vector<int> out;
  for (const auto& item : split_list(text, flag)) {
    int v = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || end != item.data() + item.size())
      usage(flag + ": '" + item + "' is not an integer");
    out.push_back(v);
  }
  return out;
}

struct LevelOptions {
  std::string scheme = "random";
  std::string k, t, parts;
};

void add_level_options(CLI::App* cmd, LevelOptions& o) {
  cmd->add_option("--scheme", o.scheme, "random | part | blackout | none")
      ->check(CLI::IsMember({"random", "part", "blackout", "none"}));
  cmd->add_option("--k", o.k, "hidden joints per frame, comma list (random)");
  cmd->add_option("--t", o.t, "blacked-out frames, comma list (blackout)");
  cmd->add_option("--part", o.parts, "body part names, comma list (part)");
}

struct Level {
  std::string column;  // table header
  std::string scheme;  // library scheme string
};

std::vector<Level> resolve_levels(const LevelOptions& o) {
  std::vector<Level> out;
  if (o.scheme == "random") {
    for (int k : int_list(o.k, "--k")) out.push_back({"k" + std::to_string(k), "random_k:" + std::to_string(k)});
  } else if (o.scheme == "blackout") {
    for (int t : int_list(o.t, "--t")) out.push_back({"t" + std::to_string(t), "blackout:" + std::to_string(t)});
  } else if (o.scheme == "part") {
    for (const auto& p : split_list(o.parts, "--part")) out.push_back({p, "body_part:" + p});
  } else {
    out.push_back({"none", "none"});
  }
  return out;
}

struct Checkpoint {
  std::string label;
  fs::path path;
};

std::vector<Checkpoint> resolve_checkpoints(const std::vector<std::string>& args) {
  if (args.empty()) usage("at least one --ckpt is required");
  std::vector<Checkpoint> out;
  for (const auto& a : args) {
    fs::path p(a);
    if (fs::is_directory(p)) p /= "model.ckpt";
    fs::path label_src = fs::path(a);
    if (!label_src.has_filename()) label_src = label_src.parent_path();
    std::string label = fs::is_directory(a) ? label_src.filename().string()
                                            : p.stem().string();
    out.push_back({label, p});
  }
  return out;
}

int parse_split(const std::string& s) {
  if (s == "train") return OCCLIFT_SPLIT_TRAIN;
  if (s == "test") return OCCLIFT_SPLIT_TEST;
  if (s == "all") return OCCLIFT_SPLIT_ALL;
  usage("unknown split " + s);
}

// ---- training options shared by train and sweep-seqlen ----------------------

struct TrainArgs {
  bool guided = false;
  bool baseline = false;
  occlift_model_config model{};
  occlift_train_options train{};
  bool no_augment = false;
  bool no_validate = false;
  std::uint64_t init_seed = 0;
};

void add_train_options(CLI::App* cmd, TrainArgs& a) {
  occlift_model_config_default(&a.model);
  occlift_train_options_default(&a.train);
  auto* g = cmd->add_flag("--guided", a.guided, "coordinates + occlusion indicators (default)");
  auto* b = cmd->add_flag("--baseline", a.baseline, "coordinates only, no guidance");
  g->excludes(b);
  cmd->add_option("--channels", a.model.channels)->capture_default_str();
  cmd->add_option("--blocks", a.model.blocks)->capture_default_str();
  cmd->add_option("--kernel", a.model.kernel)->capture_default_str();
  cmd->add_option("--dilation-base", a.model.dilation_base)->capture_default_str();
  cmd->add_option("--dropout", a.model.dropout_rate)->capture_default_str();
  cmd->add_option("--precision", a.model.precision)->check(CLI::IsMember({32, 64}));
  cmd->add_option("--epochs", a.train.epochs)->capture_default_str();
  cmd->add_option("--batch-size", a.train.batch_size, "windows per step")->capture_default_str();
  cmd->add_option("--window", a.train.window_frames, "predicted frames per window")
      ->capture_default_str();
  cmd->add_option("--lr", a.train.learning_rate)->capture_default_str();
  cmd->add_option("--lr-decay", a.train.lr_decay_per_epoch)->capture_default_str();
  cmd->add_option("--p-apply", a.train.p_apply)->capture_default_str();
  cmd->add_option("--k-max", a.train.k_max, "-1 = joints - 1")->capture_default_str();
  cmd->add_flag("--no-augment", a.no_augment, "disable training-time occlusion");
  cmd->add_flag("--no-validate", a.no_validate, "skip per-epoch test-split scoring");
}

json train_config_json(const TrainArgs& a, const char* topology) {
  json j;
  j["topology"] = topology;
  j["guided"] = a.model.guided != 0;
  j["channels"] = a.model.channels;
  j["blocks"] = a.model.blocks;
  j["kernel"] = a.model.kernel;
  j["dilation_base"] = a.model.dilation_base;
  j["dropout_rate"] = a.model.dropout_rate;
  j["precision"] = a.model.precision;
  j["epochs"] = a.train.epochs;
  j["batch_size"] = a.train.batch_size;
  j["window_frames"] = a.train.window_frames;
  j["learning_rate"] = a.train.learning_rate;
  j["lr_decay_per_epoch"] = a.train.lr_decay_per_epoch;
  j["augmentation"] = a.train.augment
                          ? json{{"type", "random_k_uniform"},
                                 {"p_apply", a.train.p_apply},
                                 {"k_max", a.train.k_max}}
                          : json{{"type", "none"}};
  j["validate"] = a.train.validate != 0;
  return j;
}

void finalize_train_args(TrainArgs& a, std::uint64_t seed, const char* topology) {
  a.model.guided = a.baseline ? 0 : 1;
  a.model.topology = topology;
  a.train.augment = a.no_augment ? 0 : 1;
  a.train.validate = a.no_validate ? 0 : 1;
  a.train.seed = seed;
  a.init_seed = seed;
}

struct LogSink {
  std::ofstream* file;
  bool echo;
};

void on_epoch(const char* record, void* user) {
  auto* sink = static_cast<LogSink*>(user);
  *sink->file << record << '\n';
  sink->file->flush();
  if (sink->echo) std::cerr << record << '\n';
}

// ---- commands -----------------------------------------------------------------

struct Common {
  std::string out;
  bool force = false;
  std::uint64_t seed = 0;
  bool quiet = false;
};

int run(int argc, char** argv) {
  CLI::App app{"occlift: occlusion-guided 3D pose lifting toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(occlift_version()));

  Common common;
  auto add_common = [&](CLI::App* cmd, bool needs_out = true) {
    auto* o = cmd->add_option("--out", common.out, "output directory");
    if (needs_out) o->required();
    cmd->add_flag("--force", common.force, "replace a non-empty output directory");
    cmd->add_option("--seed", common.seed)->capture_default_str();
    cmd->add_flag("--quiet", common.quiet);
  };

  // synth
  occlift_synth_options so{};
  occlift_synth_options_default(&so);
  std::string topology = "h36m17";
  auto* synth = app.add_subcommand("synth", "generate a synthetic paired dataset");
  synth->add_option("--topology", topology)->capture_default_str();
  synth->add_option("--actions", so.actions)->capture_default_str();
  synth->add_option("--per-action", so.per_action)->capture_default_str();
  synth->add_option("--frames", so.frames)->capture_default_str();
  synth->add_option("--fps", so.fps)->capture_default_str();
  synth->add_option("--subjects", so.subjects)->capture_default_str();
  add_common(synth);

  // train
  TrainArgs ta;
  std::string data;
  auto* train = app.add_subcommand("train", "train a lifter on a dataset");
  train->add_option("--data", data)->required();
  add_train_options(train, ta);
  add_common(train);

  // eval
  std::vector<std::string> ckpts;
  LevelOptions levels;
  int protocol = 1;
  std::string split = "test";
  auto* eval = app.add_subcommand("eval", "MPJPE under an occlusion sweep");
  eval->add_option("--ckpt", ckpts, "checkpoint file or training directory (repeatable)");
  eval->add_option("--data", data)->required();
  add_level_options(eval, levels);
  eval->add_option("--protocol", protocol)->check(CLI::IsMember({1, 2}));
  eval->add_option("--split", split)->capture_default_str();
  add_common(eval);

  // sweep-seqlen
  TrainArgs sa;
  std::string blocks_text;
  auto* sweep = app.add_subcommand("sweep-seqlen", "MPJPE versus receptive field");
  sweep->add_option("--data", data)->required();
  sweep->add_option("--blocks-list", blocks_text, "comma list of block counts")
      ->required();
  add_train_options(sweep, sa);
  sweep->add_option("--protocol", protocol)->check(CLI::IsMember({1, 2}));
  sweep->add_option("--k", levels.k, "hidden joints per frame, comma list")->required();
  add_common(sweep);

  // quality
  occlift_classifier_options co{};
  occlift_classifier_options_default(&co);
  LevelOptions qlevels;
  auto* quality = app.add_subcommand("quality", "action accuracy on lifted poses");
  quality->add_option("--ckpt", ckpts, "checkpoint file or training directory (repeatable)");
  quality->add_option("--data", data)->required();
  add_level_options(quality, qlevels);
  quality->add_option("--size", co.size, "encoded image side")->capture_default_str();
  quality->add_option("--hidden", co.hidden)->capture_default_str();
  quality->add_option("--epochs", co.epochs)->capture_default_str();
  quality->add_option("--batch-size", co.batch_size)->capture_default_str();
  quality->add_option("--lr", co.learning_rate)->capture_default_str();
  add_common(quality);

  // mask
  std::string scheme_text;
  int frames = 300;
  auto* mask = app.add_subcommand("mask", "write one occlusion mask file");
  mask->add_option("--scheme", scheme_text, "e.g. random_k:4, body_part:LeftArm, blackout:3")
      ->required();
  mask->add_option("--topology", topology)->capture_default_str();
  mask->add_option("--frames", frames)->capture_default_str();
  add_common(mask);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const fs::path out_dir(common.out);
  const bool echo = !common.quiet;

  if (synth->parsed()) {
    so.topology = topology.c_str();
    so.seed = common.seed;
    prepare_out_dir(out_dir, common.force);
    Manifest man("synth", argc, argv);
    Dataset ds;
    check(occlift_dataset_synthesize(&so, ds.out()));
    check(occlift_dataset_save(ds.get(), out_dir.string().c_str()));
    man.config() = {{"topology", topology}, {"actions", so.actions},
                    {"per_action", so.per_action}, {"frames", so.frames},
                    {"fps", so.fps}, {"subjects", so.subjects}};
    man.seeds()["dataset"] = common.seed;
    man.output("dataset.json");
    man.output("seq/");
    man.write(out_dir);
    std::size_t n = 0;
    check(occlift_dataset_count(ds.get(), OCCLIFT_SPLIT_ALL, &n));
    if (echo) std::cout << "wrote " << n << " sequence pairs to " << out_dir.string() << "\n";
    return 0;
  }

  if (train->parsed()) {
    Dataset ds;
    check(occlift_dataset_load(data.c_str(), ds.out()));
    finalize_train_args(ta, common.seed, occlift_dataset_topology(ds.get()));
    prepare_out_dir(out_dir, common.force);
    Manifest man("train", argc, argv);
    man.config() = train_config_json(ta, occlift_dataset_topology(ds.get()));
    man.seeds()["init"] = ta.init_seed;
    man.seeds()["train"] = ta.train.seed;
    man.input(data);
    Model model;
    check(occlift_model_create(&ta.model, ta.init_seed, model.out()));
    std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
    LogSink sink{&log, echo};
    check(occlift_model_train(model.get(), ds.get(), &ta.train, on_epoch, &sink));
    check(occlift_model_save(model.get(), (out_dir / "model.ckpt").string().c_str()));
    std::uint64_t digest = 0;
    check(occlift_model_digest(model.get(), &digest));
    man.config()["parameter_digest"] = digest;
    man.output("model.ckpt");
    man.output("train_log.jsonl");
    man.write(out_dir);
    return 0;
  }

  if (eval->parsed()) {
    const auto lv = resolve_levels(levels);
    const auto cks = resolve_checkpoints(ckpts);
    Dataset ds;
    check(occlift_dataset_load(data.c_str(), ds.out()));
    prepare_out_dir(out_dir, common.force);
    Manifest man("eval", argc, argv);
    man.config() = {{"scheme", levels.scheme}, {"protocol", protocol}, {"split", split}};
    man.seeds()["mask"] = common.seed;
    man.input(data);
    std::ostringstream csv;
    csv << "model";
    for (const auto& l : lv) csv << ',' << l.column;
    csv << '\n';
    for (const auto& c : cks) {
      man.input(c.path.string());
      Model model;
      check(occlift_model_load(c.path.string().c_str(), model.out()));
      csv << c.label;
      for (const auto& l : lv) {
        Report rep;
        check(occlift_evaluate(model.get(), ds.get(), parse_split(split), protocol,
                               l.scheme.c_str(), common.seed, rep.out()));
        double mm = 0.0;
        check(occlift_report_overall(rep.get(), &mm));
        char* text = nullptr;
        check(occlift_report_json(rep.get(), &text));
        const std::string name = "report_" + c.label + "_" + l.column + ".json";
        write_text(out_dir / name, take_string(text));
        man.output(name);
        csv << ',' << fmt(mm);
        if (echo) std::cerr << c.label << ' ' << l.scheme << ' ' << fmt(mm) << " mm\n";
      }
      csv << '\n';
    }
    write_text(out_dir / "mpjpe.csv", csv.str());
    man.output("mpjpe.csv");
    man.write(out_dir);
    if (echo) std::cout << csv.str();
    return 0;
  }

  if (sweep->parsed()) {
    const auto ks = int_list(levels.k, "--k");
    const auto blocks_list = int_list(blocks_text, "--blocks-list");
    Dataset ds;
    check(occlift_dataset_load(data.c_str(), ds.out()));
    std::size_t n_test = 0;
    check(occlift_dataset_count(ds.get(), OCCLIFT_SPLIT_TEST, &n_test));
    if (n_test == 0)
      throw Failure{OCCLIFT_ERR_INVALID_ARGUMENT, "dataset has no test sequences"};
    finalize_train_args(sa, common.seed, occlift_dataset_topology(ds.get()));
    prepare_out_dir(out_dir, common.force);
    Manifest man("sweep-seqlen", argc, argv);
    man.config() = train_config_json(sa, occlift_dataset_topology(ds.get()));
    man.config()["blocks_list"] = blocks_list;
    man.config()["k"] = ks;
    man.config()["protocol"] = protocol;
    man.seeds()["init"] = sa.init_seed;
    man.seeds()["train"] = sa.train.seed;
    man.seeds()["mask"] = common.seed;
    man.input(data);
    std::ostringstream csv;
    csv << "blocks,receptive_field,k,mpjpe_mm\n";
    for (int b : blocks_list) {
      auto cfg = sa.model;
      cfg.blocks = b;
      Model model;
      check(occlift_model_create(&cfg, sa.init_seed, model.out()));
      std::ofstream log(out_dir / ("train_log_b" + std::to_string(b) + ".jsonl"),
                        std::ios::trunc);
      LogSink sink{&log, echo};
      check(occlift_model_train(model.get(), ds.get(), &sa.train, on_epoch, &sink));
      man.output("train_log_b" + std::to_string(b) + ".jsonl");
      int rf = 0;
      check(occlift_model_receptive_field(model.get(), &rf));
      for (int k : ks) {
        Report rep;
        const std::string scheme = "random_k:" + std::to_string(k);
        check(occlift_evaluate(model.get(), ds.get(), OCCLIFT_SPLIT_TEST, protocol,
                               scheme.c_str(), common.seed, rep.out()));
        double mm = 0.0;
        check(occlift_report_overall(rep.get(), &mm));
        csv << b << ',' << rf << ',' << k << ',' << fmt(mm) << '\n';
      }
    }
    write_text(out_dir / "seqlen.csv", csv.str());
    man.output("seqlen.csv");
    man.write(out_dir);
    if (echo) std::cout << csv.str();
    return 0;
  }

  if (quality->parsed()) {
    const auto lv = resolve_levels(qlevels);
    const auto cks = resolve_checkpoints(ckpts);
    co.seed = common.seed;
    Dataset ds;
    check(occlift_dataset_load(data.c_str(), ds.out()));
    prepare_out_dir(out_dir, common.force);
    Manifest man("quality", argc, argv);
    man.config() = {{"scheme", qlevels.scheme}, {"size", co.size}, {"hidden", co.hidden},
                    {"epochs", co.epochs}, {"batch_size", co.batch_size},
                    {"learning_rate", co.learning_rate}};
    man.seeds()["classifier"] = co.seed;
    man.seeds()["mask"] = common.seed;
    man.input(data);
    Classifier clf;
    check(occlift_classifier_train(ds.get(), &co, clf.out()));
    double gt_acc = 0.0;
    check(occlift_classifier_accuracy_gt(clf.get(), ds.get(), OCCLIFT_SPLIT_TEST, &gt_acc));
    std::ostringstream csv;
    csv << "level,source,accuracy\n";
    csv << "none,ground_truth," << fmt(gt_acc) << '\n';
    for (const auto& c : cks) {
      man.input(c.path.string());
      Model model;
      check(occlift_model_load(c.path.string().c_str(), model.out()));
      for (const auto& l : lv) {
        double acc = 0.0;
        check(occlift_classifier_accuracy_predicted(clf.get(), model.get(), ds.get(),
                                                    OCCLIFT_SPLIT_TEST, l.scheme.c_str(),
                                                    common.seed, &acc));
        csv << l.column << ',' << c.label << ',' << fmt(acc) << '\n';
      }
    }
    write_text(out_dir / "accuracy.csv", csv.str());
    man.output("accuracy.csv");
    man.write(out_dir);
    if (echo) std::cout << csv.str();
    return 0;
  }

  if (mask->parsed()) {
    prepare_out_dir(out_dir, common.force);
    Manifest man("mask", argc, argv);
    man.config() = {{"scheme", scheme_text}, {"topology", topology}, {"frames", frames}};
    man.seeds()["mask"] = common.seed;
    Mask m;
    check(occlift_mask_create(scheme_text.c_str(), topology.c_str(), frames, common.seed,
                              m.out()));
    check(occlift_mask_save(m.get(), (out_dir / "mask.txt").string().c_str()));
    man.output("mask.txt");
    man.write(out_dir);
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Failure& f) {
    std::cerr << "error[" << occlift_status_name(f.status) << "]: " << f.message << "\n";
    return f.status == OCCLIFT_ERR_INVALID_ARGUMENT ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
}
