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

#include "occlift/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "occlift/error.hpp"

namespace occlift {

std::vector<const LabeledPair*> Dataset::select(Split split) const {
  std::vector<const LabeledPair*> out;
  for (const auto& item : items)
    if (item.split == split) out.push_back(&item);
  return out;
}

void check_alignment(const LabeledPair& pair) {
  if (pair.pose2d.dims() != 2 || pair.pose3d.dims() != 3)
    throw Error(ErrorKind::kShapeMismatch,
                pair.id + ": expected a 2D input and a 3D target");
  if (pair.pose2d.frames() != pair.pose3d.frames())
    throw Error(ErrorKind::kShapeMismatch,
                pair.id + ": 2D has " + std::to_string(pair.pose2d.frames()) +
                    " frames, 3D has " + std::to_string(pair.pose3d.frames()));
  if (pair.pose2d.topology().name() != pair.pose3d.topology().name())
    throw Error(ErrorKind::kShapeMismatch, pair.id + ": topology mismatch");
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "seq");
  nlohmann::ordered_json index;
  index["schema"] = "posedataset/1";
  index["topology"] = ds.topology;
  index["actions"] = ds.action_names;
  auto& items = index["sequences"] = nlohmann::json::array();
  for (const auto& item : ds.items) {
    check_alignment(item);
    const std::string f2 = "seq/" + item.id + ".2d.jsonl";
    const std::string f3 = "seq/" + item.id + ".3d.jsonl";
    save_sequence(item.pose2d, dir / f2);
    save_sequence(item.pose3d, dir / f3);
    nlohmann::ordered_json rec;
    rec["id"] = item.id;
    rec["label"] = item.label;
    rec["action"] = ds.action_names.at(item.label);
    rec["subject"] = item.subject;
    rec["split"] = item.split == Split::kTrain ? "train" : "test";
    rec["frames"] = item.pose3d.frames();
    rec["pose2d"] = f2;
    rec["pose3d"] = f3;
    items.push_back(std::move(rec));
  }
  std::ofstream out(dir / "dataset.json", std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write dataset index");
  out << index.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "dataset.json");
  if (!in)
    throw Error(ErrorKind::kIo,
                "no dataset.json in " + dir.string());
  nlohmann::json index;
  try {
    in >> index;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, "dataset.json: " + std::string(e.what()));
  }
  if (index.value("schema", "") != "posedataset/1")
    throw Error(ErrorKind::kParse, "dataset.json: unexpected schema");
  Dataset ds;
  ds.topology = index.at("topology").get<std::string>();
  ds.action_names = index.at("actions").get<std::vector<std::string>>();
  for (const auto& rec : index.at("sequences")) {
    LabeledPair pair{rec.at("id").get<std::string>(),
                     load_sequence(dir / rec.at("pose2d").get<std::string>()),
                     load_sequence(dir / rec.at("pose3d").get<std::string>()),
                     rec.at("label").get<int>(), rec.at("subject").get<int>(),
                     rec.at("split").get<std::string>() == "train"
                         ? Split::kTrain
                         : Split::kTest};
    check_alignment(pair);
    ds.items.push_back(std::move(pair));
  }
  return ds;
}

}  // namespace occlift
