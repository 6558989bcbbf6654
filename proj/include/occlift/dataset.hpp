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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "occlift/skeleton.hpp"

namespace occlift {

enum class Split { kTrain, kTest };

// One recording: 2D observations aligned frame-for-frame with 3D ground
// truth (camera frame, mm).
struct LabeledPair {
  std::string id;
  PoseSequence pose2d;
  PoseSequence pose3d;
  int label = 0;
  int subject = 0;
  Split split = Split::kTrain;
};

struct Dataset {
  std::string topology;
  std::vector<std::string> action_names;
  std::vector<LabeledPair> items;

  std::vector<const LabeledPair*> select(Split split) const;
  int n_classes() const { return static_cast<int>(action_names.size()); }
};

// Throws kShapeMismatch when a pair is not aligned frame-for-frame.
void check_alignment(const LabeledPair& pair);

// Directory layout: dataset.json listing every pair plus
// seq/<id>.2d.jsonl and seq/<id>.3d.jsonl in the canonical sequence format.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace occlift
