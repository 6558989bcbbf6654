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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "occlift/dataset.hpp"
#include "occlift/lifter.hpp"
#include "occlift/occlusion.hpp"
#include "occlift/skeleton.hpp"

namespace occlift {

// Poses are flat joint-major spans of n_joints * 3 coordinates in mm.

// Root-aligned mean per-joint position error.
double mpjpe_p1(std::span<const double> pred, std::span<const double> gt,
                const SkeletonTopology& topology);

struct ProcrustesResult {
  std::vector<double> aligned;  // s * pred * R + t, same layout as pred
  double scale = 1.0;
  std::array<double, 9> rotation{};  // row-major, applied as row-vector * R
  std::array<double, 3> translation{};
  // Collinear or coincident input; the rotation is then not unique.
  bool degenerate = false;
};

// Similarity transform of pred onto gt, reflections excluded.
ProcrustesResult procrustes_align(std::span<const double> pred,
                                  std::span<const double> gt);

double mpjpe_p2(std::span<const double> pred, std::span<const double> gt,
                bool* degenerate = nullptr);

double mpjpe(int protocol, std::span<const double> pred,
             std::span<const double> gt, const SkeletonTopology& topology,
             bool* degenerate = nullptr);

std::vector<double> per_frame_errors(int protocol, const PoseSequence& pred,
                                     const PoseSequence& gt,
                                     int* degenerate_frames = nullptr);

struct ActionScore {
  std::string action;
  double mean_mm = 0.0;
  std::int64_t frames = 0;
};

struct SequenceScore {
  std::string id;
  std::string action;
  std::vector<double> frame_errors_mm;
};

struct EvalReport {
  int protocol = 1;
  std::string scheme = "none";
  int sequence_length = 0;  // receptive field f of the model
  std::vector<SequenceScore> sequences;
  std::vector<ActionScore> per_action;  // sorted by action name
  double overall_mm = 0.0;
  std::int64_t frames = 0;
  int degenerate_frames = 0;
};

// Aggregates per-sequence errors; the overall mean is frame-weighted.
EvalReport score_predictions(int protocol, const std::string& scheme,
                             int sequence_length,
                             std::vector<SequenceScore> sequences);

// Lifts every pair's 2D track; sequence i is masked with
// make_mask(scheme, derive_seed(seed, i), ...). Switches the model to eval mode.
template <typename T>
std::vector<PoseSequence> predict_all(LifterModel<T>& model,
                                      const std::vector<const LabeledPair*>& pairs,
                                      const OcclusionScheme& scheme,
                                      std::uint64_t seed);

template <typename T>
EvalReport evaluate(LifterModel<T>& model,
                    const std::vector<const LabeledPair*>& pairs,
                    const std::vector<std::string>& action_names, int protocol,
                    const OcclusionScheme& scheme, std::uint64_t seed);

std::string format_report_json(const EvalReport& report);
void save_report_json(const EvalReport& report, const std::filesystem::path& path);

// One row per label, one column per header entry.
struct TableRow {
  std::string label;
  std::vector<double> values;
};
std::string format_table_csv(const std::string& corner,
                             const std::vector<std::string>& columns,
                             const std::vector<TableRow>& rows);

}  // namespace occlift
