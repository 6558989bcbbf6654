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
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace occlift {

struct BodyPart {
  std::string name;
  std::vector<int> joints;
};

// Joint tree plus named part groups. Immutable once constructed; the
// constructor rejects anything that is not a single tree rooted at `root`.
class SkeletonTopology {
 public:
  SkeletonTopology(std::string name, std::vector<std::string> joint_names,
                   std::vector<int> parent, int root,
                   std::vector<BodyPart> body_parts,
                   std::vector<std::array<double, 3>> rest_offsets_mm = {});

  const std::string& name() const noexcept { return name_; }
  int n_joints() const noexcept { return static_cast<int>(parent_.size()); }
  int root() const noexcept { return root_; }
  int parent(int joint) const { return parent_.at(joint); }
  std::span<const int> parents() const noexcept { return parent_; }
  const std::vector<std::string>& joint_names() const noexcept {
    return joint_names_;
  }
  const std::vector<BodyPart>& body_parts() const noexcept {
    return body_parts_;
  }
  // Throws ErrorKind::kUnknownPart listing the valid names.
  const BodyPart& part(std::string_view name) const;

  bool has_bone_lengths() const noexcept { return !rest_offsets_.empty(); }
  // Offset of each joint from its parent in the rest pose (world frame, Y up).
  // Empty when the topology carries no anthropometry; the root entry is zero.
  std::span<const std::array<double, 3>> rest_offsets_mm() const noexcept {
    return rest_offsets_;
  }
  std::vector<double> bone_lengths_mm() const;

  // Joints ordered so that every parent precedes its children.
  const std::vector<int>& topological_order() const noexcept { return order_; }

 private:
  std::string name_;
  std::vector<std::string> joint_names_;
  std::vector<int> parent_;
  int root_;
  std::vector<BodyPart> body_parts_;
  std::vector<std::array<double, 3>> rest_offsets_;
  std::vector<int> order_;
};

// Registry of the built-in topologies: "h36m17", "sysu20", "ntu25".
// Throws ErrorKind::kUnknownTopology naming the valid choices.
const SkeletonTopology& get_topology(std::string_view name);
std::vector<std::string> topology_names();

enum class Units { kMillimeters, kPixels };

std::string_view units_name(Units u) noexcept;

// Frames of n_joints x dims coordinates, stored frame-major then joint-major.
class PoseSequence {
 public:
  PoseSequence(const SkeletonTopology& topology, int dims);
  PoseSequence(const SkeletonTopology& topology, int dims,
               std::vector<double> coords);

  const SkeletonTopology& topology() const noexcept { return *topology_; }
  int dims() const noexcept { return dims_; }
  int n_joints() const noexcept { return topology_->n_joints(); }
  int frames() const noexcept {
    return static_cast<int>(coords_.size() / frame_stride());
  }
  std::size_t frame_stride() const noexcept {
    return static_cast<std::size_t>(n_joints()) * dims_;
  }
  Units units() const noexcept {
    return dims_ == 3 ? Units::kMillimeters : Units::kPixels;
  }

  std::span<const double> frame(int f) const;
  std::span<double> frame(int f);
  double at(int f, int joint, int axis) const {
    return coords_[f * frame_stride() + joint * dims_ + axis];
  }
  double& at(int f, int joint, int axis) {
    return coords_[f * frame_stride() + joint * dims_ + axis];
  }
  std::span<const double> coords() const noexcept { return coords_; }

  // Appends one frame; throws kShapeMismatch / kNonFinite.
  void push_frame(std::span<const double> frame);

  // Throws when empty or when any coordinate is not finite.
  void validate() const;

  std::optional<double> fps;
  std::optional<std::string> action;
  std::optional<std::string> subject;

  friend bool operator==(const PoseSequence& a, const PoseSequence& b);

 private:
  const SkeletonTopology* topology_;
  int dims_;
  std::vector<double> coords_;
};

// Per-frame, per-joint detector confidence in [0, 1]. Values are clamped on
// construction.
class ConfidenceTrack {
 public:
  ConfidenceTrack(int n_joints, std::vector<double> values);

  int n_joints() const noexcept { return n_joints_; }
  int frames() const noexcept {
    return n_joints_ == 0 ? 0 : static_cast<int>(values_.size() / n_joints_);
  }
  double at(int f, int joint) const { return values_[f * n_joints_ + joint]; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  int n_joints_;
  std::vector<double> values_;
};

// Line-delimited JSON. First line:
//   {"schema":"poseseq/1","topology":..,"dims":..,"units":"mm"|"px",
//    "fps"?:..,"action"?:..,"subject"?:..}
// then one line per frame: [[x,y(,z)], ...] in topology joint order, numbers
// printed with 17 significant digits so reloading is bit-exact.
PoseSequence load_sequence(const std::filesystem::path& path);
void save_sequence(const PoseSequence& seq, const std::filesystem::path& path);
PoseSequence parse_sequence(std::string_view text);
std::string format_sequence(const PoseSequence& seq);

// Same framing with header {"schema":"poseconf/1","topology":..} and one
// array of n_joints confidences per line.
ConfidenceTrack load_confidence(const std::filesystem::path& path);
void save_confidence(const ConfidenceTrack& conf, const SkeletonTopology& topo,
                     const std::filesystem::path& path);

}  // namespace occlift
