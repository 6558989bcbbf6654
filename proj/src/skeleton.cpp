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

#include "occlift/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "occlift/error.hpp"

namespace occlift {

namespace {

using Vec3 = std::array<double, 3>;

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

// Conventional 17-joint Human3.6M ordering, pelvis at index 0.
SkeletonTopology make_h36m17() {
  std::vector<std::string> names = {
      "Pelvis",    "RHip",      "RKnee",  "RAnkle",    "LHip",      "LKnee",
      "LAnkle",    "Spine",     "Thorax", "Neck",      "Head",      "LShoulder",
      "LElbow",    "LWrist",    "RShoulder", "RElbow", "RWrist"};
  std::vector<int> parent = {0, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14,
                             15};
  // Subject faces +Z with Y up, so the subject's left side is +X.
  std::vector<Vec3> offsets = {
      {0, 0, 0},      {-130, 0, 0},  {0, -450, 0}, {0, -440, 0},
      {130, 0, 0},    {0, -450, 0},  {0, -440, 0}, {0, 230, 0},
      {0, 250, 0},    {0, 115, 0},   {0, 115, 0},  {150, -10, 0},
      {0, -280, 0},   {0, -250, 0},  {-150, -10, 0}, {0, -280, 0},
      {0, -250, 0}};
  std::vector<BodyPart> parts = {
      {"LeftArm", {11, 12, 13}},
      {"RightLeg", {1, 2, 3}},
      {"Head", {10}},
      {"LowerBody", {2, 3, 5, 6}},
  };
  return SkeletonTopology("h36m17", std::move(names), std::move(parent), 0,
                          std::move(parts), std::move(offsets));
}

// Kinect v1 ordering.
SkeletonTopology make_sysu20() {
  std::vector<std::string> names = {
      "HipCenter",   "Spine",      "ShoulderCenter", "Head",
      "ShoulderLeft", "ElbowLeft", "WristLeft",      "HandLeft",
      "ShoulderRight", "ElbowRight", "WristRight",   "HandRight",
      "HipLeft",     "KneeLeft",   "AnkleLeft",      "FootLeft",
      "HipRight",    "KneeRight",  "AnkleRight",     "FootRight"};
  std::vector<int> parent = {0, 0, 1, 2, 2, 4, 5, 6, 2, 8,
                             9, 10, 0, 12, 13, 14, 0, 16, 17, 18};
  std::vector<Vec3> offsets = {
      {0, 0, 0},     {0, 200, 0},   {0, 250, 0},   {0, 180, 0},
      {170, -30, 0}, {0, -280, 0},  {0, -250, 0},  {0, -80, 0},
      {-170, -30, 0}, {0, -280, 0}, {0, -250, 0},  {0, -80, 0},
      {100, -60, 0}, {0, -420, 0},  {0, -420, 0},  {0, -50, 110},
      {-100, -60, 0}, {0, -420, 0}, {0, -420, 0},  {0, -50, 110}};
  std::vector<BodyPart> parts = {
      {"LeftArm", {4, 5, 6}},
      {"RightLeg", {16, 17, 18}},
      {"Head", {3}},
      {"LowerBody", {13, 14, 17, 18}},
  };
  return SkeletonTopology("sysu20", std::move(names), std::move(parent), 0,
                          std::move(parts), std::move(offsets));
}

// Kinect v2 ordering.
SkeletonTopology make_ntu25() {
  std::vector<std::string> names = {
      "SpineBase",    "SpineMid",    "Neck",         "Head",
      "ShoulderLeft", "ElbowLeft",   "WristLeft",    "HandLeft",
      "ShoulderRight", "ElbowRight", "WristRight",   "HandRight",
      "HipLeft",      "KneeLeft",    "AnkleLeft",    "FootLeft",
      "HipRight",     "KneeRight",   "AnkleRight",   "FootRight",
      "SpineShoulder", "HandTipLeft", "ThumbLeft",   "HandTipRight",
      "ThumbRight"};
  std::vector<int> parent = {0,  0,  20, 2,  20, 4,  5,  6, 20, 8, 9, 10, 0,
                             12, 13, 14, 0,  16, 17, 18, 1, 7,  7, 11, 11};
  std::vector<Vec3> offsets = {
      {0, 0, 0},      {0, 280, 0},   {0, 220, 0},   {0, 130, 0},
      {170, -40, 0},  {0, -280, 0},  {0, -250, 0},  {0, -80, 0},
      {-170, -40, 0}, {0, -280, 0},  {0, -250, 0},  {0, -80, 0},
      {100, -60, 0},  {0, -420, 0},  {0, -420, 0},  {0, -50, 110},
      {-100, -60, 0}, {0, -420, 0},  {0, -420, 0},  {0, -50, 110},
      {0, 200, 0},    {0, -70, 0},   {30, -40, 20}, {0, -70, 0},
      {-30, -40, 20}};
  std::vector<BodyPart> parts = {
      {"LeftArm", {4, 5, 6}},
      {"RightLeg", {16, 17, 18}},
      {"Head", {3}},
      {"LowerBody", {13, 14, 17, 18}},
  };
  return SkeletonTopology("ntu25", std::move(names), std::move(parent), 0,
                          std::move(parts), std::move(offsets));
}

const std::vector<SkeletonTopology>& registry() {
  static const std::vector<SkeletonTopology> topologies = [] {
    std::vector<SkeletonTopology> t;
    t.push_back(make_h36m17());
    t.push_back(make_sysu20());
    t.push_back(make_ntu25());
    return t;
  }();
  return topologies;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& msg) {
  throw Error(ErrorKind::kParse,
              "line " + std::to_string(line) + ": " + msg);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  // Trailing blank lines are tolerated.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

nlohmann::json parse_line(const std::string& line, std::size_t lineno) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    parse_fail(lineno, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

SkeletonTopology::SkeletonTopology(std::string name,
                                   std::vector<std::string> joint_names,
                                   std::vector<int> parent, int root,
                                   std::vector<BodyPart> body_parts,
                                   std::vector<std::array<double, 3>> rest)
    : name_(std::move(name)),
      joint_names_(std::move(joint_names)),
      parent_(std::move(parent)),
      root_(root),
      body_parts_(std::move(body_parts)),
      rest_offsets_(std::move(rest)) {
  const int n = static_cast<int>(parent_.size());
  if (n <= 0) throw Error(ErrorKind::kInvalidArgument, "topology has no joints");
  if (static_cast<int>(joint_names_.size()) != n)
    throw Error(ErrorKind::kInvalidArgument, "joint name count mismatch");
  if (root_ < 0 || root_ >= n || parent_[root_] != root_)
    throw Error(ErrorKind::kInvalidArgument, "root must be its own parent");
  if (!rest_offsets_.empty() && static_cast<int>(rest_offsets_.size()) != n)
    throw Error(ErrorKind::kInvalidArgument, "rest offset count mismatch");

  std::vector<int> depth(n, -1);
  depth[root_] = 0;
  for (int j = 0; j < n; ++j) {
    if (parent_[j] < 0 || parent_[j] >= n)
      throw Error(ErrorKind::kInvalidArgument,
                  "joint " + std::to_string(j) + " has invalid parent");
    if (j != root_ && parent_[j] == j)
      throw Error(ErrorKind::kInvalidArgument, "second root at joint " +
                                                   std::to_string(j));
    // Walking up must terminate at the root within n steps.
    int cur = j;
    int steps = 0;
    while (cur != root_) {
      cur = parent_[cur];
      if (++steps > n)
        throw Error(ErrorKind::kInvalidArgument,
                    "cycle through joint " + std::to_string(j));
    }
    depth[j] = steps;
  }
  order_.resize(n);
  for (int j = 0; j < n; ++j) order_[j] = j;
  std::stable_sort(order_.begin(), order_.end(),
                   [&](int a, int b) { return depth[a] < depth[b]; });

  for (const auto& part : body_parts_) {
    if (part.joints.empty())
      throw Error(ErrorKind::kInvalidArgument, "empty body part " + part.name);
    for (int j : part.joints)
      if (j < 0 || j >= n)
        throw Error(ErrorKind::kInvalidArgument,
                    "body part " + part.name + " index out of range");
  }
}

const BodyPart& SkeletonTopology::part(std::string_view name) const {
  for (const auto& p : body_parts_)
    if (p.name == name) return p;
  std::vector<std::string> valid;
  for (const auto& p : body_parts_) valid.push_back(p.name);
  throw Error(ErrorKind::kUnknownPart,
              "unknown body part '" + std::string(name) + "' for " + name_ +
                  " (valid: " + join(valid) + ")");
}

std::vector<double> SkeletonTopology::bone_lengths_mm() const {
  std::vector<double> out;
  out.reserve(rest_offsets_.size());
  for (const auto& o : rest_offsets_)
    out.push_back(std::sqrt(o[0] * o[0] + o[1] * o[1] + o[2] * o[2]));
  return out;
}

const SkeletonTopology& get_topology(std::string_view name) {
  for (const auto& t : registry())
    if (t.name() == name) return t;
  throw Error(ErrorKind::kUnknownTopology,
              "unknown topology '" + std::string(name) +
                  "' (valid: " + join(topology_names()) + ")");
}

std::vector<std::string> topology_names() {
  std::vector<std::string> names;
  for (const auto& t : registry()) names.push_back(t.name());
  return names;
}

std::string_view units_name(Units u) noexcept {
  return u == Units::kMillimeters ? "mm" : "px";
}

PoseSequence::PoseSequence(const SkeletonTopology& topology, int dims)
    : topology_(&topology), dims_(dims) {
  if (dims != 2 && dims != 3)
    throw Error(ErrorKind::kInvalidArgument, "dims must be 2 or 3");
}

PoseSequence::PoseSequence(const SkeletonTopology& topology, int dims,
                           std::vector<double> coords)
    : PoseSequence(topology, dims) {
  if (coords.size() % frame_stride() != 0)
    throw Error(ErrorKind::kShapeMismatch,
                "coordinate count is not a multiple of n_joints*dims");
  coords_ = std::move(coords);
  for (double v : coords_)
    if (!std::isfinite(v))
      throw Error(ErrorKind::kNonFinite, "non-finite coordinate");
}

std::span<const double> PoseSequence::frame(int f) const {
  return std::span<const double>(coords_).subspan(f * frame_stride(),
                                                  frame_stride());
}

std::span<double> PoseSequence::frame(int f) {
  return std::span<double>(coords_).subspan(f * frame_stride(),
                                            frame_stride());
}

void PoseSequence::push_frame(std::span<const double> frame) {
  if (frame.size() != frame_stride())
    throw Error(ErrorKind::kShapeMismatch,
                "frame " + std::to_string(frames()) + " has " +
                    std::to_string(frame.size()) + " values, expected " +
                    std::to_string(frame_stride()));
  for (double v : frame)
    if (!std::isfinite(v))
      throw Error(ErrorKind::kNonFinite,
                  "frame " + std::to_string(frames()) +
                      " has a non-finite coordinate");
  coords_.insert(coords_.end(), frame.begin(), frame.end());
}

void PoseSequence::validate() const {
  if (coords_.empty())
    throw Error(ErrorKind::kInvalidArgument,
                "sequence must contain at least one frame");
  for (std::size_t i = 0; i < coords_.size(); ++i)
    if (!std::isfinite(coords_[i]))
      throw Error(ErrorKind::kNonFinite,
                  "frame " + std::to_string(i / frame_stride()) +
                      " has a non-finite coordinate");
}

bool operator==(const PoseSequence& a, const PoseSequence& b) {
  return a.topology_->name() == b.topology_->name() && a.dims_ == b.dims_ &&
         a.coords_ == b.coords_ && a.fps == b.fps && a.action == b.action &&
         a.subject == b.subject;
}

ConfidenceTrack::ConfidenceTrack(int n_joints, std::vector<double> values)
    : n_joints_(n_joints), values_(std::move(values)) {
  if (n_joints <= 0 || values_.size() % n_joints != 0)
    throw Error(ErrorKind::kShapeMismatch,
                "confidence values are not a multiple of n_joints");
  for (double& v : values_) {
    if (std::isnan(v))
      throw Error(ErrorKind::kNonFinite, "NaN confidence value");
    v = std::clamp(v, 0.0, 1.0);
  }
}

std::string format_sequence(const PoseSequence& seq) {
  seq.validate();
  nlohmann::ordered_json header;
  header["schema"] = "poseseq/1";
  header["topology"] = seq.topology().name();
  header["dims"] = seq.dims();
  header["units"] = std::string(units_name(seq.units()));
  if (seq.fps) header["fps"] = *seq.fps;
  if (seq.action) header["action"] = *seq.action;
  if (seq.subject) header["subject"] = *seq.subject;

  std::string out = header.dump();
  out += '\n';
  for (int f = 0; f < seq.frames(); ++f) {
    nlohmann::json frame = nlohmann::json::array();
    for (int j = 0; j < seq.n_joints(); ++j) {
      nlohmann::json joint = nlohmann::json::array();
      for (int a = 0; a < seq.dims(); ++a) joint.push_back(seq.at(f, j, a));
      frame.push_back(std::move(joint));
    }
    out += frame.dump();
    out += '\n';
  }
  return out;
}

PoseSequence parse_sequence(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) parse_fail(1, "missing header record");
  const auto header = parse_line(lines[0], 1);
  if (!header.is_object() || header.value("schema", "") != "poseseq/1")
    parse_fail(1, "field 'schema': expected \"poseseq/1\"");
  if (!header.contains("topology") || !header["topology"].is_string())
    parse_fail(1, "field 'topology': missing or not a string");
  if (!header.contains("dims") || !header["dims"].is_number_integer())
    parse_fail(1, "field 'dims': missing or not an integer");

  const auto& topo = get_topology(header["topology"].get<std::string>());
  const int dims = header["dims"].get<int>();
  if (dims != 2 && dims != 3) parse_fail(1, "field 'dims': must be 2 or 3");
  PoseSequence seq(topo, dims);
  if (header.contains("units")) {
    const auto units = header["units"].get<std::string>();
    if (units != units_name(seq.units()))
      parse_fail(1, "field 'units': '" + units + "' does not match dims " +
                        std::to_string(dims));
  }
  if (header.contains("fps")) seq.fps = header["fps"].get<double>();
  if (header.contains("action"))
    seq.action = header["action"].get<std::string>();
  if (header.contains("subject"))
    seq.subject = header["subject"].get<std::string>();

  std::vector<double> frame(seq.frame_stride());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    const int f = static_cast<int>(i - 1);
    const auto rec = parse_line(lines[i], lineno);
    if (!rec.is_array())
      parse_fail(lineno, "frame " + std::to_string(f) + ": expected array");
    if (static_cast<int>(rec.size()) != topo.n_joints())
      throw Error(ErrorKind::kShapeMismatch,
                  "line " + std::to_string(lineno) + ": frame " +
                      std::to_string(f) + " has " + std::to_string(rec.size()) +
                      " joints, expected " + std::to_string(topo.n_joints()));
    for (int j = 0; j < topo.n_joints(); ++j) {
      const auto& joint = rec[j];
      if (!joint.is_array() || static_cast<int>(joint.size()) != dims)
        throw Error(ErrorKind::kShapeMismatch,
                    "line " + std::to_string(lineno) + ": frame " +
                        std::to_string(f) + " joint " + std::to_string(j) +
                        " does not have " + std::to_string(dims) +
                        " coordinates");
      for (int a = 0; a < dims; ++a) {
        if (!joint[a].is_number())
          parse_fail(lineno, "frame " + std::to_string(f) + " joint " +
                                 std::to_string(j) + ": non-numeric value");
        const double v = joint[a].get<double>();
        if (!std::isfinite(v))
          throw Error(ErrorKind::kNonFinite,
                      "line " + std::to_string(lineno) + ": frame " +
                          std::to_string(f) + " has a non-finite value");
        frame[j * dims + a] = v;
      }
    }
    seq.push_frame(frame);
  }
  seq.validate();
  return seq;
}

PoseSequence load_sequence(const std::filesystem::path& path) {
  try {
    return parse_sequence(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void save_sequence(const PoseSequence& seq, const std::filesystem::path& path) {
  write_file(path, format_sequence(seq));
}

ConfidenceTrack load_confidence(const std::filesystem::path& path) {
  const auto lines = split_lines(read_file(path));
  if (lines.empty()) parse_fail(1, "missing header record");
  const auto header = parse_line(lines[0], 1);
  if (!header.is_object() || header.value("schema", "") != "poseconf/1")
    parse_fail(1, "field 'schema': expected \"poseconf/1\"");
  const auto& topo = get_topology(header.value("topology", ""));
  std::vector<double> values;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto rec = parse_line(lines[i], i + 1);
    if (!rec.is_array() || static_cast<int>(rec.size()) != topo.n_joints())
      throw Error(ErrorKind::kShapeMismatch,
                  "line " + std::to_string(i + 1) + ": frame " +
                      std::to_string(i - 1) + " does not have " +
                      std::to_string(topo.n_joints()) + " confidences");
    for (const auto& v : rec) {
      if (!v.is_number()) parse_fail(i + 1, "non-numeric confidence");
      values.push_back(v.get<double>());
    }
  }
  return ConfidenceTrack(topo.n_joints(), std::move(values));
}

void save_confidence(const ConfidenceTrack& conf, const SkeletonTopology& topo,
                     const std::filesystem::path& path) {
  if (conf.n_joints() != topo.n_joints())
    throw Error(ErrorKind::kShapeMismatch, "confidence/topology joint count");
  nlohmann::ordered_json header;
  header["schema"] = "poseconf/1";
  header["topology"] = topo.name();
  std::string out = header.dump() + "\n";
  for (int f = 0; f < conf.frames(); ++f) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < conf.n_joints(); ++j) row.push_back(conf.at(f, j));
    out += row.dump() + "\n";
  }
  write_file(path, out);
}

}  // namespace occlift
