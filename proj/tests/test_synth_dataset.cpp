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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <vector>

#include "occlift/dataset.hpp"
#include "occlift/error.hpp"
#include "occlift/synth.hpp"

using namespace occlift;

namespace {

double bone(const PoseSequence& s, int f, int a, int b) {
  double acc = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double v = s.at(f, a, d) - s.at(f, b, d);
    acc += v * v;
  }
  return std::sqrt(acc);
}

// Independent of the library's quality module: root-relative, centered,
// unit Frobenius norm, averaged over the sequence into one descriptor.
std::vector<double> descriptor(const PoseSequence& s) {
  const int n = s.n_joints();
  std::vector<double> out(static_cast<std::size_t>(n) * 3, 0.0);
  for (int f = 0; f < s.frames(); ++f) {
    std::vector<double> p(static_cast<std::size_t>(n) * 3);
    double mean[3] = {0, 0, 0};
    for (int j = 0; j < n; ++j)
      for (int d = 0; d < 3; ++d) {
        p[j * 3 + d] = s.at(f, j, d) - s.at(f, 0, d);
        mean[d] += p[j * 3 + d] / n;
      }
    double norm = 0.0;
    for (int j = 0; j < n; ++j)
      for (int d = 0; d < 3; ++d) {
        p[j * 3 + d] -= mean[d];
        norm += p[j * 3 + d] * p[j * 3 + d];
      }
    norm = std::sqrt(norm) + 1e-12;
    for (std::size_t i = 0; i < p.size(); ++i)
      out[i] += std::abs(p[i] / norm) / s.frames();
  }
  return out;
}

}  // namespace

TEST_CASE("forward kinematics keeps bone lengths constant") {
  const auto& topo = get_topology("h36m17");
  for (int a = 0; a < 4; ++a) {
    const auto spec = synth::random_action_spec(77, topo, a);
    const auto seq = synth::generate(1000 + a, topo, spec, 300, 50.0);
    REQUIRE(seq.frames() == 300);
    REQUIRE(seq.dims() == 3);
    for (int j = 0; j < topo.n_joints(); ++j) {
      if (j == topo.root()) continue;
      const double ref = bone(seq, 0, j, topo.parent(j));
      CHECK(ref > 0.0);
      for (int f = 1; f < 300; ++f)
        REQUIRE(std::abs(bone(seq, f, j, topo.parent(j)) - ref) < 1e-9);
    }
  }
}

TEST_CASE("generation is deterministic and seed dependent") {
  const auto& topo = get_topology("h36m17");
  const auto spec = synth::random_action_spec(5, topo, 2);
  const auto a = synth::generate(9, topo, spec, 120, 50.0);
  const auto b = synth::generate(9, topo, spec, 120, 50.0);
  const auto c = synth::generate(10, topo, spec, 120, 50.0);
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("still action repeats one pose") {
  for (const auto& name : topology_names()) {
    const auto& topo = get_topology(name);
    const auto seq = synth::generate(3, topo, synth::still_action(topo), 20, 50.0);
    for (int f = 1; f < 20; ++f)
      for (std::size_t i = 0; i < seq.frame_stride(); ++i)
        REQUIRE(seq.frame(f)[i] == seq.frame(0)[i]);
  }
}

TEST_CASE("action specs respect the documented bounds") {
  const auto& topo = get_topology("h36m17");
  for (int a = 0; a < 8; ++a) {
    const auto spec = synth::random_action_spec(11, topo, a);
    CHECK_NOTHROW(spec.validate(topo));
    for (const auto& track : spec.joint_angles)
      for (const auto& t : track)
        CHECK(t.bound() <= synth::ActionSpec::kMaxJointAngle + 1e-12);
  }
  auto bad = synth::still_action(topo);
  bad.joint_angles[3][0].offset = 2.0;
  CHECK_THROWS_AS(bad.validate(topo), Error);
}

TEST_CASE("pinhole projection") {
  const auto& topo = get_topology("h36m17");
  synth::Camera cam;
  cam.fx = cam.fy = 1000.0;
  cam.cx = cam.cy = 0.0;
  PoseSequence world(topo, 3);
  std::vector<double> frame(51);
  for (int j = 0; j < 17; ++j) {
    frame[j * 3 + 0] = j == 1 ? 100.0 : 0.0;
    frame[j * 3 + 1] = j == 2 ? -40.0 : 0.0;
    frame[j * 3 + 2] = 1000.0;
  }
  world.push_frame(frame);
  for (int j = 0; j < 17; ++j) frame[j * 3 + 2] = 2000.0;
  world.push_frame(frame);
  const auto px = synth::project(cam, world);
  CHECK(px.dims() == 2);
  CHECK(px.at(0, 0, 0) == 0.0);
  CHECK(px.at(0, 0, 1) == 0.0);
  CHECK(px.at(0, 1, 0) == doctest::Approx(100.0).epsilon(1e-15));
  CHECK(px.at(0, 2, 1) == doctest::Approx(-40.0).epsilon(1e-15));
  CHECK(px.at(1, 1, 0) == doctest::Approx(50.0).epsilon(1e-15));
  CHECK(px.at(1, 2, 1) == doctest::Approx(-20.0).epsilon(1e-15));

  frame[5 * 3 + 2] = -1.0;
  PoseSequence behind(topo, 3);
  behind.push_frame(frame);
  try {
    synth::project(cam, behind);
    FAIL("expected a depth error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
    const std::string msg = e.what();
    CHECK(msg.find("frame 0") != std::string::npos);
    CHECK(msg.find("joint 5") != std::string::npos);
  }
}

TEST_CASE("default dataset shape, split and frustum") {
  const auto& topo = get_topology("h36m17");
  const auto ds = synth::make_dataset(11, topo, {});
  CHECK(ds.items.size() == 200);
  CHECK(ds.n_classes() == 8);
  std::set<int> train_subjects, test_subjects;
  std::set<std::string> ids;
  for (const auto& it : ds.items) {
    check_alignment(it);
    CHECK(it.pose2d.frames() == 300);
    ids.insert(it.id);
    (it.split == Split::kTrain ? train_subjects : test_subjects).insert(it.subject);
    for (int f = 0; f < it.pose2d.frames(); ++f)
      for (int j = 0; j < 17; ++j) {
        REQUIRE(it.pose3d.at(f, j, 2) > 0.0);
        const double u = it.pose2d.at(f, j, 0), v = it.pose2d.at(f, j, 1);
        REQUIRE((u >= 0.0 && u <= 1000.0 && v >= 0.0 && v <= 1000.0));
      }
  }
  CHECK(ids.size() == 200);
  CHECK_FALSE(train_subjects.empty());
  CHECK_FALSE(test_subjects.empty());
  for (int s : train_subjects) CHECK(test_subjects.count(s) == 0);
  CHECK(ds.select(Split::kTrain).size() + ds.select(Split::kTest).size() == 200);

  const auto again = synth::make_dataset(11, topo, {});
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    REQUIRE(ds.items[i].pose2d == again.items[i].pose2d);
    REQUIRE(ds.items[i].pose3d == again.items[i].pose3d);
  }
  synth::DatasetOptions one;
  one.n_actions = 1;
  CHECK_THROWS_AS(synth::make_dataset(1, topo, one), Error);
}

TEST_CASE("classes are separable by a nearest centroid rule") {
  const auto& topo = get_topology("h36m17");
  synth::DatasetOptions opt;
  opt.frames = 100;
  opt.sequences_per_action = 10;
  const auto ds = synth::make_dataset(4, topo, opt);
  const int c = ds.n_classes();
  std::vector<std::vector<double>> centroid(c, std::vector<double>(51, 0.0));
  std::vector<int> count(c, 0);
  for (const auto* it : ds.select(Split::kTrain)) {
    const auto d = descriptor(it->pose3d);
    for (std::size_t i = 0; i < d.size(); ++i) centroid[it->label][i] += d[i];
    ++count[it->label];
  }
  for (int k = 0; k < c; ++k)
    for (auto& v : centroid[k]) v /= std::max(count[k], 1);
  int correct = 0, total = 0;
  for (const auto* it : ds.select(Split::kTest)) {
    const auto d = descriptor(it->pose3d);
    int best = 0;
    double best_dist = 1e300;
    for (int k = 0; k < c; ++k) {
      double dist = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i)
        dist += (d[i] - centroid[k][i]) * (d[i] - centroid[k][i]);
      if (dist < best_dist) best_dist = dist, best = k;
    }
    correct += best == it->label;
    ++total;
  }
  const double acc = static_cast<double>(correct) / total;
  MESSAGE("nearest-centroid accuracy " << acc);
  CHECK(acc > 2.0 / c);
}

TEST_CASE("dataset directory round trip") {
  const auto& topo = get_topology("sysu20");
  synth::DatasetOptions opt;
  opt.n_actions = 3;
  opt.sequences_per_action = 2;
  opt.frames = 12;
  const auto ds = synth::make_dataset(8, topo, opt);
  const auto dir = std::filesystem::temp_directory_path() / "occlift_test_ds";
  std::filesystem::remove_all(dir);
  save_dataset(ds, dir);
  const auto back = load_dataset(dir);
  CHECK(back.topology == "sysu20");
  CHECK(back.action_names == ds.action_names);
  REQUIRE(back.items.size() == ds.items.size());
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    CHECK(back.items[i].id == ds.items[i].id);
    CHECK(back.items[i].label == ds.items[i].label);
    CHECK(back.items[i].subject == ds.items[i].subject);
    CHECK(back.items[i].split == ds.items[i].split);
    CHECK(back.items[i].pose2d == ds.items[i].pose2d);
    CHECK(back.items[i].pose3d == ds.items[i].pose3d);
  }
  CHECK_THROWS_AS(load_dataset(dir / "nope"), Error);
}
