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

#include "occlift/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "occlift/error.hpp"
#include "occlift/rng.hpp"

namespace occlift::synth {

namespace {

using Mat3 = std::array<double, 9>;
using Vec3 = std::array<double, 3>;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return c;
}

Vec3 rotate(const Mat3& r, const Vec3& v) {
  return {r[0] * v[0] + r[1] * v[1] + r[2] * v[2],
          r[3] * v[0] + r[4] * v[1] + r[5] * v[2],
          r[6] * v[0] + r[7] * v[1] + r[8] * v[2]};
}

// Rz * Ry * Rx
Mat3 euler_xyz(double ax, double ay, double az) {
  const double cx = std::cos(ax), sx = std::sin(ax);
  const double cy = std::cos(ay), sy = std::sin(ay);
  const double cz = std::cos(az), sz = std::sin(az);
  const Mat3 rx{1, 0, 0, 0, cx, -sx, 0, sx, cx};
  const Mat3 ry{cy, 0, sy, 0, 1, 0, -sy, 0, cy};
  const Mat3 rz{cz, -sz, 0, sz, cz, 0, 0, 0, 1};
  return matmul(rz, matmul(ry, rx));
}

Mat3 yaw(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {c, 0, s, 0, 1, 0, -s, 0, c};
}

Trajectory random_trajectory(SplitMix64& rng, double budget, double offset,
                             double base_hz) {
  Trajectory tr;
  tr.offset = offset;
  const int n = 3 + static_cast<int>(rng.below(3));
  // Split the remaining amplitude budget with decreasing weights.
  std::vector<double> w(n);
  double wsum = 0.0;
  for (int h = 0; h < n; ++h) {
    w[h] = rng.uniform(0.5, 1.0) / (h + 1);
    wsum += w[h];
  }
  for (int h = 0; h < n; ++h)
    tr.harmonics.push_back(
        {budget * w[h] / wsum, base_hz * (h + 1), rng.uniform(0.0, kTwoPi)});
  return tr;
}

}  // namespace

double Trajectory::at(double t) const {
  double v = offset;
  for (const auto& h : harmonics)
    v += h.amplitude * std::sin(kTwoPi * h.frequency_hz * t + h.phase);
  return v;
}

double Trajectory::bound() const {
  double b = std::abs(offset);
  for (const auto& h : harmonics) b += std::abs(h.amplitude);
  return b;
}

void ActionSpec::validate(const SkeletonTopology& topology) const {
  if (static_cast<int>(joint_angles.size()) != topology.n_joints())
    throw Error(ErrorKind::kInvalidArgument,
                "action " + action_id + " has " +
                    std::to_string(joint_angles.size()) + " joint tracks, " +
                    topology.name() + " has " +
                    std::to_string(topology.n_joints()));
  for (std::size_t j = 0; j < joint_angles.size(); ++j)
    for (const auto& tr : joint_angles[j])
      if (tr.bound() > kMaxJointAngle + 1e-12)
        throw Error(ErrorKind::kInvalidArgument,
                    "action " + action_id + ": joint " + std::to_string(j) +
                        " angle bound exceeds " +
                        std::to_string(kMaxJointAngle) + " rad");
  for (const auto& tr : root_translation_mm)
    if (tr.bound() > kMaxRootTranslation + 1e-9)
      throw Error(ErrorKind::kInvalidArgument,
                  "action " + action_id + ": root translation bound exceeded");
}

ActionSpec still_action(const SkeletonTopology& topology) {
  ActionSpec spec;
  spec.action_id = "still";
  spec.joint_angles.resize(topology.n_joints());
  return spec;
}

ActionSpec random_action_spec(std::uint64_t seed,
                              const SkeletonTopology& topology, int index) {
  SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  char id[32];
  std::snprintf(id, sizeof(id), "action%02d", index);
  ActionSpec spec = still_action(topology);
  spec.action_id = id;

  // Frequency band: 0.3 .. 1.5 Hz base, distinct per class draw.
  const double base_hz = rng.uniform(0.3, 1.5);
  const int n = topology.n_joints();
  for (int j = 0; j < n; ++j) {
    if (j == topology.root()) continue;
    // Bones hanging off the root (hips, lower spine) move only a little.
    const bool near_root = topology.parent(j) == topology.root();
    const bool active = !near_root && rng.uniform() < 0.45;
    for (int axis = 0; axis < 3; ++axis) {
      double offset, budget;
      if (active) {
        // 0.45 + 1.15 * 0.6 stays under kMaxJointAngle after the
        // per-recording amplitude scale in generate().
        offset = rng.uniform(-0.45, 0.45);
        budget = rng.uniform(0.25, 0.6);
      } else {
        offset = rng.uniform(-0.12, 0.12);
        budget = rng.uniform(0.0, near_root ? 0.04 : 0.1);
      }
      const double jitter_hz = base_hz * rng.uniform(0.9, 1.1);
      spec.joint_angles[j][axis] =
          random_trajectory(rng, budget, offset, jitter_hz);
    }
  }
  const double sway = rng.uniform(20.0, 150.0);
  spec.root_translation_mm[0] = random_trajectory(rng, sway, 0.0, base_hz * 0.5);
  spec.root_translation_mm[1] = random_trajectory(rng, sway * 0.3, 0.0, base_hz);
  spec.root_translation_mm[2] = random_trajectory(rng, sway, 0.0, base_hz * 0.5);
  spec.root_yaw = random_trajectory(rng, rng.uniform(0.0, 0.4), 0.0,
                                    base_hz * 0.25);
  spec.validate(topology);
  return spec;
}

PoseSequence generate(std::uint64_t seed, const SkeletonTopology& topology,
                      const ActionSpec& action, int frames, double fps) {
  if (!topology.has_bone_lengths())
    throw Error(ErrorKind::kInvalidArgument,
                "topology " + topology.name() + " has no bone lengths");
  if (frames < 1 || !(fps > 0.0))
    throw Error(ErrorKind::kInvalidArgument, "frames and fps must be positive");
  action.validate(topology);

  SplitMix64 rng(seed);
  const double bone_scale = rng.uniform(0.92, 1.08);
  const double amp_scale = rng.uniform(0.85, 1.15);
  const double phase_shift = rng.uniform(0.0, kTwoPi);
  const double heading = rng.uniform(-std::numbers::pi / 4, std::numbers::pi / 4);
  const Vec3 floor_offset{rng.uniform(-300.0, 300.0), 0.0,
                          rng.uniform(-300.0, 300.0)};

  auto eval = [&](const Trajectory& tr, double t) {
    double v = tr.offset;
    for (const auto& h : tr.harmonics)
      v += amp_scale * h.amplitude *
           std::sin(kTwoPi * h.frequency_hz * t + h.phase + phase_shift);
    return v;
  };

  const int n = topology.n_joints();
  const auto offsets = topology.rest_offsets_mm();
  const auto& order = topology.topological_order();
  PoseSequence seq(topology, 3);
  seq.fps = fps;
  seq.action = action.action_id;
  std::vector<Mat3> global(n);
  std::vector<Vec3> pos(n);
  std::vector<double> frame(static_cast<std::size_t>(n) * 3);
  for (int f = 0; f < frames; ++f) {
    const double t = f / fps;
    const int root = topology.root();
    global[root] = yaw(heading + eval(action.root_yaw, t));
    for (int a = 0; a < 3; ++a)
      pos[root][a] = floor_offset[a] + eval(action.root_translation_mm[a], t);
    for (int j : order) {
      if (j == root) continue;
      const auto& tr = action.joint_angles[j];
      global[j] = matmul(global[topology.parent(j)],
                         euler_xyz(eval(tr[0], t), eval(tr[1], t),
                                   eval(tr[2], t)));
      const Vec3 bone{offsets[j][0] * bone_scale, offsets[j][1] * bone_scale,
                      offsets[j][2] * bone_scale};
      const Vec3 d = rotate(global[j], bone);
      const Vec3& p = pos[topology.parent(j)];
      pos[j] = {p[0] + d[0], p[1] + d[1], p[2] + d[2]};
    }
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < 3; ++a) frame[j * 3 + a] = pos[j][a];
    seq.push_frame(frame);
  }
  return seq;
}

Camera Camera::default_camera() {
  Camera cam;
  cam.rotation = {1, 0, 0, 0, -1, 0, 0, 0, -1};
  cam.translation = {0, 0, 4500};
  return cam;
}

PoseSequence to_camera_frame(const Camera& camera, const PoseSequence& world) {
  if (world.dims() != 3)
    throw Error(ErrorKind::kShapeMismatch, "camera transform needs 3D poses");
  PoseSequence out(world.topology(), 3);
  out.fps = world.fps;
  out.action = world.action;
  out.subject = world.subject;
  std::vector<double> frame(world.frame_stride());
  for (int f = 0; f < world.frames(); ++f) {
    for (int j = 0; j < world.n_joints(); ++j) {
      const Vec3 p = rotate(camera.rotation, {world.at(f, j, 0), world.at(f, j, 1),
                                             world.at(f, j, 2)});
      for (int a = 0; a < 3; ++a) frame[j * 3 + a] = p[a] + camera.translation[a];
    }
    out.push_frame(frame);
  }
  return out;
}

PoseSequence project(const Camera& camera, const PoseSequence& world) {
  if (!(camera.fx > 0.0) || !(camera.fy > 0.0))
    throw Error(ErrorKind::kInvalidArgument, "focal length must be positive");
  const PoseSequence cam = to_camera_frame(camera, world);
  PoseSequence out(world.topology(), 2);
  out.fps = world.fps;
  out.action = world.action;
  out.subject = world.subject;
  std::vector<double> frame(static_cast<std::size_t>(world.n_joints()) * 2);
  for (int f = 0; f < cam.frames(); ++f) {
    for (int j = 0; j < cam.n_joints(); ++j) {
      const double z = cam.at(f, j, 2);
      if (!(z > 0.0))
        throw Error(ErrorKind::kNumeric,
                    "non-positive depth at frame " + std::to_string(f) +
                        ", joint " + std::to_string(j));
      frame[j * 2 + 0] = camera.fx * cam.at(f, j, 0) / z + camera.cx;
      frame[j * 2 + 1] = camera.fy * cam.at(f, j, 1) / z + camera.cy;
    }
    out.push_frame(frame);
  }
  return out;
}

Dataset make_dataset(std::uint64_t seed, const SkeletonTopology& topology,
                     const DatasetOptions& opt) {
  if (opt.n_actions < 2)
    throw Error(ErrorKind::kInvalidArgument, "need at least two actions");
  if (opt.sequences_per_action < 1 || opt.frames < 1 || opt.n_subjects < 2)
    throw Error(ErrorKind::kInvalidArgument, "bad dataset dimensions");
  Dataset ds;
  ds.topology = topology.name();
  std::vector<ActionSpec> specs;
  for (int a = 0; a < opt.n_actions; ++a) {
    specs.push_back(random_action_spec(derive_seed(seed, 0xAC710Eu), topology, a));
    ds.action_names.push_back(specs.back().action_id);
  }
  const int train_subjects = opt.n_subjects / 2;
  for (int a = 0; a < opt.n_actions; ++a) {
    for (int s = 0; s < opt.sequences_per_action; ++s) {
      const auto index =
          static_cast<std::uint64_t>(a) * opt.sequences_per_action + s;
      const int subject = s % opt.n_subjects;
      char id[48];
      std::snprintf(id, sizeof(id), "a%02d_s%02d_r%03d", a, subject, s);
      PoseSequence world =
          generate(derive_seed(seed, index), topology, specs[a], opt.frames,
                   opt.fps);
      world.subject = "S" + std::to_string(subject);
      PoseSequence cam3d = to_camera_frame(opt.camera, world);
      PoseSequence cam2d = project(opt.camera, world);
      ds.items.push_back(LabeledPair{
          id, std::move(cam2d), std::move(cam3d), a, subject,
          subject < train_subjects ? Split::kTrain : Split::kTest});
    }
  }
  return ds;
}

}  // namespace occlift::synth
