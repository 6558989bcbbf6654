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
#include <string>
#include <vector>

#include "occlift/dataset.hpp"
#include "occlift/skeleton.hpp"

namespace occlift::synth {

struct Harmonic {
  double amplitude = 0.0;  // rad for joint angles, mm for root translation
  double frequency_hz = 0.0;
  double phase = 0.0;
};

// offset + sum_h amplitude_h * sin(2 pi frequency_h t + phase_h)
struct Trajectory {
  double offset = 0.0;
  std::vector<Harmonic> harmonics;

  double at(double t_seconds) const;
  // |offset| + sum |amplitude|: the largest value the trajectory can reach.
  double bound() const;
};

// Joint angle tracks are local XYZ Euler angles (rad) rotating the bone that
// ends at the joint. Each angle trajectory's bound() must not exceed
// kMaxJointAngle, which keeps limbs from folding through the torso.
struct ActionSpec {
  static constexpr double kMaxJointAngle = 1.2;
  static constexpr double kMaxRootTranslation = 400.0;  // mm, per axis

  std::string action_id;
  std::vector<std::array<Trajectory, 3>> joint_angles;  // per joint
  std::array<Trajectory, 3> root_translation_mm;
  Trajectory root_yaw;

  // Throws kInvalidArgument when a bound is violated or the joint count does
  // not match the topology.
  void validate(const SkeletonTopology& topology) const;
};

// Class template for action `index`: 3-5 harmonics per angle drawn from a
// class-specific frequency band, a class-specific subset of strongly moving
// joints and a class-specific static posture offset.
ActionSpec random_action_spec(std::uint64_t seed,
                              const SkeletonTopology& topology, int index);

// All-zero trajectories: the rest pose, standing still.
ActionSpec still_action(const SkeletonTopology& topology);

// Per-recording variation drawn from the seed: global bone scale in
// [0.92, 1.08], amplitude scale in [0.85, 1.15], phase shifts, heading
// offset in [-pi/4, pi/4] and a floor position offset within +-300 mm.
// World frame is Y up; the subject faces +Z at yaw 0.
PoseSequence generate(std::uint64_t seed, const SkeletonTopology& topology,
                      const ActionSpec& action, int frames, double fps);

struct Camera {
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 500.0;
  double cy = 500.0;
  // X_cam = rotation * X_world + translation (row-major 3x3).
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> translation{0, 0, 0};

  // 4.5 m in front of the subject, looking back along -Z, image 1000x1000.
  static Camera default_camera();
};

PoseSequence to_camera_frame(const Camera& camera, const PoseSequence& world);

// u = fx X/Z + cx, v = fy Y/Z + cy on camera-frame coordinates. Throws
// kNumeric naming the frame and joint when Z <= 0.
PoseSequence project(const Camera& camera, const PoseSequence& world);

struct DatasetOptions {
  int n_actions = 8;
  int sequences_per_action = 25;
  int frames = 300;
  double fps = 50.0;
  int n_subjects = 10;  // subjects [0, n/2) train, the rest test
  Camera camera = Camera::default_camera();
};

// Sequence s of action a is recorded by subject s % n_subjects. The 3D
// targets are stored in the camera frame.
Dataset make_dataset(std::uint64_t seed, const SkeletonTopology& topology,
                     const DatasetOptions& options);

}  // namespace occlift::synth
