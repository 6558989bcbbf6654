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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "occlift/skeleton.hpp"

namespace occlift {

struct RandomK {
  int k = 0;
};
struct BodyPartOcclusion {
  std::string part;
};
struct FrameBlackout {
  int t = 1;
  int start = -1;  // first blacked-out frame; -1 draws it from the seed
};
struct NoOcclusion {};

using OcclusionScheme =
    std::variant<NoOcclusion, RandomK, BodyPartOcclusion, FrameBlackout>;

// "none", "random_k:4", "body_part:LowerBody", "blackout:3@17"
std::string describe(const OcclusionScheme& scheme);
OcclusionScheme parse_scheme(const std::string& text);

// frames x n_joints availability grid; true means the joint is observed.
class OcclusionMask {
 public:
  OcclusionMask(int frames, int n_joints, std::uint64_t seed,
                OcclusionScheme scheme);

  static OcclusionMask all_present(int frames, int n_joints);

  int frames() const noexcept { return frames_; }
  int n_joints() const noexcept { return n_joints_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const OcclusionScheme& scheme() const noexcept { return scheme_; }

  bool present(int f, int joint) const {
    return present_[static_cast<std::size_t>(f) * n_joints_ + joint] != 0;
  }
  void set(int f, int joint, bool value) {
    present_[static_cast<std::size_t>(f) * n_joints_ + joint] = value ? 1 : 0;
  }
  int missing_in_frame(int f) const;
  const std::vector<std::uint8_t>& bits() const noexcept { return present_; }

  friend bool operator==(const OcclusionMask& a, const OcclusionMask& b) {
    return a.frames_ == b.frames_ && a.n_joints_ == b.n_joints_ &&
           a.present_ == b.present_;
  }

 private:
  int frames_;
  int n_joints_;
  std::uint64_t seed_;
  OcclusionScheme scheme_;
  std::vector<std::uint8_t> present_;
};

// Each frame independently hides k joints chosen uniformly without
// replacement: a partial Fisher-Yates shuffle of 0..n-1 whose first k slots
// are masked, drawing below(n - i) for slot i from one SplitMix64(seed)
// stream consumed frame by frame.
OcclusionMask random_k_mask(std::uint64_t seed, int frames,
                            const SkeletonTopology& topology, int k);

OcclusionMask body_part_mask(int frames, const SkeletonTopology& topology,
                             const std::string& part);

// One run of t all-missing frames. The start is SplitMix64(seed).below(
// frames - t + 1) unless `start` is given.
OcclusionMask frame_blackout_mask(std::uint64_t seed, int frames,
                                  const SkeletonTopology& topology, int t,
                                  std::optional<int> start = std::nullopt);

// Dispatches on the scheme; NoOcclusion yields an all-present mask.
OcclusionMask make_mask(const OcclusionScheme& scheme, std::uint64_t seed,
                        int frames, const SkeletonTopology& topology);

// Header {"schema":"occmask/1","scheme":..,"seed":..,"frames":..,
// "n_joints":..} followed by one row of '0'/'1' characters per frame.
std::string format_mask(const OcclusionMask& mask);
OcclusionMask parse_mask(const std::string& text);
void save_mask(const OcclusionMask& mask, const std::filesystem::path& path);
OcclusionMask load_mask(const std::filesystem::path& path);

enum class GuidanceMode { kBinary, kConfidence };

// Network input for a run of frames. Per frame, per joint, four channels:
// (x*ind, y*ind, m_x, m_y), where ind is 1 when m is nonzero and 0 otherwise.
// In binary mode m is the mask bit; in confidence mode it is the detector
// confidence, forced to 0 for joints the mask hides.
struct GuidedWindow {
  static constexpr int kChannelsPerJoint = 4;

  GuidanceMode mode = GuidanceMode::kBinary;
  int frames = 0;
  int n_joints = 0;
  std::vector<double> channels;  // frames x (n_joints * 4)

  int channel_count() const noexcept { return n_joints * kChannelsPerJoint; }
  double at(int f, int channel) const {
    return channels[static_cast<std::size_t>(f) * channel_count() + channel];
  }
};

GuidedWindow apply_guidance(const PoseSequence& seq2d,
                            const OcclusionMask& mask,
                            const ConfidenceTrack* confidence = nullptr);

}  // namespace occlift
