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
#include <memory>
#include <string>
#include <vector>

#include "occlift/autodiff.hpp"
#include "occlift/occlusion.hpp"
#include "occlift/skeleton.hpp"

namespace occlift {

struct LifterConfig {
  std::string topology = "h36m17";
  int in_dims_per_joint = 4;  // 4 = coordinates + guidance, 2 = baseline
  int channels = 1024;
  int blocks = 4;
  int kernel = 3;
  int dilation_base = 3;
  double dropout_rate = 0.25;
  // Observed pixel coordinates enter the network as (u - center) / scale;
  // hidden joints stay exactly 0. A scale well below the image half-width
  // keeps coordinates large next to the 0/1 indicator channels, which would
  // otherwise dominate the first layer.
  double pixel_center_x = 500.0;
  double pixel_center_y = 500.0;
  double pixel_scale = 50.0;
  // Raw network outputs are multiplied by this to give millimetres.
  double output_scale_mm = 1000.0;

  bool guided() const noexcept { return in_dims_per_joint == 4; }
  // Throws kInvalidArgument.
  void validate() const;

  friend bool operator==(const LifterConfig&, const LifterConfig&) = default;
};

// Input frames that influence one output frame:
// kernel + sum_{b=1..blocks} (kernel - 1) * dilation_base^b.
int receptive_field(const LifterConfig& config);

// Closed-form trainable parameter counts (conv weights and biases plus the
// BN scale/shift; running statistics are buffers, not parameters).
std::int64_t block_parameter_count(const LifterConfig& config);
std::int64_t parameter_count(const LifterConfig& config);

// Residual dilated temporal CNN:
//   input:  conv(n_p*in_dims -> C, K, dilation 1) + BN + Mish + dropout
//   block b (b = 1..blocks):
//           conv(C -> C, K, dilation base^b) + BN + Mish + dropout
//           conv(C -> C, 1) + BN + Mish + dropout
//           + center-cropped skip from the block input
//   output: conv(C -> n_p*3, 1), scaled to mm
//
// Initialization draws each parameter tensor from its own SplitMix64 stream
// derive_seed(seed, index): hidden conv weights U(+-sqrt(6 / fan_in)), the
// output conv weights U(+-1 / sqrt(fan_in)), all biases 0, BN gamma 1 and
// beta 0.
template <typename T>
class LifterModel {
 public:
  static LifterModel build(const LifterConfig& config, std::uint64_t seed);

  const LifterConfig& config() const noexcept { return config_; }
  const SkeletonTopology& topology() const { return get_topology(config_.topology); }
  int receptive_field() const { return occlift::receptive_field(config_); }

  nn::Mode mode() const noexcept { return mode_; }
  void set_mode(nn::Mode mode) noexcept { mode_ = mode; }

  // Ordered: input conv, input BN, per block conv1, bn1, conv2, bn2, output.
  std::vector<nn::Parameter<T>*> parameters();
  std::vector<const nn::Parameter<T>*> parameters() const;
  std::vector<nn::BatchNorm1d<T>*> batchnorms();
  std::vector<const nn::BatchNorm1d<T>*> batchnorms() const;
  std::int64_t enumerated_parameter_count() const;

  // input: [N, n_p*in_dims, L] -> [N, n_p*3, L - receptive_field + 1] (mm).
  // Each dropout layer i uses derive_seed(dropout_seed, i).
  nn::Var<T> forward(nn::Tape<T>& tape, nn::Var<T> input,
                     std::uint64_t dropout_seed = 0);

 private:
  struct Conv {
    nn::Parameter<T> weight;
    nn::Parameter<T> bias;
    int dilation = 1;
  };
  struct Unit {
    Conv conv;
    nn::BatchNorm1d<T> bn;
  };
  struct Block {
    Unit dilated;
    Unit pointwise;
  };

  LifterConfig config_;
  nn::Mode mode_ = nn::Mode::kEval;
  Unit input_;
  std::vector<Block> blocks_;
  Conv output_;
};

extern template class LifterModel<float>;
extern template class LifterModel<double>;

// Network input for frames [first, first + length) of a guided window,
// [n_p*in_dims, length]. Per joint the channels are the normalized
// (x, y, m_x, m_y), or just (x, y) for the baseline.
template <typename T>
nn::Tensor<T> network_input(const LifterConfig& config,
                            const GuidedWindow& window, int first, int length);

// Guided window padded at both ends by replicating the first and last frame
// `pad` times (mask and confidence channels included).
GuidedWindow replicate_edges(const GuidedWindow& window, int pad);

// Central-frame prediction for a window of f >= receptive_field frames (f
// odd). Returns n_p*3 values in mm.
template <typename T>
std::vector<double> forward(LifterModel<T>& model, const GuidedWindow& window);

// One root-relative 3D pose per input frame (camera frame, mm). Boundary
// frames see edge-replicated context. Uses eval mode.
template <typename T>
PoseSequence predict_sequence(LifterModel<T>& model, const PoseSequence& seq2d,
                              const OcclusionMask& mask,
                              const ConfidenceTrack* confidence = nullptr);

// Checkpoint: one JSON header line
//   {"schema":"t3dckpt/1","dtype":"f32"|"f64","config":{...},
//    "tensors":[{"name":..,"shape":[..]}, ...]}
// followed by the tensors' raw little-endian values in header order
// (parameters, then BN running mean/var).
template <typename T>
void save_checkpoint(const LifterModel<T>& model,
                     const std::filesystem::path& path);
template <typename T>
LifterModel<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace occlift
