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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "occlift/autodiff.hpp"
#include "occlift/dataset.hpp"
#include "occlift/lifter.hpp"

namespace occlift {

struct AugmentationPolicy {
  bool enabled = true;
  double p_apply = 0.5;
  int k_max = -1;  // -1 resolves to n_joints - 1
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double lr_decay_per_epoch = 0.95;
  int batch_size = 8;       // windows per optimizer step
  int window_frames = 64;   // predicted frames per window
  int epochs = 20;
  std::uint64_t seed = 0;
  AugmentationPolicy augmentation;
  int precision = 32;  // 32 or 64; selects the model scalar type

  // Throws kInvalidArgument; k_max is checked against n_joints.
  void validate(int n_joints) const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss_mm = 0.0;
  std::optional<double> val_mpjpe_p1_mm;
  double wall_seconds = 0.0;
};

std::string format_epoch_record(const EpochRecord& r);

// Mean per-joint Euclidean distance over a batch of poses (flat, n_joints*3 each).
double pose_loss(std::span<const double> pred, std::span<const double> gt,
                 int n_joints);

template <typename T>
class Adam {
 public:
  Adam(std::vector<nn::Parameter<T>*> params, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step(double lr);
  std::int64_t steps() const noexcept { return t_; }

 private:
  std::vector<nn::Parameter<T>*> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains in place. Aborts with kNumeric on a non-finite loss.
template <typename T>
std::vector<EpochRecord> fit(LifterModel<T>& model,
                             const std::vector<const LabeledPair*>& train,
                             const std::vector<const LabeledPair*>& val,
                             const TrainConfig& config,
                             const EpochCallback& on_epoch = {});

}  // namespace occlift
