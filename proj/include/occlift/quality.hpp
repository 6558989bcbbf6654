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
#include <span>
#include <vector>

#include "occlift/autodiff.hpp"
#include "occlift/skeleton.hpp"

namespace occlift {

// Subtracts the joint mean and divides by the Frobenius norm of the result
// (eps-guarded). Differences are taken against joint 0 first, so a translation
// that is exact in floating point leaves the output bit-identical.
std::vector<double> normalize_frame(std::span<const double> frame,
                                    double eps = 1e-8);

struct EncodedSample {
  int size = 0;                // S
  std::vector<double> pixels;  // [3][S][S]: channel, joint axis, frame axis
  int label = 0;

  double at(int c, int row, int col) const {
    return pixels[(static_cast<std::size_t>(c) * size + row) * size + col];
  }
};

// Joints x frames x xyz grid of normalized poses, min-max scaled to [0, 255]
// over the whole sample (zero range maps to 128), bilinearly resized to S x S.
EncodedSample encode(const PoseSequence& seq3d, int size = 224, int label = 0);

std::vector<EncodedSample> encode_all(const std::vector<const PoseSequence*>& seqs,
                                      const std::vector<int>& labels,
                                      int size = 224);

struct ClassifierConfig {
  int size = 224;
  int hidden = 48;
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double lr_decay_per_epoch = 0.95;
  std::uint64_t seed = 0;
};

// conv(3S->h, k3) BN Mish, conv(h->h, k3, dilation 2) BN Mish, global average
// pool, pointwise conv to class logits. The joint axis is folded into channels.
class ActionClassifier {
 public:
  // Throws kInvalidArgument when fewer than two classes are present.
  static ActionClassifier train(const std::vector<EncodedSample>& samples,
                                int n_classes, const ClassifierConfig& config);

  int n_classes() const noexcept { return n_classes_; }
  const ClassifierConfig& config() const noexcept { return config_; }
  std::int64_t parameter_count() const;
  std::vector<float> final_losses() const { return losses_; }

  int classify(const EncodedSample& sample) const;
  std::vector<int> classify(const std::vector<EncodedSample>& samples) const;
  double accuracy(const std::vector<EncodedSample>& samples) const;

  // Every parameter value in a fixed order, for reproducibility checks.
  std::vector<float> flat_parameters() const;

 private:
  struct Net {
    nn::Parameter<float> w1, b1, w2, b2, w3, b3;
    nn::BatchNorm1d<float> bn1, bn2;
  };
  nn::Var<float> forward(nn::Tape<float>& tape, nn::Tensor<float> input,
                         nn::Mode mode) const;
  std::vector<nn::Parameter<float>*> parameters() const;

  ClassifierConfig config_;
  int n_classes_ = 0;
  std::vector<float> losses_;
  // Mutable because the tape borrows parameters non-const; eval never writes.
  mutable Net net_;
};

}  // namespace occlift
