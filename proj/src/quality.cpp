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

#include "occlift/quality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "occlift/error.hpp"
#include "occlift/parallel.hpp"
#include "occlift/rng.hpp"

namespace occlift {

std::vector<double> normalize_frame(std::span<const double> frame, double eps) {
  if (frame.empty() || frame.size() % 3 != 0)
    throw Error(ErrorKind::kShapeMismatch, "normalize_frame: need n_joints * 3 values");
  const std::size_t n = frame.size() / 3;
  std::vector<double> out(frame.size());
  double mean[3] = {0, 0, 0};
  for (std::size_t j = 0; j < n; ++j)
    for (int a = 0; a < 3; ++a) {
      out[j * 3 + a] = frame[j * 3 + a] - frame[a];
      mean[a] += out[j * 3 + a];
    }
  for (double& m : mean) m /= static_cast<double>(n);
  double sq = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    for (int a = 0; a < 3; ++a) {
      out[j * 3 + a] -= mean[a];
      sq += out[j * 3 + a] * out[j * 3 + a];
    }
  const double sigma = std::sqrt(sq);
  if (sigma <= eps) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  for (double& v : out) v /= sigma;
  return out;
}

EncodedSample encode(const PoseSequence& seq3d, int size, int label) {
  if (seq3d.dims() != 3)
    throw Error(ErrorKind::kShapeMismatch, "encode needs a 3D sequence");
  if (seq3d.frames() < 1)
    throw Error(ErrorKind::kInvalidArgument, "encode needs at least one frame");
  if (size < 1) throw Error(ErrorKind::kInvalidArgument, "encode size must be >= 1");
  const int rows = seq3d.n_joints();
  const int cols = seq3d.frames();
  // grid[c][joint][frame]
  std::vector<double> grid(static_cast<std::size_t>(3) * rows * cols);
  double lo = INFINITY, hi = -INFINITY;
  for (int f = 0; f < cols; ++f) {
    const auto norm = normalize_frame(seq3d.frame(f));
    for (int j = 0; j < rows; ++j)
      for (int c = 0; c < 3; ++c) {
        const double v = norm[j * 3 + c];
        grid[(static_cast<std::size_t>(c) * rows + j) * cols + f] = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  const double range = hi - lo;
  for (double& v : grid) v = range > 0.0 ? (v - lo) / range * 255.0 : 128.0;

  EncodedSample out;
  out.size = size;
  out.label = label;
  out.pixels.resize(static_cast<std::size_t>(3) * size * size);
  // Corner-aligned bilinear sampling.
  auto coord = [size](int i, int n) {
    const double x = size > 1 ? static_cast<double>(i) * (n - 1) / (size - 1) : 0.0;
    const int i0 = std::min(static_cast<int>(x), n - 1);
    const int i1 = std::min(i0 + 1, n - 1);
    return std::tuple<int, int, double>(i0, i1, x - i0);
  };
  for (int r = 0; r < size; ++r) {
    const auto [r0, r1, fr] = coord(r, rows);
    for (int q = 0; q < size; ++q) {
      const auto [q0, q1, fq] = coord(q, cols);
      for (int c = 0; c < 3; ++c) {
        auto g = [&](int jr, int jc) {
          return grid[(static_cast<std::size_t>(c) * rows + jr) * cols + jc];
        };
        const double top = g(r0, q0) * (1.0 - fq) + g(r0, q1) * fq;
        const double bot = g(r1, q0) * (1.0 - fq) + g(r1, q1) * fq;
        const double v = top * (1.0 - fr) + bot * fr;
        out.pixels[(static_cast<std::size_t>(c) * size + r) * size + q] =
            std::clamp(v, 0.0, 255.0);
      }
    }
  }
  return out;
}

std::vector<EncodedSample> encode_all(const std::vector<const PoseSequence*>& seqs,
                                      const std::vector<int>& labels, int size) {
  if (seqs.size() != labels.size())
    throw Error(ErrorKind::kShapeMismatch, "encode_all: one label per sequence");
  std::vector<EncodedSample> out(seqs.size());
  parallel_for(seqs.size(),
               [&](std::size_t i) { out[i] = encode(*seqs[i], size, labels[i]); });
  return out;
}

namespace {

void init_weight(nn::Parameter<float>& p, std::uint64_t seed) {
  const double fan_in = static_cast<double>(p.value.dim(1) * p.value.dim(2));
  const double bound = std::sqrt(6.0 / fan_in);
  SplitMix64 rng(seed);
  for (auto& v : p.value.values()) v = static_cast<float>(rng.uniform(-bound, bound));
}

nn::Tensor<float> batch_input(const std::vector<EncodedSample>& samples,
                              const std::vector<std::size_t>& idx, int size) {
  const std::size_t per = static_cast<std::size_t>(3) * size * size;
  nn::Tensor<float> x({idx.size(), static_cast<std::size_t>(3 * size),
                       static_cast<std::size_t>(size)});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& px = samples[idx[b]].pixels;
    if (px.size() != per)
      throw Error(ErrorKind::kShapeMismatch, "encoded sample has the wrong size");
    for (std::size_t i = 0; i < per; ++i)
      x[b * per + i] = static_cast<float>(px[i] / 127.5 - 1.0);
  }
  return x;
}

}  // namespace

std::vector<nn::Parameter<float>*> ActionClassifier::parameters() const {
  return {&net_.w1, &net_.b1, &net_.bn1.gamma, &net_.bn1.beta,
          &net_.w2, &net_.b2, &net_.bn2.gamma, &net_.bn2.beta,
          &net_.w3, &net_.b3};
}

std::int64_t ActionClassifier::parameter_count() const {
  std::int64_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::int64_t>(p->value.size());
  return n;
}

std::vector<float> ActionClassifier::flat_parameters() const {
  std::vector<float> out;
  for (const auto* p : parameters())
    out.insert(out.end(), p->value.values().begin(), p->value.values().end());
  for (const auto* bn : {&net_.bn1, &net_.bn2}) {
    out.insert(out.end(), bn->running_mean.values().begin(), bn->running_mean.values().end());
    out.insert(out.end(), bn->running_var.values().begin(), bn->running_var.values().end());
  }
  return out;
}

nn::Var<float> ActionClassifier::forward(nn::Tape<float>& tape,
                                         nn::Tensor<float> input,
                                         nn::Mode mode) const {
  auto h = nn::conv1d(tape.constant(std::move(input)), tape.param(net_.w1),
                      tape.param(net_.b1), 1);
  h = nn::mish(nn::batchnorm1d(h, net_.bn1, mode));
  h = nn::conv1d(h, tape.param(net_.w2), tape.param(net_.b2), 2);
  h = nn::mish(nn::batchnorm1d(h, net_.bn2, mode));
  h = nn::global_avg_pool(h);
  return nn::conv1d(h, tape.param(net_.w3), tape.param(net_.b3), 1);
}

ActionClassifier ActionClassifier::train(const std::vector<EncodedSample>& samples,
                                         int n_classes,
                                         const ClassifierConfig& config) {
  if (config.size < 7 || config.hidden < 1 || config.epochs < 1 ||
      config.batch_size < 2 || !(config.learning_rate > 0.0))
    throw Error(ErrorKind::kInvalidArgument, "invalid classifier config");
  std::set<int> classes;
  for (const auto& s : samples) {
    if (s.label < 0 || s.label >= n_classes)
      throw Error(ErrorKind::kInvalidArgument,
                  "label " + std::to_string(s.label) + " outside [0, " +
                      std::to_string(n_classes) + ")");
    if (s.size != config.size)
      throw Error(ErrorKind::kShapeMismatch, "sample size differs from config size");
    classes.insert(s.label);
  }
  if (classes.size() < 2)
    throw Error(ErrorKind::kInvalidArgument,
                "classifier needs at least two classes in the training set");

  ActionClassifier clf;
  clf.config_ = config;
  clf.n_classes_ = n_classes;
  const auto s = static_cast<std::size_t>(config.size);
  const auto h = static_cast<std::size_t>(config.hidden);
  const auto k = static_cast<std::size_t>(n_classes);
  auto& net = clf.net_;
  net.w1 = {"conv1.weight", nn::Tensor<float>({h, 3 * s, 3})};
  net.b1 = {"conv1.bias", nn::Tensor<float>({h})};
  net.w2 = {"conv2.weight", nn::Tensor<float>({h, h, 3})};
  net.b2 = {"conv2.bias", nn::Tensor<float>({h})};
  net.w3 = {"head.weight", nn::Tensor<float>({k, h, 1})};
  net.b3 = {"head.bias", nn::Tensor<float>({k})};
  net.bn1 = nn::BatchNorm1d<float>("bn1", h);
  net.bn2 = nn::BatchNorm1d<float>("bn2", h);
  init_weight(net.w1, derive_seed(config.seed, 1));
  init_weight(net.w2, derive_seed(config.seed, 2));
  init_weight(net.w3, derive_seed(config.seed, 3));

  // Adam with the trainer's defaults.
  const auto params = clf.parameters();
  std::vector<std::vector<double>> m, v;
  for (auto* p : params) {
    m.emplace_back(p->value.size(), 0.0);
    v.emplace_back(p->value.size(), 0.0);
  }
  std::int64_t t = 0;

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr =
        config.learning_rate * std::pow(config.lr_decay_per_epoch, epoch - 1);
    SplitMix64 shuffle(derive_seed(config.seed, 0xC1A5 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
      std::vector<std::size_t> idx(
          order.begin() + b0,
          order.begin() + std::min(order.size(), b0 + config.batch_size));
      if (idx.size() < 2) continue;  // batch statistics need two samples
      std::vector<int> labels;
      for (auto i : idx) labels.push_back(samples[i].label);
      for (auto* p : params) p->zero_grad();
      nn::Tape<float> tape;
      auto logits = clf.forward(tape, batch_input(samples, idx, config.size),
                                nn::Mode::kTrain);
      auto loss = nn::softmax_cross_entropy(logits, labels);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv))
        throw Error(ErrorKind::kNumeric, "non-finite classifier loss");
      epoch_loss += lv * static_cast<double>(idx.size());
      tape.backward(loss);
      ++t;
      const double c1 = 1.0 - std::pow(0.9, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(0.999, static_cast<double>(t));
      for (std::size_t q = 0; q < params.size(); ++q) {
        auto& p = *params[q];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
          const double g = p.grad[i];
          m[q][i] = 0.9 * m[q][i] + 0.1 * g;
          v[q][i] = 0.999 * v[q][i] + 0.001 * g * g;
          p.value[i] = static_cast<float>(
              p.value[i] - lr * (m[q][i] / c1) / (std::sqrt(v[q][i] / c2) + 1e-8));
        }
      }
    }
    clf.losses_.push_back(static_cast<float>(epoch_loss / samples.size()));
  }
  return clf;
}

std::vector<int> ActionClassifier::classify(
    const std::vector<EncodedSample>& samples) const {
  std::vector<int> out(samples.size());
  constexpr std::size_t kChunk = 32;
  for (std::size_t b0 = 0; b0 < samples.size(); b0 += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b0; i < std::min(samples.size(), b0 + kChunk); ++i)
      idx.push_back(i);
    nn::Tape<float> tape;
    auto logits = forward(tape, batch_input(samples, idx, config_.size), nn::Mode::kEval);
    const auto& lv = logits.value();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      int best = 0;
      for (int c = 1; c < n_classes_; ++c)
        if (lv[b * n_classes_ + c] > lv[b * n_classes_ + best]) best = c;
      out[idx[b]] = best;
    }
  }
  return out;
}

int ActionClassifier::classify(const EncodedSample& sample) const {
  return classify(std::vector<EncodedSample>{sample}).front();
}

double ActionClassifier::accuracy(const std::vector<EncodedSample>& samples) const {
  if (samples.empty()) throw Error(ErrorKind::kInvalidArgument, "accuracy of an empty set");
  const auto pred = classify(samples);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) hits += pred[i] == samples[i].label;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace occlift
