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

#include "occlift/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "occlift/error.hpp"
#include "occlift/metrics.hpp"
#include "occlift/occlusion.hpp"
#include "occlift/rng.hpp"

namespace occlift {

namespace {

constexpr std::uint64_t kShuffleSalt = 0x5A0FF1E;
constexpr std::uint64_t kMaskSalt = 0x3A5C;
constexpr std::uint64_t kDropoutSalt = 0xD80F;

struct Window {
  std::size_t pair;
  int start;  // first predicted frame
};

}  // namespace

void TrainConfig::validate(int n_joints) const {
  auto fail = [](const std::string& m) {
    throw Error(ErrorKind::kInvalidArgument, "train config: " + m);
  };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(lr_decay_per_epoch > 0.0)) fail("lr_decay_per_epoch must be positive");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (window_frames < 1) fail("window_frames must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (precision != 32 && precision != 64) fail("precision must be 32 or 64");
  if (augmentation.enabled) {
    if (!(augmentation.p_apply >= 0.0 && augmentation.p_apply <= 1.0))
      fail("p_apply must be in [0, 1]");
    const int k = augmentation.k_max < 0 ? n_joints - 1 : augmentation.k_max;
    if (k < 1 || k > n_joints - 1)
      fail("k_max must be in [1, " + std::to_string(n_joints - 1) + "]");
  }
}

std::string format_epoch_record(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["train_loss_mm"] = r.train_loss_mm;
  if (r.val_mpjpe_p1_mm)
    j["val_mpjpe_p1_mm"] = *r.val_mpjpe_p1_mm;
  else
    j["val_mpjpe_p1_mm"] = nullptr;
  j["wall_seconds"] = r.wall_seconds;
  return j.dump();
}

double pose_loss(std::span<const double> pred, std::span<const double> gt,
                 int n_joints) {
  if (pred.size() != gt.size())
    throw Error(ErrorKind::kShapeMismatch, "loss: batch shapes differ");
  const std::size_t stride = static_cast<std::size_t>(n_joints) * 3;
  if (pred.empty() || n_joints < 1 || pred.size() % stride != 0)
    throw Error(ErrorKind::kInvalidArgument, "loss: empty or ragged batch");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); i += 3) {
    const double dx = pred[i] - gt[i], dy = pred[i + 1] - gt[i + 1],
                 dz = pred[i + 2] - gt[i + 2];
    total += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return total / static_cast<double>(pred.size() / 3);
}

template <typename T>
Adam<T>::Adam(std::vector<nn::Parameter<T>*> params, double beta1, double beta2,
              double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template <typename T>
void Adam<T>::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double update = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      p.value[i] = static_cast<T>(p.value[i] - update);
    }
  }
}

template <typename T>
std::vector<EpochRecord> fit(LifterModel<T>& model,
                             const std::vector<const LabeledPair*>& train,
                             const std::vector<const LabeledPair*>& val,
                             const TrainConfig& config,
                             const EpochCallback& on_epoch) {
  const auto& topo = model.topology();
  const int n = topo.n_joints();
  config.validate(n);
  if (train.empty())
    throw Error(ErrorKind::kInvalidArgument, "training set is empty");
  int min_frames = train.front()->pose2d.frames();
  for (const auto* p : train) {
    check_alignment(*p);
    if (p->pose2d.topology().name() != topo.name())
      throw Error(ErrorKind::kShapeMismatch,
                  p->id + ": topology " + p->pose2d.topology().name() +
                      " does not match the model (" + topo.name() + ")");
    min_frames = std::min(min_frames, p->pose2d.frames());
  }
  const int out_len = std::min(config.window_frames, min_frames);
  const int rf = model.receptive_field();
  const int pad = rf / 2;
  const int in_len = out_len + rf - 1;
  const int k_max = config.augmentation.k_max < 0 ? n - 1 : config.augmentation.k_max;

  // Windows tile each sequence; the last one is pulled back to stay inside.
  std::vector<Window> windows;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const int frames = train[i]->pose2d.frames();
    for (int s = 0; s < frames; s += out_len)
      windows.push_back({i, std::min(s, frames - out_len)});
  }

  // Guidance channels are precomputed unmasked; masking edits the indicators.
  std::vector<GuidedWindow> clean(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    clean[i] = replicate_edges(
        apply_guidance(train[i]->pose2d,
                       OcclusionMask::all_present(train[i]->pose2d.frames(), n)),
        pad);

  const std::size_t in_ch = static_cast<std::size_t>(n) * model.config().in_dims_per_joint;
  const std::size_t out_ch = static_cast<std::size_t>(n) * 3;
  Adam<T> adam(model.parameters());
  std::vector<EpochRecord> log;
  std::int64_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr =
        config.learning_rate * std::pow(config.lr_decay_per_epoch, epoch - 1);
    const std::uint64_t epoch_seed = derive_seed(config.seed, static_cast<std::uint64_t>(epoch));

    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 shuffle(derive_seed(epoch_seed, kShuffleSalt));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle.below(i)]);

    model.set_mode(nn::Mode::kTrain);
    double loss_sum = 0.0;
    std::size_t loss_windows = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
      const std::size_t nb = std::min<std::size_t>(config.batch_size, order.size() - b0);
      nn::Tensor<T> input({nb, in_ch, static_cast<std::size_t>(in_len)});
      nn::Tensor<T> target({nb, out_ch, static_cast<std::size_t>(out_len)});
      for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t wi = order[b0 + b];
        const Window& w = windows[wi];
        const LabeledPair& pair = *train[w.pair];
        GuidedWindow g;
        g.mode = GuidanceMode::kBinary;
        g.n_joints = n;
        g.frames = in_len;
        const std::size_t stride = g.channel_count();
        const auto& src = clean[w.pair].channels;
        g.channels.assign(src.begin() + w.start * stride,
                          src.begin() + (w.start + in_len) * stride);

        SplitMix64 aug(derive_seed(epoch_seed, kMaskSalt + wi));
        if (config.augmentation.enabled && aug.uniform() < config.augmentation.p_apply) {
          const int k = 1 + static_cast<int>(aug.below(static_cast<std::uint64_t>(k_max)));
          const OcclusionMask mask = random_k_mask(aug.next(), in_len, topo, k);
          for (int f = 0; f < in_len; ++f)
            for (int j = 0; j < n; ++j)
              if (!mask.present(f, j))
                for (int c = 0; c < 4; ++c) g.channels[f * stride + j * 4 + c] = 0.0;
        }
        const auto x = network_input<T>(model.config(), g, 0, in_len);
        std::copy(x.data(), x.data() + x.size(), input.data() + b * x.size());

        for (int f = 0; f < out_len; ++f) {
          const auto fr = pair.pose3d.frame(w.start + f);
          const int r = topo.root();
          for (int j = 0; j < n; ++j)
            for (int a = 0; a < 3; ++a)
              target[(b * out_ch + j * 3 + a) * out_len + f] =
                  static_cast<T>(fr[j * 3 + a] - fr[r * 3 + a]);
        }
      }

      adam.zero_grad();
      nn::Tape<T> tape;
      auto pred = model.forward(tape, tape.constant(std::move(input)),
                                derive_seed(derive_seed(config.seed, kDropoutSalt),
                                            static_cast<std::uint64_t>(step)));
      auto loss = nn::mean_joint_distance(pred, target, n);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv))
        throw Error(ErrorKind::kNumeric,
                    "non-finite training loss at epoch " + std::to_string(epoch) +
                        ", step " + std::to_string(step) +
                        "; try a lower learning rate");
      tape.backward(loss);
      adam.step(lr);
      ++step;
      loss_sum += lv * static_cast<double>(nb);
      loss_windows += nb;
    }
    model.set_mode(nn::Mode::kEval);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss_mm = loss_sum / static_cast<double>(loss_windows);
    if (!val.empty())
      rec.val_mpjpe_p1_mm =
          evaluate(model, val, {}, 1, NoOcclusion{}, 0).overall_mm;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return log;
}

template class Adam<float>;
template class Adam<double>;
template std::vector<EpochRecord> fit<float>(LifterModel<float>&,
                                             const std::vector<const LabeledPair*>&,
                                             const std::vector<const LabeledPair*>&,
                                             const TrainConfig&, const EpochCallback&);
template std::vector<EpochRecord> fit<double>(LifterModel<double>&,
                                              const std::vector<const LabeledPair*>&,
                                              const std::vector<const LabeledPair*>&,
                                              const TrainConfig&, const EpochCallback&);

}  // namespace occlift
