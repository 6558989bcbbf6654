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
#include <vector>

#include "occlift/error.hpp"
#include "occlift/quality.hpp"
#include "occlift/rng.hpp"
#include "occlift/synth.hpp"

using namespace occlift;

namespace {

const SkeletonTopology& h36m() { return get_topology("h36m17"); }

// Reference pipeline written from the definition: per-frame centering on the
// joint mean, Frobenius scaling, global min-max to [0,255], then
// corner-aligned bilinear interpolation of the [axis][joint][frame] grid.
std::vector<double> ref_encode(const PoseSequence& s, int size) {
  const int rows = s.n_joints(), cols = s.frames();
  std::vector<double> grid(3 * rows * cols);
  for (int f = 0; f < cols; ++f) {
    double mu[3] = {0, 0, 0};
    for (int j = 0; j < rows; ++j)
      for (int a = 0; a < 3; ++a) mu[a] += s.at(f, j, a) / rows;
    double ss = 0.0;
    for (int j = 0; j < rows; ++j)
      for (int a = 0; a < 3; ++a) ss += std::pow(s.at(f, j, a) - mu[a], 2);
    const double sigma = std::sqrt(ss);
    for (int j = 0; j < rows; ++j)
      for (int a = 0; a < 3; ++a)
        grid[(a * rows + j) * cols + f] =
            sigma > 1e-8 ? (s.at(f, j, a) - mu[a]) / sigma : 0.0;
  }
  const auto [lo, hi] = std::minmax_element(grid.begin(), grid.end());
  const double l = *lo, r = *hi - *lo;
  for (auto& v : grid) v = r > 0 ? 255.0 * (v - l) / r : 128.0;

  std::vector<double> out(3 * size * size);
  for (int a = 0; a < 3; ++a)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double sy = size > 1 ? y * double(rows - 1) / (size - 1) : 0.0;
        const double sx = size > 1 ? x * double(cols - 1) / (size - 1) : 0.0;
        double acc = 0.0;
        // sum over the four neighbours with tent weights
        for (int j = 0; j < rows; ++j)
          for (int f = 0; f < cols; ++f) {
            const double wy = std::max(0.0, 1.0 - std::abs(sy - j));
            const double wx = std::max(0.0, 1.0 - std::abs(sx - f));
            if (wy > 0 && wx > 0) acc += wy * wx * grid[(a * rows + j) * cols + f];
          }
        out[(a * size + y) * size + x] = acc;
      }
  return out;
}

PoseSequence random_3d(int frames, std::uint64_t seed, bool integer) {
  SplitMix64 g(seed);
  PoseSequence s(h36m(), 3);
  std::vector<double> frame(51);
  for (int f = 0; f < frames; ++f) {
    for (auto& v : frame)
      v = integer ? static_cast<double>(static_cast<int>(g.below(2001)) - 1000)
                  : g.uniform(-1000.0, 1000.0);
    s.push_frame(frame);
  }
  return s;
}

}  // namespace

TEST_CASE("normalize_frame worked example") {
  const std::vector<double> f = {0, 0, 0, 2, 0, 0};
  const auto n = normalize_frame(f);
  CHECK(n[0] == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-12));
  CHECK(n[3] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  for (int i : {1, 2, 4, 5}) CHECK(n[i] == 0.0);

  const std::vector<double> same(51, 12.5);
  for (double v : normalize_frame(same)) CHECK(v == 0.0);
  CHECK_THROWS_AS(normalize_frame(std::vector<double>(5)), Error);
}

TEST_CASE("normalize_frame has zero mean and unit norm") {
  SplitMix64 g(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> f(51);
    for (auto& v : f) v = g.uniform(-3000.0, 3000.0);
    const auto n = normalize_frame(f);
    double mean[3] = {0, 0, 0}, sq = 0.0;
    for (int j = 0; j < 17; ++j)
      for (int a = 0; a < 3; ++a) {
        mean[a] += n[j * 3 + a] / 17.0;
        sq += n[j * 3 + a] * n[j * 3 + a];
      }
    for (double m : mean) REQUIRE(std::abs(m) < 1e-12);
    REQUIRE(std::abs(std::sqrt(sq) - 1.0) < 1e-6);
  }
}

TEST_CASE("encode matches the reference pipeline") {
  for (int size : {1, 7, 32}) {
    const auto seq = random_3d(23, 11 + size, false);
    const auto e = encode(seq, size, 3);
    const auto ref = ref_encode(seq, size);
    CHECK(e.label == 3);
    REQUIRE(e.pixels.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
      REQUIRE(std::abs(e.pixels[i] - ref[i]) < 1e-9);
  }
}

TEST_CASE("encode scaling contract") {
  PoseSequence constant(h36m(), 3);
  for (int f = 0; f < 10; ++f) constant.push_frame(std::vector<double>(51, 42.0));
  const auto c = encode(constant, 16);
  for (double v : c.pixels) CHECK(v == 128.0);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto e = encode(random_3d(40, seed, false), 24);
    const auto [lo, hi] = std::minmax_element(e.pixels.begin(), e.pixels.end());
    CHECK(*lo >= 0.0);
    CHECK(*hi <= 255.0);
  }
  PoseSequence flat(h36m(), 2);
  flat.push_frame(std::vector<double>(34, 1.0));
  CHECK_THROWS_AS(encode(flat, 8), Error);
}

TEST_CASE("encode ignores global translation") {
  // Integer millimetres with integer shifts: every difference is exact.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto seq = random_3d(30, seed, true);
    auto moved = seq;
    SplitMix64 g(seed + 100);
    const double t[3] = {static_cast<double>(g.below(5000)) - 2500.0,
                         static_cast<double>(g.below(5000)) - 2500.0,
                         static_cast<double>(g.below(5000))};
    for (int f = 0; f < moved.frames(); ++f)
      for (int j = 0; j < 17; ++j)
        for (int a = 0; a < 3; ++a) moved.at(f, j, a) += t[a];
    REQUIRE(encode(seq, 32).pixels == encode(moved, 32).pixels);
  }
  // Arbitrary reals: equal up to rounding.
  const auto seq = random_3d(30, 9, false);
  auto moved = seq;
  for (int f = 0; f < moved.frames(); ++f)
    for (int j = 0; j < 17; ++j) moved.at(f, j, 0) += 123.456;
  const auto a = encode(seq, 32), b = encode(moved, 32);
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    REQUIRE(std::abs(a.pixels[i] - b.pixels[i]) < 1e-9);
}

TEST_CASE("classifier needs two classes") {
  std::vector<EncodedSample> one(4, encode(random_3d(8, 1, false), 8, 0));
  ClassifierConfig cfg;
  cfg.size = 8;
  cfg.epochs = 1;
  CHECK_THROWS_AS(ActionClassifier::train(one, 1, cfg), Error);
  CHECK_THROWS_AS(ActionClassifier::train(one, 3, cfg), Error);
}

TEST_CASE("classifier learns synthetic actions and nothing from shuffled labels") {
  synth::DatasetOptions opt;
  opt.frames = 100;
  const auto ds = synth::make_dataset(2, h36m(), opt);
  std::vector<const PoseSequence*> tr, te;
  std::vector<int> ytr, yte;
  for (const auto& it : ds.items) {
    (it.split == Split::kTrain ? tr : te).push_back(&it.pose3d);
    (it.split == Split::kTrain ? ytr : yte).push_back(it.label);
  }
  const auto train = encode_all(tr, ytr, 32);
  const auto test = encode_all(te, yte, 32);
  ClassifierConfig cfg;
  cfg.size = 32;
  cfg.epochs = 20;
  cfg.seed = 6;

  const auto clf = ActionClassifier::train(train, 8, cfg);
  const double acc = clf.accuracy(test);
  MESSAGE("clean accuracy " << acc);
  CHECK(acc > 2.0 / 8.0);

  const auto again = ActionClassifier::train(train, 8, cfg);
  CHECK(again.flat_parameters() == clf.flat_parameters());
  CHECK(again.accuracy(test) == acc);

  // A single shuffle is a high-variance estimate: the network still separates
  // the true classes, and a whole class scores whenever its majority shuffled
  // label happens to be itself. Average over independent permutations.
  double chance = 0.0;
  const int perms = 10;
  for (int p = 0; p < perms; ++p) {
    auto shuffled = train;
    SplitMix64 g(99 + p);
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1].label, shuffled[g.below(i)].label);
    chance += ActionClassifier::train(shuffled, 8, cfg).accuracy(test) / perms;
  }
  MESSAGE("mean shuffled-label accuracy " << chance);
  CHECK(std::abs(chance - 1.0 / 8.0) <= 0.05 + 1e-12);
}
