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

#include <array>
#include <cmath>

#include "occlift/error.hpp"
#include "occlift/metrics.hpp"
#include "occlift/rng.hpp"
#include "oracles.hpp"

using namespace occlift;

using namespace occlift::oracle;

TEST_CASE("protocol 1 examples") {
  const auto& topo = get_topology("h36m17");
  SplitMix64 rng(1);
  const auto gt = random_pose(rng);
  CHECK(mpjpe_p1(gt, gt, topo) == 0.0);
  auto shifted = gt;
  for (std::size_t j = 0; j < 17; ++j) {
    shifted[j * 3] += 10;
    shifted[j * 3 + 1] -= 5;
    shifted[j * 3 + 2] += 2;
  }
  CHECK(mpjpe_p1(shifted, gt, topo) < 1e-9);
  auto one = gt;
  one[5 * 3 + 1] += 17.0;
  CHECK(mpjpe_p1(one, gt, topo) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(mpjpe_p1(std::vector<double>(48), gt, topo), Error);
}

TEST_CASE("protocol 2 removes any proper similarity transform") {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto gt = random_pose(rng);
    const Mat r = rot_xyz(rng.uniform(0, 6.28), rng.uniform(-1.5, 1.5), rng.uniform(0, 6.28));
    const auto pred = transform(gt, r, 1.7, {rng.uniform(-900, 900), 40, -3000});
    bool degenerate = true;
    CHECK(mpjpe_p2(pred, gt, &degenerate) < 1e-6);
    CHECK_FALSE(degenerate);
  }
}

TEST_CASE("protocol 2 never exceeds protocol 1 on random pose pairs") {
  const auto& topo = get_topology("h36m17");
  SplitMix64 rng(3);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto gt = random_pose(rng);
    auto pred = random_pose(rng);
    if (i % 2 == 0)  // half of the pairs are near each other
      for (std::size_t k = 0; k < pred.size(); ++k) pred[k] = gt[k] + 0.1 * pred[k];
    violations += mpjpe_p2(pred, gt) > mpjpe_p1(pred, gt, topo);
  }
  CHECK(violations == 0);
}

TEST_CASE("mirror images are not aligned (reflection excluded)") {
  SplitMix64 rng(4);
  const auto gt = random_pose(rng, 17, 400);
  auto mirror = gt;
  for (std::size_t j = 0; j < 17; ++j) mirror[j * 3] = -mirror[j * 3];
  const auto res = procrustes_align(mirror, gt);
  const double p2 = mpjpe_p2(mirror, gt);
  CHECK(p2 > 1.0);
  // The closed form reaches the brute-force optimum over proper rotations.
  const double grid = grid_min_rms(mirror, gt);
  CHECK(grid > 1.0);
  CHECK(rms(res.aligned, gt) == doctest::Approx(grid).epsilon(1e-6));
  CHECK(rms(res.aligned, gt) <= grid + 1e-9);
  // Rotation is proper.
  const auto& m = res.rotation;
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  CHECK(det == doctest::Approx(1.0));
}

TEST_CASE("degenerate geometry is flagged") {
  std::vector<double> line, point;
  for (int j = 0; j < 5; ++j) {
    line.insert(line.end(), {double(j), 2.0 * j, 0.0});
    point.insert(point.end(), {1.0, 1.0, 1.0});
  }
  bool deg = false;
  mpjpe_p2(line, line, &deg);
  CHECK(deg);
  mpjpe_p2(point, line, &deg);
  CHECK(deg);
}

TEST_CASE("score_predictions aggregates per action and overall") {
  std::vector<SequenceScore> seqs = {
      {"a", "walk", {1.0, 2.0, 3.0}},
      {"b", "jump", {10.0}},
      {"c", "walk", {4.0}},
  };
  const auto rep = score_predictions(1, "random_k:4", 81, seqs);
  REQUIRE(rep.per_action.size() == 2);
  CHECK(rep.per_action[0].action == "jump");
  CHECK(rep.per_action[1].mean_mm == doctest::Approx(2.5));
  CHECK(rep.per_action[1].frames == 4);
  // Independent recomputation from raw frames.
  double sum = 0;
  int n = 0;
  for (const auto& s : seqs)
    for (double e : s.frame_errors_mm) sum += e, ++n;
  CHECK(std::abs(rep.overall_mm - sum / n) < 1e-9);
  double weighted = 0;
  for (const auto& a : rep.per_action) weighted += a.mean_mm * a.frames;
  CHECK(std::abs(rep.overall_mm - weighted / rep.frames) < 1e-9);

  const std::string csv = format_table_csv("model", {"k0", "k4"}, {{"g", {1.5, 2.0}}});
  CHECK(csv == "model,k0,k4\ng,1.5,2\n");
}

TEST_CASE("evaluate: perfect frames score zero and k=0 equals no mask") {
  const auto& topo = get_topology("h36m17");
  SplitMix64 rng(5);
  std::vector<double> c3, c2;
  for (int i = 0; i < 30 * 17 * 3; ++i) c3.push_back(rng.uniform(-500, 500) + (i % 3 == 2 ? 4000 : 0));
  for (int i = 0; i < 30 * 17 * 2; ++i) c2.push_back(rng.uniform(300, 700));
  LabeledPair pair{"x", PoseSequence(topo, 2, c2), PoseSequence(topo, 3, c3), 0, 0, Split::kTest};
  CHECK(per_frame_errors(1, pair.pose3d, pair.pose3d) == std::vector<double>(30, 0.0));

  LifterConfig cfg;
  cfg.channels = 8;
  cfg.blocks = 1;
  auto model = LifterModel<double>::build(cfg, 1);
  const std::vector<const LabeledPair*> pairs{&pair};
  const auto a = evaluate(model, pairs, {"walk"}, 1, RandomK{0}, 3);
  const auto b = evaluate(model, pairs, {"walk"}, 1, NoOcclusion{}, 3);
  CHECK(a.overall_mm == b.overall_mm);
  CHECK(a.sequences[0].frame_errors_mm == b.sequences[0].frame_errors_mm);
  CHECK(a.per_action[0].action == "walk");
  CHECK_THROWS_AS(evaluate(model, pairs, {"walk"}, 3, NoOcclusion{}, 3), Error);
}
