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

#include "occlift/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "occlift/error.hpp"
#include "occlift/parallel.hpp"
#include "occlift/rng.hpp"

namespace occlift {

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Copied into Eigen-owned (aligned) storage: reductions over a Map peel a
// different number of leading scalars depending on the input address.
Points as_points(std::span<const double> v) {
  return Eigen::Map<const Points>(v.data(), static_cast<Eigen::Index>(v.size() / 3), 3);
}

void check_pair(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size() || pred.empty() || pred.size() % 3 != 0)
    throw Error(ErrorKind::kShapeMismatch,
                "pose shapes differ: " + std::to_string(pred.size()) + " vs " +
                    std::to_string(gt.size()) + " coordinates");
}

double mean_distance(const Points& a, const Points& b) {
  return (a - b).rowwise().norm().mean();
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

double mpjpe_p1(std::span<const double> pred, std::span<const double> gt,
                const SkeletonTopology& topology) {
  check_pair(pred, gt);
  if (pred.size() != static_cast<std::size_t>(topology.n_joints()) * 3)
    throw Error(ErrorKind::kShapeMismatch, "pose does not match topology " +
                                               topology.name());
  const auto p = as_points(pred);
  const auto g = as_points(gt);
  const int r = topology.root();
  const Points pa = p.rowwise() - p.row(r);
  const Points ga = g.rowwise() - g.row(r);
  return mean_distance(pa, ga);
}

ProcrustesResult procrustes_align(std::span<const double> pred,
                                  std::span<const double> gt) {
  check_pair(pred, gt);
  const auto x = as_points(pred);
  const auto y = as_points(gt);
  const Eigen::RowVector3d mx = x.colwise().mean();
  const Eigen::RowVector3d my = y.colwise().mean();
  const Points xc = x.rowwise() - mx;
  const Points yc = y.rowwise() - my;

  ProcrustesResult res;
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  double s = 1.0;
  const double norm_x = xc.squaredNorm();
  if (norm_x <= 1e-18) {
    res.degenerate = true;
    s = 0.0;
  } else {
    const Eigen::Matrix3d m = xc.transpose() * yc;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d& u = svd.matrixU();
    const Eigen::Matrix3d& v = svd.matrixV();
    const Eigen::Vector3d sv = svd.singularValues();
    Eigen::Vector3d d(1.0, 1.0, (u * v.transpose()).determinant() < 0 ? -1.0 : 1.0);
    rot = u * d.asDiagonal() * v.transpose();
    s = sv.dot(d) / norm_x;
    if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300)) res.degenerate = true;
  }
  const Eigen::RowVector3d t = my - s * mx * rot;
  Points aligned = (s * x * rot).rowwise() + t;
  res.aligned.assign(aligned.data(), aligned.data() + aligned.size());
  res.scale = s;
  for (int i = 0; i < 3; ++i) {
    res.translation[i] = t(i);
    for (int j = 0; j < 3; ++j) res.rotation[i * 3 + j] = rot(i, j);
  }
  return res;
}

double mpjpe_p2(std::span<const double> pred, std::span<const double> gt,
                bool* degenerate) {
  const auto res = procrustes_align(pred, gt);
  if (degenerate) *degenerate = res.degenerate;
  return mean_distance(as_points(res.aligned), as_points(gt));
}

double mpjpe(int protocol, std::span<const double> pred,
             std::span<const double> gt, const SkeletonTopology& topology,
             bool* degenerate) {
  if (protocol == 1) {
    if (degenerate) *degenerate = false;
    return mpjpe_p1(pred, gt, topology);
  }
  if (protocol == 2) return mpjpe_p2(pred, gt, degenerate);
  throw Error(ErrorKind::kInvalidArgument,
              "protocol must be 1 or 2, got " + std::to_string(protocol));
}

std::vector<double> per_frame_errors(int protocol, const PoseSequence& pred,
                                     const PoseSequence& gt,
                                     int* degenerate_frames) {
  if (pred.dims() != 3 || gt.dims() != 3 || pred.frames() != gt.frames() ||
      pred.n_joints() != gt.n_joints())
    throw Error(ErrorKind::kShapeMismatch,
                "prediction has " + std::to_string(pred.frames()) +
                    " frames, ground truth " + std::to_string(gt.frames()));
  std::vector<double> out(pred.frames());
  int bad = 0;
  for (int f = 0; f < pred.frames(); ++f) {
    bool deg = false;
    out[f] = mpjpe(protocol, pred.frame(f), gt.frame(f), gt.topology(), &deg);
    bad += deg ? 1 : 0;
  }
  if (degenerate_frames) *degenerate_frames = bad;
  return out;
}

EvalReport score_predictions(int protocol, const std::string& scheme,
                             int sequence_length,
                             std::vector<SequenceScore> sequences) {
  EvalReport rep;
  rep.protocol = protocol;
  rep.scheme = scheme;
  rep.sequence_length = sequence_length;
  std::map<std::string, std::pair<double, std::int64_t>> acc;
  double total = 0.0;
  for (const auto& s : sequences) {
    auto& [sum, n] = acc[s.action];
    for (double e : s.frame_errors_mm) {
      sum += e;
      total += e;
    }
    n += static_cast<std::int64_t>(s.frame_errors_mm.size());
    rep.frames += static_cast<std::int64_t>(s.frame_errors_mm.size());
  }
  for (const auto& [action, v] : acc)
    rep.per_action.push_back(
        {action, v.second > 0 ? v.first / v.second : 0.0, v.second});
  rep.overall_mm = rep.frames > 0 ? total / rep.frames : 0.0;
  rep.sequences = std::move(sequences);
  return rep;
}

template <typename T>
std::vector<PoseSequence> predict_all(LifterModel<T>& model,
                                      const std::vector<const LabeledPair*>& pairs,
                                      const OcclusionScheme& scheme,
                                      std::uint64_t seed) {
  model.set_mode(nn::Mode::kEval);
  const auto& topo = model.topology();
  std::vector<std::optional<PoseSequence>> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const LabeledPair& p = *pairs[i];
    check_alignment(p);
    const OcclusionMask mask =
        make_mask(scheme, derive_seed(seed, i), p.pose2d.frames(), topo);
    out[i].emplace(predict_sequence(model, p.pose2d, mask));
  });
  std::vector<PoseSequence> seqs;
  seqs.reserve(out.size());
  for (auto& s : out) seqs.push_back(std::move(*s));
  return seqs;
}

template <typename T>
EvalReport evaluate(LifterModel<T>& model,
                    const std::vector<const LabeledPair*>& pairs,
                    const std::vector<std::string>& action_names, int protocol,
                    const OcclusionScheme& scheme, std::uint64_t seed) {
  if (protocol != 1 && protocol != 2)
    throw Error(ErrorKind::kInvalidArgument,
                "protocol must be 1 or 2, got " + std::to_string(protocol));
  if (pairs.empty())
    throw Error(ErrorKind::kInvalidArgument, "no sequences to evaluate");
  const auto preds = predict_all(model, pairs, scheme, seed);
  std::vector<SequenceScore> scores(pairs.size());
  std::vector<int> degenerate(pairs.size(), 0);
  parallel_for(pairs.size(), [&](std::size_t i) {
    const LabeledPair& p = *pairs[i];
    scores[i].id = p.id;
    scores[i].action =
        p.label >= 0 && p.label < static_cast<int>(action_names.size())
            ? action_names[p.label]
            : std::to_string(p.label);
    scores[i].frame_errors_mm =
        per_frame_errors(protocol, preds[i], p.pose3d, &degenerate[i]);
  });
  auto rep = score_predictions(protocol, describe(scheme), model.receptive_field(),
                               std::move(scores));
  for (int d : degenerate) rep.degenerate_frames += d;
  return rep;
}

std::string format_report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = "evalreport/1";
  j["protocol"] = r.protocol;
  j["scheme"] = r.scheme;
  j["sequence_length"] = r.sequence_length;
  j["overall_mm"] = r.overall_mm;
  j["frames"] = r.frames;
  j["degenerate_frames"] = r.degenerate_frames;
  auto& actions = j["per_action"] = nlohmann::ordered_json::array();
  for (const auto& a : r.per_action)
    actions.push_back({{"action", a.action}, {"mean_mm", a.mean_mm}, {"frames", a.frames}});
  auto& seqs = j["sequences"] = nlohmann::ordered_json::array();
  for (const auto& s : r.sequences)
    seqs.push_back({{"id", s.id}, {"action", s.action}, {"frame_errors_mm", s.frame_errors_mm}});
  return j.dump(1) + "\n";
}

void save_report_json(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << format_report_json(report);
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

std::string format_table_csv(const std::string& corner,
                             const std::vector<std::string>& columns,
                             const std::vector<TableRow>& rows) {
  std::ostringstream os;
  os << corner;
  for (const auto& c : columns) os << ',' << c;
  os << '\n';
  for (const auto& r : rows) {
    if (r.values.size() != columns.size())
      throw Error(ErrorKind::kShapeMismatch, "table row " + r.label +
                                                 " has the wrong column count");
    os << r.label;
    for (double v : r.values) os << ',' << format_double(v);
    os << '\n';
  }
  return os.str();
}

template std::vector<PoseSequence> predict_all<float>(
    LifterModel<float>&, const std::vector<const LabeledPair*>&,
    const OcclusionScheme&, std::uint64_t);
template std::vector<PoseSequence> predict_all<double>(
    LifterModel<double>&, const std::vector<const LabeledPair*>&,
    const OcclusionScheme&, std::uint64_t);
template EvalReport evaluate<float>(LifterModel<float>&,
                                    const std::vector<const LabeledPair*>&,
                                    const std::vector<std::string>&, int,
                                    const OcclusionScheme&, std::uint64_t);
template EvalReport evaluate<double>(LifterModel<double>&,
                                     const std::vector<const LabeledPair*>&,
                                     const std::vector<std::string>&, int,
                                     const OcclusionScheme&, std::uint64_t);

}  // namespace occlift
