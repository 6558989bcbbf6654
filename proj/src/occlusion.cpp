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

#include "occlift/occlusion.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "occlift/error.hpp"
#include "occlift/rng.hpp"

namespace occlift {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void require_frames(int frames) {
  if (frames <= 0)
    throw Error(ErrorKind::kInvalidArgument, "frame count must be positive");
}

}  // namespace

std::string describe(const OcclusionScheme& scheme) {
  return std::visit(
      overloaded{
          [](const NoOcclusion&) { return std::string("none"); },
          [](const RandomK& s) { return "random_k:" + std::to_string(s.k); },
          [](const BodyPartOcclusion& s) { return "body_part:" + s.part; },
          [](const FrameBlackout& s) {
            std::string d = "blackout:" + std::to_string(s.t);
            if (s.start >= 0) d += "@" + std::to_string(s.start);
            return d;
          }},
      scheme);
}

OcclusionScheme parse_scheme(const std::string& text) {
  if (text == "none") return NoOcclusion{};
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw Error(ErrorKind::kParse, "bad occlusion scheme '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const std::string arg = text.substr(colon + 1);
  try {
    if (kind == "random_k") return RandomK{std::stoi(arg)};
    if (kind == "body_part") return BodyPartOcclusion{arg};
    if (kind == "blackout") {
      const auto at = arg.find('@');
      FrameBlackout b;
      b.t = std::stoi(arg.substr(0, at));
      b.start = -1;
      if (at != std::string::npos) b.start = std::stoi(arg.substr(at + 1));
      return b;
    }
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorKind::kParse, "bad occlusion scheme '" + text + "'");
}

OcclusionMask::OcclusionMask(int frames, int n_joints, std::uint64_t seed,
                             OcclusionScheme scheme)
    : frames_(frames),
      n_joints_(n_joints),
      seed_(seed),
      scheme_(std::move(scheme)),
      present_(static_cast<std::size_t>(frames) * n_joints, 1) {
  if (frames < 0 || n_joints <= 0)
    throw Error(ErrorKind::kInvalidArgument, "bad mask dimensions");
}

OcclusionMask OcclusionMask::all_present(int frames, int n_joints) {
  return OcclusionMask(frames, n_joints, 0, NoOcclusion{});
}

int OcclusionMask::missing_in_frame(int f) const {
  int missing = 0;
  for (int j = 0; j < n_joints_; ++j) missing += present(f, j) ? 0 : 1;
  return missing;
}

OcclusionMask random_k_mask(std::uint64_t seed, int frames,
                            const SkeletonTopology& topology, int k) {
  require_frames(frames);
  const int n = topology.n_joints();
  if (k < 0 || k > n - 1)
    throw Error(ErrorKind::kInvalidArgument,
                "k=" + std::to_string(k) + " out of range [0, " +
                    std::to_string(n - 1) + "]");
  OcclusionMask mask(frames, n, seed, RandomK{k});
  SplitMix64 rng(seed);
  std::vector<int> idx(n);
  for (int f = 0; f < frames; ++f) {
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
      const int pick = i + static_cast<int>(rng.below(n - i));
      std::swap(idx[i], idx[pick]);
      mask.set(f, idx[i], false);
    }
  }
  return mask;
}

OcclusionMask body_part_mask(int frames, const SkeletonTopology& topology,
                             const std::string& part) {
  require_frames(frames);
  const auto& p = topology.part(part);
  OcclusionMask mask(frames, topology.n_joints(), 0, BodyPartOcclusion{part});
  for (int f = 0; f < frames; ++f)
    for (int j : p.joints) mask.set(f, j, false);
  return mask;
}

OcclusionMask frame_blackout_mask(std::uint64_t seed, int frames,
                                  const SkeletonTopology& topology, int t,
                                  std::optional<int> start) {
  require_frames(frames);
  if (t < 1 || t > frames)
    throw Error(ErrorKind::kInvalidArgument,
                "t=" + std::to_string(t) + " out of range [1, " +
                    std::to_string(frames) + "]");
  int first = 0;
  if (start) {
    if (*start < 0 || *start + t > frames)
      throw Error(ErrorKind::kInvalidArgument,
                  "blackout start " + std::to_string(*start) +
                      " does not fit " + std::to_string(t) + " frames");
    first = *start;
  } else {
    SplitMix64 rng(seed);
    first = static_cast<int>(rng.below(static_cast<std::uint64_t>(frames - t + 1)));
  }
  OcclusionMask mask(frames, topology.n_joints(), seed, FrameBlackout{t, first});
  for (int f = first; f < first + t; ++f)
    for (int j = 0; j < topology.n_joints(); ++j) mask.set(f, j, false);
  return mask;
}

OcclusionMask make_mask(const OcclusionScheme& scheme, std::uint64_t seed,
                        int frames, const SkeletonTopology& topology) {
  return std::visit(
      overloaded{
          [&](const NoOcclusion&) {
            return OcclusionMask::all_present(frames, topology.n_joints());
          },
          [&](const RandomK& s) {
            return random_k_mask(seed, frames, topology, s.k);
          },
          [&](const BodyPartOcclusion& s) {
            return body_part_mask(frames, topology, s.part);
          },
          [&](const FrameBlackout& s) {
            return frame_blackout_mask(
                seed, frames, topology, s.t,
                s.start >= 0 ? std::optional<int>(s.start) : std::nullopt);
          }},
      scheme);
}

std::string format_mask(const OcclusionMask& mask) {
  nlohmann::ordered_json header;
  header["schema"] = "occmask/1";
  header["scheme"] = describe(mask.scheme());
  header["seed"] = mask.seed();
  header["frames"] = mask.frames();
  header["n_joints"] = mask.n_joints();
  std::string out = header.dump() + "\n";
  out.reserve(out.size() + mask.bits().size() + mask.frames());
  for (int f = 0; f < mask.frames(); ++f) {
    for (int j = 0; j < mask.n_joints(); ++j)
      out += mask.present(f, j) ? '1' : '0';
    out += '\n';
  }
  return out;
}

OcclusionMask parse_mask(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorKind::kParse, "line 1: missing header record");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("line 1: ") + e.what());
  }
  if (header.value("schema", "") != "occmask/1")
    throw Error(ErrorKind::kParse,
                "line 1: field 'schema': expected \"occmask/1\"");
  const int frames = header.at("frames").get<int>();
  const int n_joints = header.at("n_joints").get<int>();
  OcclusionMask mask(frames, n_joints, header.at("seed").get<std::uint64_t>(),
                     parse_scheme(header.at("scheme").get<std::string>()));
  for (int f = 0; f < frames; ++f) {
    if (!std::getline(in, line))
      throw Error(ErrorKind::kShapeMismatch,
                  "mask ends after " + std::to_string(f) + " of " +
                      std::to_string(frames) + " frames");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (static_cast<int>(line.size()) != n_joints)
      throw Error(ErrorKind::kShapeMismatch,
                  "line " + std::to_string(f + 2) + ": expected " +
                      std::to_string(n_joints) + " bits");
    for (int j = 0; j < n_joints; ++j) {
      if (line[j] != '0' && line[j] != '1')
        throw Error(ErrorKind::kParse, "line " + std::to_string(f + 2) +
                                           ": mask bits must be 0 or 1");
      mask.set(f, j, line[j] == '1');
    }
  }
  return mask;
}

void save_mask(const OcclusionMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << format_mask(mask);
}

OcclusionMask load_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_mask(ss.str());
}

GuidedWindow apply_guidance(const PoseSequence& seq2d,
                            const OcclusionMask& mask,
                            const ConfidenceTrack* confidence) {
  if (seq2d.dims() != 2)
    throw Error(ErrorKind::kShapeMismatch, "guidance needs a 2D sequence");
  const int frames = seq2d.frames();
  const int n = seq2d.n_joints();
  if (mask.frames() != frames || mask.n_joints() != n)
    throw Error(ErrorKind::kShapeMismatch,
                "mask is " + std::to_string(mask.frames()) + "x" +
                    std::to_string(mask.n_joints()) + ", sequence is " +
                    std::to_string(frames) + "x" + std::to_string(n));
  if (confidence &&
      (confidence->frames() != frames || confidence->n_joints() != n))
    throw Error(ErrorKind::kShapeMismatch,
                "confidence track does not match the sequence shape");

  GuidedWindow out;
  out.mode = confidence ? GuidanceMode::kConfidence : GuidanceMode::kBinary;
  out.frames = frames;
  out.n_joints = n;
  out.channels.assign(static_cast<std::size_t>(frames) * out.channel_count(),
                      0.0);
  for (int f = 0; f < frames; ++f) {
    double* row = out.channels.data() +
                  static_cast<std::size_t>(f) * out.channel_count();
    for (int j = 0; j < n; ++j) {
      double m = mask.present(f, j) ? 1.0 : 0.0;
      if (confidence && m != 0.0) m = confidence->at(f, j);
      double* q = row + j * GuidedWindow::kChannelsPerJoint;
      if (m != 0.0) {
        q[0] = seq2d.at(f, j, 0);
        q[1] = seq2d.at(f, j, 1);
      }
      q[2] = m;
      q[3] = m;
    }
  }
  return out;
}

}  // namespace occlift
