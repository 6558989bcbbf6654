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

#include <cmath>
#include <numbers>

#include "occlift/error.hpp"
#include "occlift/rng.hpp"

namespace occlift {

const char* error_kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kUnknownTopology: return "unknown_topology";
    case ErrorKind::kUnknownPart: return "unknown_part";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kShapeMismatch: return "shape_mismatch";
    case ErrorKind::kNonFinite: return "non_finite";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kVersion: return "version";
    case ErrorKind::kNumeric: return "numeric";
  }
  return "unknown";
}

double SplitMix64::normal() noexcept {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace occlift
