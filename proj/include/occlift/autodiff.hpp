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

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace occlift::nn {

enum class Mode { kTrain, kEval };

// Cache-line aligned storage. Eigen's vectorized reductions peel a different
// number of leading scalars depending on the buffer address, so unaligned
// heap blocks would make results depend on where the allocator put them.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

// Dense row-major array. Precision is a template parameter: float for
// training, double for gradient checking.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, T fill = T(0));
  Tensor(std::vector<std::size_t> shape, std::vector<T> data);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void fill(T v);
  void reshape(std::vector<std::size_t> shape);

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<T, AlignedAllocator<T>> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

template <typename T>
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
class Tape;

// Handle to a node recorded on a Tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const;
  const std::vector<std::size_t>& shape() const { return value().shape(); }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so walking them
// backwards is a valid topological order for the adjoint sweep.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Data that needs no gradient.
  Var<T> constant(Tensor<T> value);
  // Leaf whose gradient is readable through grad() after backward().
  Var<T> leaf(Tensor<T> value);
  // Borrows the parameter value; backward() accumulates into p.grad.
  Var<T> param(Parameter<T>& p);

  Var<T> record(Tensor<T> value, bool requires_grad, Backward backward);

  const Tensor<T>& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Adjoint buffer, allocated (zeroed) on first access.
  Tensor<T>& grad(std::size_t id);
  const Tensor<T>& grad(Var<T> v) { return grad(v.id); }

  // Seeds the scalar output with 1 and runs the adjoint sweep.
  void backward(Var<T> output);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* borrowed = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    Backward backward;
  };
  // A deque keeps value references stable while ops append nodes.
  std::deque<Node> nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape->value(id);
}

// Valid (unpadded) dilated cross-correlation.
//   x: [N, C_in, L] (or [C_in, L])   w: [C_out, C_in, K]   b: [C_out]
//   y: [N, C_out, L - dilation * (K - 1)]
template <typename T>
Var<T> conv1d(Var<T> x, Var<T> w, Var<T> b, int dilation);

// Normalization layer state. Running statistics follow
//   running = (1 - momentum) * running + momentum * batch_stat
// with the unbiased variance for running_var.
template <typename T>
struct BatchNorm1d {
  BatchNorm1d() = default;
  BatchNorm1d(const std::string& name, std::size_t channels);

  Parameter<T> gamma;
  Parameter<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

// x: [N, C, L]. Train mode normalizes over N*L per channel (needs N*L >= 2)
// and updates the running statistics; eval mode uses them.
template <typename T>
Var<T> batchnorm1d(Var<T> x, BatchNorm1d<T>& bn, Mode mode);

// x * tanh(softplus(x)), softplus evaluated without overflow.
template <typename T>
Var<T> mish(Var<T> x);

// Train mode: element i is dropped when the i-th SplitMix64(seed).uniform()
// draw is below `rate`; survivors are scaled by 1 / (1 - rate).
template <typename T>
Var<T> dropout(Var<T> x, double rate, Mode mode, std::uint64_t seed);

// main: [N, C, Lm], skip: [N, C, Ls] with Ls >= Lm and Ls - Lm even; the skip
// is center-cropped before the sum.
template <typename T>
Var<T> residual_add(Var<T> main, Var<T> skip);

template <typename T>
Var<T> scale(Var<T> x, double factor);

// [N, C, L] -> [N, C, 1]
template <typename T>
Var<T> global_avg_pool(Var<T> x);

// Scalar sum(x * weights); used to project op outputs for gradient checks.
template <typename T>
Var<T> weighted_sum(Var<T> x, const Tensor<T>& weights);

// pred, target: [N, J*3, L] with joint-major channels (x0,y0,z0,x1,...).
// Mean over the N*L poses of the mean per-joint Euclidean distance.
template <typename T>
Var<T> mean_joint_distance(Var<T> pred, const Tensor<T>& target, int joints);

// logits: [N, K, 1]; mean negative log-likelihood of `labels`.
template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> labels);

// Scalar elementwise primitives, exposed for tests.
double softplus(double x);
double mish_value(double x);
double mish_derivative(double x);

// Compares reverse-mode gradients of a scalar objective against central
// differences (f(x + h) - f(x - h)) / 2h for every element of every listed
// parameter. `objective` must rebuild its graph on the tape it is given and be
// deterministic. For each parameter the error is max|analytic - numeric|
// divided by max(max|analytic|, max|numeric|), floored at 1e-3 of the largest
// magnitude over all parameters; the largest error is returned.
double finite_difference_check(
    const std::function<Var<double>(Tape<double>&)>& objective,
    const std::vector<Parameter<double>*>& wrt, double h);

}  // namespace occlift::nn
