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

#include "occlift/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Core>

#include "occlift/error.hpp"
#include "occlift/rng.hpp"

namespace occlift::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using Col = Eigen::Matrix<T, Eigen::Dynamic, 1>;

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

[[noreturn]] void shape_error(const std::string& msg) {
  throw Error(ErrorKind::kShapeMismatch, msg);
}

struct NCL {
  std::size_t n, c, l;
};

NCL ncl_of(const std::vector<std::size_t>& shape, const char* op) {
  if (shape.size() == 3) return {shape[0], shape[1], shape[2]};
  if (shape.size() == 2) return {1, shape[0], shape[1]};
  shape_error(std::string(op) + ": expected [N,C,L] or [C,L], got " +
              shape_string(shape));
}

template <typename T>
T softplus_t(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T sigmoid_t(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Tensor<T>::Tensor(std::vector<std::size_t> shape, T fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(std::vector<std::size_t> shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (data_.size() != product(shape_))
    shape_error("tensor data size " + std::to_string(data_.size()) +
                " does not match shape " + shape_string(shape_));
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
void Tensor<T>::reshape(std::vector<std::size_t> shape) {
  if (product(shape) != data_.size())
    shape_error("cannot reshape " + shape_string(shape_) + " to " +
                shape_string(shape));
  shape_ = std::move(shape);
}

// --- Tape ------------------------------------------------------------------

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  return record(std::move(value), false, nullptr);
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value) {
  return record(std::move(value), true, nullptr);
}

template <typename T>
Var<T> Tape<T>::param(Parameter<T>& p) {
  Node node;
  node.borrowed = &p.value;
  node.requires_grad = true;
  node.param = &p;
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, bool requires_grad, Backward backward) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = requires_grad;
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

template <typename T>
const Tensor<T>& Tape<T>::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.borrowed ? *n.borrowed : n.owned;
}

template <typename T>
Tensor<T>& Tape<T>::grad(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.size() == 0 && value(id).size() != 0)
    n.grad = Tensor<T>(value(id).shape());
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> output) {
  if (value(output.id).size() != 1)
    shape_error("backward() needs a scalar output, got " +
                shape_string(value(output.id).shape()));
  grad(output.id)[0] = T(1);
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param) {
      auto& dst = n.param->grad;
      if (dst.size() != n.grad.size()) dst = Tensor<T>(n.param->value.shape());
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += nodes_[i].grad[k];
    }
  }
}

// --- conv1d ----------------------------------------------------------------

template <typename T>
Var<T> conv1d(Var<T> x, Var<T> w, Var<T> b, int dilation) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = b.value();
  if (dilation < 1)
    throw Error(ErrorKind::kInvalidArgument, "conv1d: dilation must be >= 1");
  const NCL in = ncl_of(xv.shape(), "conv1d");
  if (wv.rank() != 3 || wv.dim(1) != in.c)
    shape_error("conv1d: weight " + shape_string(wv.shape()) +
                " does not match input channels " + std::to_string(in.c));
  const std::size_t co = wv.dim(0), ci = in.c, kk = wv.dim(2);
  if (bv.size() != co) shape_error("conv1d: bias size mismatch");
  const std::size_t span = static_cast<std::size_t>(dilation) * (kk - 1);
  if (in.l < span + 1)
    shape_error("conv1d: input length " + std::to_string(in.l) +
                " is shorter than the required minimum " +
                std::to_string(span + 1));
  const std::size_t lout = in.l - span;

  // Taps repacked as contiguous C_out x C_in matrices.
  auto taps = std::make_shared<std::vector<RowMat<T>>>(kk, RowMat<T>(co, ci));
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t i = 0; i < ci; ++i)
      for (std::size_t k = 0; k < kk; ++k)
        (*taps)[k](o, i) = wv[(o * ci + i) * kk + k];
  const Eigen::Map<const Col<T>> bias(bv.data(), co);

  std::vector<std::size_t> oshape =
      xv.rank() == 3 ? std::vector<std::size_t>{in.n, co, lout}
                     : std::vector<std::size_t>{co, lout};
  Tensor<T> y(oshape);
  for (std::size_t n = 0; n < in.n; ++n) {
    ConstMatMap<T> X(xv.data() + n * ci * in.l, ci, in.l);
    MatMap<T> Y(y.data() + n * co * lout, co, lout);
    Y = bias.replicate(1, lout);
    for (std::size_t k = 0; k < kk; ++k)
      Y.noalias() += (*taps)[k] * X.middleCols(k * dilation, lout);
  }

  const bool rg = tape.requires_grad(x.id) || tape.requires_grad(w.id) ||
                  tape.requires_grad(b.id);
  const std::size_t xid = x.id, wid = w.id, bid = b.id;
  return tape.record(
      std::move(y), rg,
      [=](Tape<T>& t, std::size_t self) {
        const auto& gy = t.grad(self);
        const auto& xval = t.value(xid);
        if (t.requires_grad(bid)) {
          auto& gb = t.grad(bid);
          for (std::size_t n = 0; n < in.n; ++n) {
            ConstMatMap<T> GY(gy.data() + n * co * lout, co, lout);
            Eigen::Map<Col<T>>(gb.data(), co) += GY.rowwise().sum();
          }
        }
        if (t.requires_grad(wid)) {
          std::vector<RowMat<T>> gk(kk, RowMat<T>::Zero(co, ci));
          for (std::size_t n = 0; n < in.n; ++n) {
            ConstMatMap<T> GY(gy.data() + n * co * lout, co, lout);
            ConstMatMap<T> X(xval.data() + n * ci * in.l, ci, in.l);
            for (std::size_t k = 0; k < kk; ++k)
              gk[k].noalias() +=
                  GY * X.middleCols(k * dilation, lout).transpose();
          }
          auto& gw = t.grad(wid);
          for (std::size_t o = 0; o < co; ++o)
            for (std::size_t i = 0; i < ci; ++i)
              for (std::size_t k = 0; k < kk; ++k)
                gw[(o * ci + i) * kk + k] += gk[k](o, i);
        }
        if (t.requires_grad(xid)) {
          auto& gx = t.grad(xid);
          for (std::size_t n = 0; n < in.n; ++n) {
            ConstMatMap<T> GY(gy.data() + n * co * lout, co, lout);
            MatMap<T> GX(gx.data() + n * ci * in.l, ci, in.l);
            for (std::size_t k = 0; k < kk; ++k)
              GX.middleCols(k * dilation, lout).noalias() +=
                  (*taps)[k].transpose() * GY;
          }
        }
      });
}

// --- batchnorm -------------------------------------------------------------

template <typename T>
BatchNorm1d<T>::BatchNorm1d(const std::string& name, std::size_t channels)
    : gamma(name + ".gamma", Tensor<T>({channels}, T(1))),
      beta(name + ".beta", Tensor<T>({channels}, T(0))),
      running_mean({channels}, T(0)),
      running_var({channels}, T(1)) {}

template <typename T>
Var<T> batchnorm1d(Var<T> x, BatchNorm1d<T>& bn, Mode mode) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.value();
  const NCL s = ncl_of(xv.shape(), "batchnorm1d");
  if (bn.gamma.value.size() != s.c)
    shape_error("batchnorm1d: " + std::to_string(bn.gamma.value.size()) +
                " channels, input has " + std::to_string(s.c));
  const std::size_t count = s.n * s.l;
  if (mode == Mode::kTrain && count < 2)
    throw Error(ErrorKind::kInvalidArgument,
                "batchnorm1d: degenerate batch (N*L = " +
                    std::to_string(count) + " < 2) in train mode");

  Var<T> gamma = tape.param(bn.gamma);
  Var<T> beta = tape.param(bn.beta);
  const auto& g = bn.gamma.value;
  const auto& bt = bn.beta.value;

  auto inv_std = std::make_shared<std::vector<T>>(s.c);
  auto xhat = std::make_shared<Tensor<T>>(xv.shape());
  Tensor<T> y(xv.shape());
  for (std::size_t c = 0; c < s.c; ++c) {
    double mean, var;
    if (mode == Mode::kTrain) {
      double sum = 0.0;
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t l = 0; l < s.l; ++l)
          sum += xv[(n * s.c + c) * s.l + l];
      mean = sum / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t l = 0; l < s.l; ++l) {
          const double d = xv[(n * s.c + c) * s.l + l] - mean;
          sq += d * d;
        }
      var = sq / static_cast<double>(count);
      const double unbiased = sq / static_cast<double>(count - 1);
      bn.running_mean[c] = static_cast<T>((1.0 - bn.momentum) * bn.running_mean[c] +
                                          bn.momentum * mean);
      bn.running_var[c] = static_cast<T>((1.0 - bn.momentum) * bn.running_var[c] +
                                         bn.momentum * unbiased);
    } else {
      mean = bn.running_mean[c];
      var = bn.running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + bn.eps);
    (*inv_std)[c] = static_cast<T>(is);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t l = 0; l < s.l; ++l) {
        const std::size_t i = (n * s.c + c) * s.l + l;
        const T xh = static_cast<T>((xv[i] - mean) * is);
        (*xhat)[i] = xh;
        y[i] = g[c] * xh + bt[c];
      }
  }

  const std::size_t xid = x.id, gid = gamma.id, bid = beta.id;
  const bool train = mode == Mode::kTrain;
  return tape.record(
      std::move(y), true, [=](Tape<T>& t, std::size_t self) {
        const auto& gy = t.grad(self);
        const auto& gv = t.value(gid);
        auto& gg = t.grad(gid);
        auto& gbeta = t.grad(bid);
        const bool need_x = t.requires_grad(xid);
        for (std::size_t c = 0; c < s.c; ++c) {
          double sum_dy = 0.0, sum_dy_xh = 0.0;
          for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t l = 0; l < s.l; ++l) {
              const std::size_t i = (n * s.c + c) * s.l + l;
              sum_dy += gy[i];
              sum_dy_xh += static_cast<double>(gy[i]) * (*xhat)[i];
            }
          gg[c] += static_cast<T>(sum_dy_xh);
          gbeta[c] += static_cast<T>(sum_dy);
          if (!need_x) continue;
          auto& gx = t.grad(xid);
          const double scale = static_cast<double>(gv[c]) * (*inv_std)[c];
          const double m = static_cast<double>(count);
          for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t l = 0; l < s.l; ++l) {
              const std::size_t i = (n * s.c + c) * s.l + l;
              if (train) {
                gx[i] += static_cast<T>(
                    scale * (gy[i] - sum_dy / m - (*xhat)[i] * sum_dy_xh / m));
              } else {
                gx[i] += static_cast<T>(scale * gy[i]);
              }
            }
        }
      });
}

// --- elementwise -----------------------------------------------------------

double softplus(double x) { return softplus_t(x); }
double mish_value(double x) { return x * std::tanh(softplus_t(x)); }
double mish_derivative(double x) {
  const double th = std::tanh(softplus_t(x));
  return th + x * (1.0 - th * th) * sigmoid_t(x);
}

// tanh(softplus(x)) = n / (n + 2) with n = e^x (e^x + 2): one exp per element.
template <typename T>
inline void mish_kernel(T x, T& y, T& dy) {
  if (x > T(20)) {
    y = x;
    dy = T(1);
    return;
  }
  const T u = std::exp(x);
  const T n = u * (u + T(2));
  const T r = T(1) / (n + T(2));
  y = x * n * r;
  dy = n * r + x * T(4) * u * (u + T(1)) * r * r;
}

template <typename T>
Var<T> mish(Var<T> x) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.value();
  Tensor<T> y(xv.shape());
  const std::size_t xid = x.id;
  if (!tape.requires_grad(xid)) {
    T unused;
    for (std::size_t i = 0; i < xv.size(); ++i) mish_kernel(xv[i], y[i], unused);
    return tape.record(std::move(y), false, nullptr);
  }
  auto dy = std::make_shared<std::vector<T>>(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) mish_kernel(xv[i], y[i], (*dy)[i]);
  return tape.record(std::move(y), true, [xid, dy](Tape<T>& t, std::size_t self) {
    const auto& gy = t.grad(self);
    auto& gx = t.grad(xid);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * (*dy)[i];
  });
}

template <typename T>
Var<T> dropout(Var<T> x, double rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0) || rate >= 1.0)
    throw Error(ErrorKind::kInvalidArgument,
                "dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::kEval || rate == 0.0) return x;
  Tape<T>& tape = *x.tape;
  const auto& xv = x.value();
  auto keep = std::make_shared<std::vector<T>>(xv.size());
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  SplitMix64 rng(seed);
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    (*keep)[i] = rng.uniform() < rate ? T(0) : scale;
    y[i] = xv[i] * (*keep)[i];
  }
  const std::size_t xid = x.id;
  return tape.record(std::move(y), tape.requires_grad(xid),
                     [xid, keep](Tape<T>& t, std::size_t self) {
                       const auto& gy = t.grad(self);
                       auto& gx = t.grad(xid);
                       for (std::size_t i = 0; i < gy.size(); ++i)
                         gx[i] += gy[i] * (*keep)[i];
                     });
}

template <typename T>
Var<T> residual_add(Var<T> main, Var<T> skip) {
  Tape<T>& tape = *main.tape;
  const auto& mv = main.value();
  const auto& sv = skip.value();
  const NCL m = ncl_of(mv.shape(), "residual_add");
  const NCL s = ncl_of(sv.shape(), "residual_add");
  if (m.n != s.n || m.c != s.c)
    shape_error("residual_add: " + shape_string(mv.shape()) + " vs " +
                shape_string(sv.shape()));
  if (s.l < m.l || (s.l - m.l) % 2 != 0)
    shape_error("residual_add: skip length " + std::to_string(s.l) +
                " cannot be center-cropped to " + std::to_string(m.l));
  const std::size_t off = (s.l - m.l) / 2;
  Tensor<T> y(mv.shape());
  for (std::size_t n = 0; n < m.n; ++n)
    for (std::size_t c = 0; c < m.c; ++c)
      for (std::size_t l = 0; l < m.l; ++l)
        y[(n * m.c + c) * m.l + l] =
            mv[(n * m.c + c) * m.l + l] + sv[(n * s.c + c) * s.l + l + off];
  const std::size_t mid = main.id, sid = skip.id;
  return tape.record(
      std::move(y), tape.requires_grad(mid) || tape.requires_grad(sid),
      [=](Tape<T>& t, std::size_t self) {
        const auto& gy = t.grad(self);
        if (t.requires_grad(mid)) {
          auto& gm = t.grad(mid);
          for (std::size_t i = 0; i < gy.size(); ++i) gm[i] += gy[i];
        }
        if (t.requires_grad(sid)) {
          auto& gs = t.grad(sid);
          for (std::size_t n = 0; n < m.n; ++n)
            for (std::size_t c = 0; c < m.c; ++c)
              for (std::size_t l = 0; l < m.l; ++l)
                gs[(n * s.c + c) * s.l + l + off] += gy[(n * m.c + c) * m.l + l];
        }
      });
}

template <typename T>
Var<T> scale(Var<T> x, double factor) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.value();
  const T f = static_cast<T>(factor);
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] * f;
  const std::size_t xid = x.id;
  return tape.record(std::move(y), tape.requires_grad(xid),
                     [xid, f](Tape<T>& t, std::size_t self) {
                       const auto& gy = t.grad(self);
                       auto& gx = t.grad(xid);
                       for (std::size_t i = 0; i < gy.size(); ++i)
                         gx[i] += gy[i] * f;
                     });
}

template <typename T>
Var<T> global_avg_pool(Var<T> x) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.value();
  const NCL s = ncl_of(xv.shape(), "global_avg_pool");
  Tensor<T> y({s.n, s.c, 1});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      double sum = 0.0;
      for (std::size_t l = 0; l < s.l; ++l) sum += xv[(n * s.c + c) * s.l + l];
      y[n * s.c + c] = static_cast<T>(sum / static_cast<double>(s.l));
    }
  const std::size_t xid = x.id;
  return tape.record(std::move(y), tape.requires_grad(xid),
                     [xid, s](Tape<T>& t, std::size_t self) {
                       const auto& gy = t.grad(self);
                       auto& gx = t.grad(xid);
                       const T inv = T(1) / static_cast<T>(s.l);
                       for (std::size_t n = 0; n < s.n; ++n)
                         for (std::size_t c = 0; c < s.c; ++c)
                           for (std::size_t l = 0; l < s.l; ++l)
                             gx[(n * s.c + c) * s.l + l] +=
                                 gy[n * s.c + c] * inv;
                     });
}

template <typename T>
Var<T> weighted_sum(Var<T> x, const Tensor<T>& weights) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.value();
  if (weights.size() != xv.size())
    shape_error("weighted_sum: weight count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i)
    acc += static_cast<double>(xv[i]) * weights[i];
  const std::size_t xid = x.id;
  return tape.record(Tensor<T>({1}, static_cast<T>(acc)),
                     tape.requires_grad(xid),
                     [xid, weights](Tape<T>& t, std::size_t self) {
                       const T g = t.grad(self)[0];
                       auto& gx = t.grad(xid);
                       for (std::size_t i = 0; i < gx.size(); ++i)
                         gx[i] += g * weights[i];
                     });
}

template <typename T>
Var<T> mean_joint_distance(Var<T> pred, const Tensor<T>& target, int joints) {
  Tape<T>& tape = *pred.tape;
  const auto& pv = pred.value();
  if (pv.shape() != target.shape())
    shape_error("mean_joint_distance: prediction " + shape_string(pv.shape()) +
                " vs target " + shape_string(target.shape()));
  const NCL s = ncl_of(pv.shape(), "mean_joint_distance");
  if (s.c != static_cast<std::size_t>(joints) * 3)
    shape_error("mean_joint_distance: channels must be joints*3");
  if (s.n * s.l == 0)
    throw Error(ErrorKind::kInvalidArgument, "mean_joint_distance: empty batch");
  const double denom = static_cast<double>(s.n * s.l * joints);
  // Unit direction of each residual, reused by the backward pass.
  auto dir = std::make_shared<Tensor<T>>(pv.shape());
  double total = 0.0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t l = 0; l < s.l; ++l)
      for (int j = 0; j < joints; ++j) {
        double d[3];
        double sq = 0.0;
        for (int a = 0; a < 3; ++a) {
          const std::size_t i = (n * s.c + j * 3 + a) * s.l + l;
          d[a] = static_cast<double>(pv[i]) - target[i];
          sq += d[a] * d[a];
        }
        const double dist = std::sqrt(sq);
        total += dist;
        for (int a = 0; a < 3; ++a) {
          const std::size_t i = (n * s.c + j * 3 + a) * s.l + l;
          (*dir)[i] = dist > 0.0 ? static_cast<T>(d[a] / dist) : T(0);
        }
      }
  const std::size_t pid = pred.id;
  return tape.record(Tensor<T>({1}, static_cast<T>(total / denom)),
                     tape.requires_grad(pid),
                     [pid, dir, denom](Tape<T>& t, std::size_t self) {
                       const double g = t.grad(self)[0] / denom;
                       auto& gp = t.grad(pid);
                       for (std::size_t i = 0; i < gp.size(); ++i)
                         gp[i] += static_cast<T>(g * (*dir)[i]);
                     });
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> labels) {
  Tape<T>& tape = *logits.tape;
  const auto& lv = logits.value();
  const NCL s = ncl_of(lv.shape(), "softmax_cross_entropy");
  if (s.l != 1 || labels.size() != s.n)
    shape_error("softmax_cross_entropy: expected [N,K,1] logits and N labels");
  auto prob = std::make_shared<std::vector<double>>(s.n * s.c);
  std::vector<int> lab(labels.begin(), labels.end());
  double loss = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    if (lab[n] < 0 || static_cast<std::size_t>(lab[n]) >= s.c)
      throw Error(ErrorKind::kInvalidArgument, "label out of range");
    double mx = lv[n * s.c];
    for (std::size_t c = 1; c < s.c; ++c) mx = std::max<double>(mx, lv[n * s.c + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < s.c; ++c) z += std::exp(lv[n * s.c + c] - mx);
    for (std::size_t c = 0; c < s.c; ++c)
      (*prob)[n * s.c + c] = std::exp(lv[n * s.c + c] - mx) / z;
    loss -= (lv[n * s.c + lab[n]] - mx) - std::log(z);
  }
  loss /= static_cast<double>(s.n);
  const std::size_t lid = logits.id;
  return tape.record(
      Tensor<T>({1}, static_cast<T>(loss)), tape.requires_grad(lid),
      [lid, prob, lab, s](Tape<T>& t, std::size_t self) {
        const double g = t.grad(self)[0] / static_cast<double>(s.n);
        auto& gl = t.grad(lid);
        for (std::size_t n = 0; n < s.n; ++n)
          for (std::size_t c = 0; c < s.c; ++c) {
            const double target = static_cast<int>(c) == lab[n] ? 1.0 : 0.0;
            gl[n * s.c + c] += static_cast<T>(g * ((*prob)[n * s.c + c] - target));
          }
      });
}

double finite_difference_check(
    const std::function<Var<double>(Tape<double>&)>& objective,
    const std::vector<Parameter<double>*>& wrt, double h) {
  for (auto* p : wrt) p->zero_grad();
  {
    Tape<double> tape;
    tape.backward(objective(tape));
  }
  auto eval = [&] {
    Tape<double> tape;
    return objective(tape).value()[0];
  };
  // Per-tensor error relative to that tensor's largest magnitude. Tensors with
  // an identically zero gradient (a conv bias feeding batch norm) would
  // compare two noise floors, so the scale is floored at 1e-3 of the largest
  // gradient over all checked tensors.
  std::vector<std::pair<double, double>> stats;  // (max diff, max magnitude)
  double global_mag = 0.0;
  for (auto* p : wrt) {
    const Tensor<double> analytic = p->grad;
    double max_diff = 0.0, max_mag = 0.0;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double fp = eval();
      p->value[i] = orig - h;
      const double fm = eval();
      p->value[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      max_diff = std::max(max_diff, std::abs(numeric - analytic[i]));
      max_mag = std::max({max_mag, std::abs(numeric), std::abs(analytic[i])});
    }
    stats.emplace_back(max_diff, max_mag);
    global_mag = std::max(global_mag, max_mag);
  }
  double worst = 0.0;
  for (const auto& [diff, mag] : stats) {
    const double scale = std::max(mag, 1e-3 * global_mag);
    if (scale > 0.0) worst = std::max(worst, diff / scale);
  }
  return worst;
}

#define OCCLIFT_INSTANTIATE(T)                                              \
  template class Tensor<T>;                                                 \
  template class Tape<T>;                                                   \
  template struct BatchNorm1d<T>;                                           \
  template Var<T> conv1d<T>(Var<T>, Var<T>, Var<T>, int);                   \
  template Var<T> batchnorm1d<T>(Var<T>, BatchNorm1d<T>&, Mode);            \
  template Var<T> mish<T>(Var<T>);                                          \
  template Var<T> dropout<T>(Var<T>, double, Mode, std::uint64_t);          \
  template Var<T> residual_add<T>(Var<T>, Var<T>);                          \
  template Var<T> scale<T>(Var<T>, double);                                 \
  template Var<T> global_avg_pool<T>(Var<T>);                               \
  template Var<T> weighted_sum<T>(Var<T>, const Tensor<T>&);                \
  template Var<T> mean_joint_distance<T>(Var<T>, const Tensor<T>&, int);    \
  template Var<T> softmax_cross_entropy<T>(Var<T>, std::span<const int>);

OCCLIFT_INSTANTIATE(float)
OCCLIFT_INSTANTIATE(double)

#undef OCCLIFT_INSTANTIATE

}  // namespace occlift::nn
