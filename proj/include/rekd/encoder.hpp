// Copyright 2026 The ReKD Lab Authors.
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

#ifndef REKD_ENCODER_HPP_
#define REKD_ENCODER_HPP_

#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "rekd/numerics.hpp"

namespace rekd {

namespace detail {

inline std::uint64_t next_param_version() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

inline std::string dims_string(const std::vector<std::size_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
  return s + "]";
}

}  // namespace detail

/// Affine layers with ReLU between them; the final affine output is
/// row-normalized onto the unit sphere. The last layer is the projection
/// head, so hidden_features() returns the input to it.
class MlpEncoder {
 public:
  MlpEncoder() = default;

  /// Uniform init in +-sqrt(6 / (fan_in + fan_out)); zero biases.
  MlpEncoder(std::vector<std::size_t> dims, RngStream rng) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw std::invalid_argument("MlpEncoder: need at least input and output dims");
    for (std::size_t d : dims_)
      if (d == 0) throw std::invalid_argument("MlpEncoder: zero-width layer");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      const double bound = std::sqrt(6.0 / static_cast<double>(dims_[l] + dims_[l + 1]));
      Matrix w(dims_[l], dims_[l + 1]);
      for (double& v : w.data()) v = rng.uniform(-bound, bound);
      weights_.push_back(std::move(w));
      biases_.emplace_back(1, dims_[l + 1]);
    }
    touch();
  }

  /// Builds an encoder from explicit parameters (tests, checkpoint load).
  static MlpEncoder from_parameters(std::vector<Matrix> weights, std::vector<Matrix> biases) {
    if (weights.empty() || weights.size() != biases.size())
      throw std::invalid_argument("MlpEncoder: weights/biases count mismatch");
    MlpEncoder enc;
    enc.dims_.push_back(weights.front().rows());
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != enc.dims_.back())
        throw std::invalid_argument("MlpEncoder: layer " + std::to_string(l) + " expects " +
                                    std::to_string(weights[l].rows()) + " inputs, previous gives " +
                                    std::to_string(enc.dims_.back()));
      if (biases[l].rows() != 1 || biases[l].cols() != weights[l].cols())
        throw std::invalid_argument("MlpEncoder: bias " + std::to_string(l) + " has shape " +
                                    biases[l].shape());
      enc.dims_.push_back(weights[l].cols());
    }
    enc.weights_ = std::move(weights);
    enc.biases_ = std::move(biases);
    enc.touch();
    return enc;
  }

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t num_layers() const { return weights_.size(); }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t embed_dim() const { return dims_.back(); }

  const Matrix& weight(std::size_t l) const { return weights_[l]; }
  const Matrix& bias(std::size_t l) const { return biases_[l]; }

  /// Mutable access invalidates outstanding forward caches.
  Matrix& mutable_weight(std::size_t l) {
    touch();
    return weights_[l];
  }
  Matrix& mutable_bias(std::size_t l) {
    touch();
    return biases_[l];
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  std::uint64_t version() const { return version_; }

  bool same_architecture(const MlpEncoder& other) const { return dims_ == other.dims_; }

 private:
  void touch() { version_ = detail::next_param_version(); }

  std::vector<std::size_t> dims_;
  std::vector<Matrix> weights_;  // in x out
  std::vector<Matrix> biases_;   // 1 x out
  std::uint64_t version_ = 0;
};

/// Activations recorded by forward() for the matching backward().
struct ForwardCache {
  std::uint64_t version = 0;
  std::vector<std::size_t> dims;
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // affine output of each layer
  std::vector<double> norms;   // pre-normalization row norms of the last layer
  std::vector<bool> degenerate;
};

struct ForwardResult {
  Matrix z;
  ForwardCache cache;
};

struct EncoderGrads {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
};

namespace detail {

inline void add_bias(Matrix& a, const Matrix& bias) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    for (std::size_t c = 0; c < a.cols(); ++c) row[c] += bias(0, c);
  }
}

inline void relu_inplace(Matrix& a) {
  for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
}

inline void check_input(const MlpEncoder& enc, const Matrix& x, const char* op) {
  if (x.cols() != enc.input_dim())
    throw std::invalid_argument(std::string(op) + ": input has " + std::to_string(x.cols()) +
                                " columns, encoder " + dims_string(enc.dims()) + " expects " +
                                std::to_string(enc.input_dim()));
}

}  // namespace detail

inline ForwardResult forward(const MlpEncoder& enc, const Matrix& x) {
  detail::check_input(enc, x, "forward");
  ForwardResult out;
  ForwardCache& cache = out.cache;
  cache.version = enc.version();
  cache.dims = enc.dims();
  Matrix h = x;
  for (std::size_t l = 0; l < enc.num_layers(); ++l) {
    Matrix a = matmul(h, enc.weight(l));
    detail::add_bias(a, enc.bias(l));
    cache.inputs.push_back(std::move(h));
    h = a;
    if (l + 1 < enc.num_layers()) detail::relu_inplace(h);
    cache.pre.push_back(std::move(a));
  }
  cache.norms.resize(h.rows());
  for (std::size_t r = 0; r < h.rows(); ++r) cache.norms[r] = norm2(h.row(r));
  NormalizedRows nz = l2_normalize_rows(h);
  cache.degenerate = std::move(nz.degenerate);
  out.z = std::move(nz.values);
  return out;
}

/// Output of the last hidden layer (after ReLU); the raw input for a
/// single-layer encoder. Used as frozen features for linear probing.
inline Matrix hidden_features(const MlpEncoder& enc, const Matrix& x) {
  detail::check_input(enc, x, "hidden_features");
  Matrix h = x;
  for (std::size_t l = 0; l + 1 < enc.num_layers(); ++l) {
    Matrix a = matmul(h, enc.weight(l));
    detail::add_bias(a, enc.bias(l));
    detail::relu_inplace(a);
    h = std::move(a);
  }
  return h;
}

/// Gradients of a scalar loss with respect to every parameter, given dL/dz.
/// Backpropagates through the row normalization with the projection
/// Jacobian (I - z z^T) / |y|; degenerate rows pass no gradient.
inline EncoderGrads backward(const MlpEncoder& enc, const ForwardCache& cache, const Matrix& dz) {
  if (cache.version != enc.version() || cache.dims != enc.dims())
    throw std::logic_error("backward: forward cache does not match current encoder parameters");
  const std::size_t n = cache.norms.size();
  if (dz.rows() != n || dz.cols() != enc.embed_dim())
    throw std::invalid_argument("backward: dL/dz has shape " + dz.shape() + ", expected " +
                                std::to_string(n) + "x" + std::to_string(enc.embed_dim()));

  const Matrix& y = cache.pre.back();
  Matrix da(n, enc.embed_dim());
  for (std::size_t r = 0; r < n; ++r) {
    if (cache.degenerate[r]) continue;
    const double inv = 1.0 / cache.norms[r];
    auto yr = y.row(r);
    auto gr = dz.row(r);
    double radial = 0.0;
    for (std::size_t c = 0; c < yr.size(); ++c) radial += yr[c] * inv * gr[c];
    auto out = da.row(r);
    for (std::size_t c = 0; c < yr.size(); ++c) out[c] = (gr[c] - yr[c] * inv * radial) * inv;
  }

  EncoderGrads g;
  g.weights.resize(enc.num_layers());
  g.biases.resize(enc.num_layers());
  for (std::size_t l = enc.num_layers(); l-- > 0;) {
    g.weights[l] = matmul_tn(cache.inputs[l], da);
    Matrix db(1, da.cols());
    for (std::size_t r = 0; r < da.rows(); ++r)
      for (std::size_t c = 0; c < da.cols(); ++c) db(0, c) += da(r, c);
    g.biases[l] = std::move(db);
    if (l == 0) break;
    Matrix dh = matmul_nt(da, enc.weight(l));
    const Matrix& prev_pre = cache.pre[l - 1];
    for (std::size_t i = 0; i < dh.size(); ++i)
      if (!(prev_pre.data()[i] > 0.0)) dh.data()[i] = 0.0;
    da = std::move(dh);
  }
  return g;
}

/// SGD with heavy-ball momentum and L2 weight decay:
///   v <- momentum * v + grad + weight_decay * w;  w <- w - lr * v
class SgdState {
 public:
  SgdState(double lr, double momentum, double weight_decay)
      : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
    if (!(lr > 0)) throw std::invalid_argument("SgdState: lr must be > 0");
    if (!(momentum >= 0 && momentum < 1))
      throw std::invalid_argument("SgdState: momentum must be in [0,1)");
    if (!(weight_decay >= 0)) throw std::invalid_argument("SgdState: weight_decay must be >= 0");
  }

  double lr() const { return lr_; }
  void set_lr(double lr) {
    if (!(lr >= 0)) throw std::invalid_argument("SgdState: lr must be >= 0");
    lr_ = lr;
  }
  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }

  const EncoderGrads& velocity() const { return velocity_; }

  void step(MlpEncoder& enc, const EncoderGrads& grads) {
    if (grads.weights.size() != enc.num_layers() || grads.biases.size() != enc.num_layers())
      throw std::invalid_argument("sgd_step: gradient layer count mismatch");
    if (velocity_.weights.empty()) {
      for (std::size_t l = 0; l < enc.num_layers(); ++l) {
        velocity_.weights.emplace_back(enc.weight(l).rows(), enc.weight(l).cols());
        velocity_.biases.emplace_back(1, enc.bias(l).cols());
      }
    }
    for (std::size_t l = 0; l < enc.num_layers(); ++l) {
      update(enc.mutable_weight(l), grads.weights[l], velocity_.weights[l]);
      update(enc.mutable_bias(l), grads.biases[l], velocity_.biases[l]);
    }
  }

 private:
  void update(Matrix& w, const Matrix& g, Matrix& v) const {
    if (w.rows() != g.rows() || w.cols() != g.cols())
      throw std::invalid_argument("sgd_step: gradient shape " + g.shape() + " vs parameter " +
                                  w.shape());
    auto& wd = w.data();
    const auto& gd = g.data();
    auto& vd = v.data();
    for (std::size_t i = 0; i < wd.size(); ++i) {
      vd[i] = momentum_ * vd[i] + gd[i] + weight_decay_ * wd[i];
      wd[i] -= lr_ * vd[i];
    }
  }

  double lr_;
  double momentum_;
  double weight_decay_;
  EncoderGrads velocity_;
};

inline void sgd_step(MlpEncoder& enc, const EncoderGrads& grads, SgdState& state) {
  state.step(enc, grads);
}

/// target <- m * target + (1 - m) * online, parameter-wise.
inline void mean_teacher_update(const MlpEncoder& online, MlpEncoder& target, double m) {
  if (!online.same_architecture(target))
    throw std::invalid_argument("mean_teacher_update: architecture mismatch " +
                                detail::dims_string(online.dims()) + " vs " +
                                detail::dims_string(target.dims()));
  if (!(m >= 0 && m <= 1)) throw std::invalid_argument("mean_teacher_update: m must be in [0,1]");
  auto blend = [m](Matrix& t, const Matrix& o) {
    auto& td = t.data();
    const auto& od = o.data();
    for (std::size_t i = 0; i < td.size(); ++i) td[i] = m * td[i] + (1.0 - m) * od[i];
  };
  for (std::size_t l = 0; l < online.num_layers(); ++l) {
    blend(target.mutable_weight(l), online.weight(l));
    blend(target.mutable_bias(l), online.bias(l));
  }
}

inline double cosine_lr(std::size_t epoch, std::size_t total, double base_lr) {
  if (total == 0 || epoch > total)
    throw std::invalid_argument("cosine_lr: need 0 <= epoch <= total and total > 0");
  return base_lr * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(total)));
}

}  // namespace rekd

#endif  // REKD_ENCODER_HPP_
