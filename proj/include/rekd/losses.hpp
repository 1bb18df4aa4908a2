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

#ifndef REKD_LOSSES_HPP_
#define REKD_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rekd/numerics.hpp"

namespace rekd {

/// Temperature-scaled similarity logits s = z.u / tau against a candidate
/// set, with a binary positive mask.
struct ContrastBatch {
  Matrix logits;
  BinaryMask labels;
  double tau = 1.0;

  void validate(const char* op) const {
    if (!(tau > 0)) throw std::invalid_argument(std::string(op) + ": tau must be > 0");
    if (labels.rows() != logits.rows() || labels.cols() != logits.cols())
      throw std::invalid_argument(std::string(op) + ": labels shape does not match logits " +
                                  logits.shape());
  }
};

struct LossOutput {
  double value = 0.0;   // mean over rows
  Matrix grad_logits;   // d value / d logits
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

inline double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(sum_i exp(sign * x_i)) over entries where mask == want; -inf if none.
inline double masked_lse(std::span<const double> x, const BinaryMask& mask, std::size_t r,
                         bool want, double sign) {
  double mx = kNegInf;
  for (std::size_t c = 0; c < x.size(); ++c)
    if (mask(r, c) == want) mx = std::max(mx, sign * x[c]);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c)
    if (mask(r, c) == want) s += std::exp(sign * x[c] - mx);
  return mx + std::log(s);
}

/// Row r of a mask as a 0/1 array.
inline void mask_row(const BinaryMask& mask, std::size_t r, Eigen::ArrayXd& out) {
  out.resize(static_cast<Eigen::Index>(mask.cols()));
  for (std::size_t c = 0; c < mask.cols(); ++c) out[static_cast<Eigen::Index>(c)] = mask(r, c) ? 1.0 : 0.0;
}

inline Eigen::Map<const Eigen::ArrayXd> row_array(const Matrix& m, std::size_t r) {
  return {m.row(r).data(), static_cast<Eigen::Index>(m.cols())};
}

inline Eigen::Map<Eigen::ArrayXd> row_array(Matrix& m, std::size_t r) {
  return {m.row(r).data(), static_cast<Eigen::Index>(m.cols())};
}

}  // namespace detail

/// Single-positive contrastive loss, row form
///   L = log(1 + sum_n exp(s_n) * exp(-s_pos)).
/// Every row must carry exactly one positive.
inline LossOutput nce_loss(const ContrastBatch& batch) {
  batch.validate("nce_loss");
  const std::size_t n = batch.logits.rows();
  const std::size_t k = batch.logits.cols();
  LossOutput out{0.0, Matrix(n, k)};
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::ArrayXd e;
  for (std::size_t r = 0; r < n; ++r) {
    if (batch.labels.row_count(r) != 1)
      throw std::invalid_argument("nce_loss: row " + std::to_string(r) + " has " +
                                  std::to_string(batch.labels.row_count(r)) +
                                  " positives, expected exactly 1");
    if (k == 1) continue;  // no negatives: log(1 + 0)
    std::size_t pos = 0;
    while (!batch.labels(r, pos)) ++pos;
    const auto s = detail::row_array(batch.logits, r);
    const double sp = s[static_cast<Eigen::Index>(pos)];
    double mx = detail::kNegInf;
    for (std::size_t c = 0; c < k; ++c)
      if (c != pos) mx = std::max(mx, s[static_cast<Eigen::Index>(c)]);
    // t = log sum_n exp(s_n - s_pos)
    e = (s - mx).exp();
    e[static_cast<Eigen::Index>(pos)] = 0.0;
    const double acc = e.sum();
    const double t = mx - sp + std::log(acc);
    out.value += detail::softplus(t);
    const double sig = detail::sigmoid(t) * inv_n;
    auto g = detail::row_array(out.grad_logits, r);
    g = e * (sig / acc);
    g[static_cast<Eigen::Index>(pos)] = -sig;
  }
  out.value *= inv_n;
  return out;
}

/// Multi-positive relation contrastive loss, row form
///   L = log(1 + A * B),  A = sum_{neg} exp(s_n),  B = sum_{pos} exp(-s_p),
/// evaluated as softplus(log A + log B). Rows without positives (or
/// without negatives) contribute zero loss and zero gradient.
inline LossOutput relcon_loss(const ContrastBatch& batch) {
  batch.validate("relcon_loss");
  const std::size_t n = batch.logits.rows();
  const std::size_t k = batch.logits.cols();
  LossOutput out{0.0, Matrix(n, k)};
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::ArrayXd pos, e_neg, e_pos;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t n_pos = batch.labels.row_count(r);
    if (n_pos == 0 || n_pos == k) continue;
    const auto s = detail::row_array(batch.logits, r);
    detail::mask_row(batch.labels, r, pos);
    const double mx_neg = (pos > 0.5).select(detail::kNegInf, s).maxCoeff();
    const double mx_pos = (pos > 0.5).select(-s, detail::kNegInf).maxCoeff();
    // Shifted exponentials; lanes of the other class are zeroed by select.
    e_neg = (pos > 0.5).select(0.0, (s - mx_neg).exp());
    e_pos = (pos > 0.5).select((-s - mx_pos).exp(), 0.0);
    const double a = e_neg.sum();
    const double b = e_pos.sum();
    const double t = mx_neg + std::log(a) + mx_pos + std::log(b);
    out.value += detail::softplus(t);
    // dL/ds_n = sigmoid(t) * exp(s_n) / A ; dL/ds_p = -sigmoid(t) * exp(-s_p) / B
    const double sig = detail::sigmoid(t) * inv_n;
    detail::row_array(out.grad_logits, r) = e_neg * (sig / a) - e_pos * (sig / b);
  }
  out.value *= inv_n;
  return out;
}

// ---------------------------------------------------------------------------
// TP / FP / TN / FN decomposition and the lower-bound check

struct TermDecomposition {
  std::vector<std::size_t> tp, fp, tn, fn;
  double sum_tp = 0.0, sum_fp = 0.0, sum_tn = 0.0, sum_fn = 0.0;  // sum of exp(s)
};

/// Splits every row's candidates by (predicted label, ground truth).
inline std::vector<TermDecomposition> decompose_terms(const ContrastBatch& batch,
                                                      const BinaryMask& truth) {
  batch.validate("decompose_terms");
  if (truth.rows() != batch.logits.rows() || truth.cols() != batch.logits.cols())
    throw std::invalid_argument("decompose_terms: truth mask shape does not match logits " +
                                batch.logits.shape());
  std::vector<TermDecomposition> rows(batch.logits.rows());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto& d = rows[r];
    for (std::size_t c = 0; c < batch.logits.cols(); ++c) {
      const double e = std::exp(batch.logits(r, c));
      const bool pred = batch.labels(r, c);
      const bool real = truth(r, c);
      if (pred && real) {
        d.tp.push_back(c);
        d.sum_tp += e;
      } else if (pred) {
        d.fp.push_back(c);
        d.sum_fp += e;
      } else if (!real) {
        d.tn.push_back(c);
        d.sum_tn += e;
      } else {
        d.fn.push_back(c);
        d.sum_fn += e;
      }
    }
  }
  return rows;
}

struct BoundReport {
  /// All four sets non-empty, min s over TP > max s over TN and
  /// min s over FN > max s over FP.
  bool ordering_holds = false;
  /// ordering_holds plus |TP| >= |TN| and |FN| >= |FP|; under this premise
  /// both inequalities below are guaranteed.
  bool premise_holds = false;
  double cross_lhs = 0.0;  // sum_TP exp(s) * sum_FN exp(s)
  double cross_rhs = 0.0;  // sum_TN exp(s) * sum_FP exp(s)
  double lhs = 0.0;        // relation contrastive loss of the row
  double rhs = 0.0;        // log(1 + sum_TN exp(s) / sum_TP exp(s))
  bool inequality_holds = false;  // cross_lhs > cross_rhs and lhs > rhs
};

/// Per-row check of the cross-product inequality and the TP/TN lower
/// bound on the relation contrastive loss.
inline std::vector<BoundReport> verify_bound(const ContrastBatch& batch, const BinaryMask& truth) {
  const auto parts = decompose_terms(batch, truth);
  std::vector<BoundReport> out(parts.size());
  for (std::size_t r = 0; r < parts.size(); ++r) {
    const auto& d = parts[r];
    auto& rep = out[r];
    auto s = batch.logits.row(r);
    auto extreme = [&](const std::vector<std::size_t>& set, bool want_min) {
      double v = want_min ? std::numeric_limits<double>::infinity() : detail::kNegInf;
      for (std::size_t c : set) v = want_min ? std::min(v, s[c]) : std::max(v, s[c]);
      return v;
    };
    const bool nonempty = !d.tp.empty() && !d.fp.empty() && !d.tn.empty() && !d.fn.empty();
    rep.ordering_holds = nonempty && extreme(d.tp, true) > extreme(d.tn, false) &&
                         extreme(d.fn, true) > extreme(d.fp, false);
    rep.premise_holds =
        rep.ordering_holds && d.tp.size() >= d.tn.size() && d.fn.size() >= d.fp.size();

    rep.cross_lhs = d.sum_tp * d.sum_fn;
    rep.cross_rhs = d.sum_tn * d.sum_fp;
    double log_a = detail::masked_lse(s, batch.labels, r, false, 1.0);
    double log_b = detail::masked_lse(s, batch.labels, r, true, -1.0);
    rep.lhs = (log_a == detail::kNegInf || log_b == detail::kNegInf) ? 0.0
                                                                     : detail::softplus(log_a + log_b);
    rep.rhs = d.sum_tp > 0 ? std::log1p(d.sum_tn / d.sum_tp) : std::numeric_limits<double>::infinity();
    rep.inequality_holds = rep.cross_lhs > rep.cross_rhs && rep.lhs > rep.rhs;
  }
  return out;
}

}  // namespace rekd

#endif  // REKD_LOSSES_HPP_
