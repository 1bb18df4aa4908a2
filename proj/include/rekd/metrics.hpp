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

#ifndef REKD_METRICS_HPP_
#define REKD_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rekd/numerics.hpp"
#include "rekd/relation_miner.hpp"

namespace rekd {

/// Reported in place of a quantity that is undefined (e.g. purity with no
/// positives).
inline constexpr double kUndefined = -1.0;

struct RelationQuality {
  double pn_mean = 0.0;
  double tpn_mean = 0.0;
  double purity = kUndefined;
  // Raw totals, so qualities from several batches can be merged.
  double pn_total = 0.0;
  double tpn_total = 0.0;
  std::size_t anchors = 0;

  void merge(const RelationQuality& o) {
    pn_total += o.pn_total;
    tpn_total += o.tpn_total;
    anchors += o.anchors;
    pn_mean = anchors ? pn_total / static_cast<double>(anchors) : 0.0;
    tpn_mean = anchors ? tpn_total / static_cast<double>(anchors) : 0.0;
    purity = pn_total > 0 ? tpn_total / pn_total : kUndefined;
  }
};

/// PN = mined positives per anchor, TPN = those sharing the anchor's true
/// class, purity = sum TPN / sum PN.
inline RelationQuality relation_quality(const BinaryMask& labels, std::span<const int> anchor_truth,
                                        std::span<const int> queue_truth) {
  if (anchor_truth.size() != labels.rows() || queue_truth.size() != labels.cols())
    throw std::invalid_argument("relation_quality: truth lengths do not match the " +
                                std::to_string(labels.rows()) + "x" +
                                std::to_string(labels.cols()) + " label mask");
  RelationQuality q;
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    for (std::size_t j = 0; j < labels.cols(); ++j) {
      if (!labels(i, j)) continue;
      q.pn_total += 1.0;
      if (anchor_truth[i] == queue_truth[j]) q.tpn_total += 1.0;
    }
  }
  q.anchors = labels.rows();
  RelationQuality merged;
  merged.merge(q);
  return merged;
}

namespace detail {

struct Contingency {
  std::vector<std::vector<double>> table;  // rows: ids of a, cols: ids of b
  std::vector<double> row_sum, col_sum;
  double n = 0.0;
};

inline std::vector<std::size_t> compact_ids(std::span<const int> v, std::size_t& count) {
  std::map<int, std::size_t> ids;
  for (int x : v) ids.emplace(x, 0);
  std::size_t k = 0;
  for (auto& [_, id] : ids) id = k++;
  count = k;
  std::vector<std::size_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = ids[v[i]];
  return out;
}

inline Contingency contingency(std::span<const int> a, std::span<const int> b, const char* op) {
  if (a.empty()) throw std::invalid_argument(std::string(op) + ": empty input");
  if (a.size() != b.size()) throw std::invalid_argument(std::string(op) + ": length mismatch");
  std::size_t ka = 0, kb = 0;
  const auto ia = compact_ids(a, ka);
  const auto ib = compact_ids(b, kb);
  Contingency t;
  t.table.assign(ka, std::vector<double>(kb, 0.0));
  t.row_sum.assign(ka, 0.0);
  t.col_sum.assign(kb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    t.table[ia[i]][ib[i]] += 1.0;
    t.row_sum[ia[i]] += 1.0;
    t.col_sum[ib[i]] += 1.0;
  }
  t.n = static_cast<double>(a.size());
  return t;
}

inline double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= (c / n) * std::log(c / n);
  return h;
}

inline double choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace detail

/// Normalized mutual information I(a;b) / sqrt(H(a) H(b)). Label -1 is an
/// ordinary cluster id. Two constant partitions score 1; one constant
/// partition against a non-constant one scores 0.
inline double nmi(std::span<const int> a, std::span<const int> b) {
  const auto t = detail::contingency(a, b, "nmi");
  const double ha = detail::entropy(t.row_sum, t.n);
  const double hb = detail::entropy(t.col_sum, t.n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < t.table.size(); ++i)
    for (std::size_t j = 0; j < t.table[i].size(); ++j) {
      const double c = t.table[i][j];
      if (c > 0) mi += (c / t.n) * std::log(c * t.n / (t.row_sum[i] * t.col_sum[j]));
    }
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

/// Adjusted Rand index from pair counts.
inline double ari(std::span<const int> a, std::span<const int> b) {
  const auto t = detail::contingency(a, b, "ari");
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& row : t.table)
    for (double c : row) sum_ij += detail::choose2(c);
  for (double c : t.row_sum) sum_a += detail::choose2(c);
  for (double c : t.col_sum) sum_b += detail::choose2(c);
  const double total = detail::choose2(t.n);
  if (total == 0.0) return 1.0;
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both partitions trivial and identical in kind
  return (sum_ij - expected) / (max_index - expected);
}

/// Each predicted cluster votes for its most frequent true label (ties go
/// to the lowest label); returns the accuracy of that mapping.
inline double cluster_acc(std::span<const int> pred, std::span<const int> truth) {
  if (pred.empty()) throw std::invalid_argument("cluster_acc: empty input");
  if (pred.size() != truth.size()) throw std::invalid_argument("cluster_acc: length mismatch");
  std::map<int, std::map<int, std::size_t>> votes;
  for (std::size_t i = 0; i < pred.size(); ++i) ++votes[pred[i]][truth[i]];
  std::size_t correct = 0;
  for (const auto& [_, counts] : votes) {
    std::size_t best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c);  // map order: lowest label first
    correct += best;
  }
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

/// Fraction of entries assigned to some prototype.
inline double effective_rate(std::span<const int> queue_idx) {
  if (queue_idx.empty()) return 0.0;
  std::size_t hit = 0;
  for (int v : queue_idx) hit += v >= 0 ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(queue_idx.size());
}

struct MatchingDistribution {
  std::vector<std::size_t> counts;  // per prototype, outliers excluded
  double normalized_entropy = 0.0;  // entropy / log M, 1 = uniform
};

inline MatchingDistribution matching_distribution(std::span<const int> queue_idx, std::size_t m) {
  MatchingDistribution d;
  d.counts.assign(m, 0);
  double total = 0.0;
  for (int v : queue_idx) {
    if (v < 0) continue;
    if (static_cast<std::size_t>(v) >= m)
      throw std::out_of_range("matching_distribution: prototype id " + std::to_string(v) +
                              " >= M=" + std::to_string(m));
    ++d.counts[static_cast<std::size_t>(v)];
    total += 1.0;
  }
  if (m > 1 && total > 0) {
    std::vector<double> c(d.counts.begin(), d.counts.end());
    d.normalized_entropy = detail::entropy(c, total) / std::log(static_cast<double>(m));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Same-class similarity histogram

struct Histogram {
  std::vector<double> bin_edges;
  std::vector<std::size_t> counts;
  double mean = 0.0;
  std::size_t samples = 0;

  void write_csv(std::ostream& os) const {
    os << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < counts.size(); ++b)
      os << bin_edges[b] << ',' << bin_edges[b + 1] << ',' << counts[b] << '\n';
  }
};

inline constexpr std::size_t kDefaultPairBudget = 1'000'000;

/// Histogram over [-1, 1] of cosine similarity between same-class pairs.
/// Enumerates all pairs when they fit in `pair_budget`, otherwise draws
/// `pair_budget` random same-class pairs.
inline Histogram similarity_histogram(const Matrix& embeddings, std::span<const int> truth,
                                      std::size_t bins, std::size_t pair_budget = kDefaultPairBudget,
                                      std::uint64_t seed = 0) {
  if (truth.size() != embeddings.rows())
    throw std::invalid_argument("similarity_histogram: truth length does not match embeddings");
  if (bins == 0) throw std::invalid_argument("similarity_histogram: bins must be positive");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < truth.size(); ++i) by_class[truth[i]].push_back(i);
  double pairs = 0.0;
  for (const auto& [_, members] : by_class) pairs += detail::choose2(static_cast<double>(members.size()));
  if (pairs == 0.0) throw std::invalid_argument("similarity_histogram: no same-class pair exists");

  Histogram h;
  h.bin_edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b)
    h.bin_edges[b] = -1.0 + 2.0 * static_cast<double>(b) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  double sum = 0.0;
  auto add = [&](std::size_t i, std::size_t j) {
    const double s = std::clamp(dot(embeddings.row(i), embeddings.row(j)), -1.0, 1.0);
    auto b = static_cast<std::size_t>((s + 1.0) / 2.0 * static_cast<double>(bins));
    h.counts[std::min(b, bins - 1)] += 1;
    sum += s;
    ++h.samples;
  };

  if (pairs <= static_cast<double>(pair_budget)) {
    for (const auto& [_, members] : by_class)
      for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b) add(members[a], members[b]);
  } else {
    // Pick a class with probability proportional to its pair count, then a
    // uniform pair inside it.
    std::vector<std::pair<double, const std::vector<std::size_t>*>> cdf;
    double acc = 0.0;
    for (const auto& [_, members] : by_class) {
      const double w = detail::choose2(static_cast<double>(members.size()));
      if (w == 0.0) continue;
      acc += w;
      cdf.emplace_back(acc, &members);
    }
    RngStream rng(seed);
    for (std::size_t k = 0; k < pair_budget; ++k) {
      const double u = rng.uniform() * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u,
                                 [](double x, const auto& e) { return x < e.first; });
      if (it == cdf.end()) --it;
      const auto& members = *it->second;
      const std::size_t i = rng.below(members.size());
      std::size_t j = rng.below(members.size() - 1);
      if (j >= i) ++j;
      add(members[i], members[j]);
    }
  }
  h.mean = sum / static_cast<double>(h.samples);
  return h;
}

}  // namespace rekd

#endif  // REKD_METRICS_HPP_
