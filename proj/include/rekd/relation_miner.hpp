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

#ifndef REKD_RELATION_MINER_HPP_
#define REKD_RELATION_MINER_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rekd/numerics.hpp"

namespace rekd {

// ---------------------------------------------------------------------------
// Spherical k-means

struct KMeansResult {
  Matrix centroids;                // M x dim, unit rows
  std::vector<int> assignment;     // nearest centroid per point (cosine)
  std::vector<double> objective;   // sum of max cosine similarity, per round
  std::size_t rounds = 0;
};

namespace detail {

/// Argmax over each row of a similarity matrix; ties go to the lowest index.
inline void row_argmax(const Matrix& sim, std::vector<int>& idx, std::vector<double>& best) {
  idx.assign(sim.rows(), -1);
  best.assign(sim.rows(), -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < sim.rows(); ++r) {
    auto row = sim.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] > best[r]) {
        best[r] = row[c];
        idx[r] = static_cast<int>(c);
      }
    }
  }
}

}  // namespace detail

/// Lloyd iterations with cosine assignment and normalized-mean centroids.
/// Seeding is greedy k-means++ on the cosine distance 1 - cos. A cluster that
/// empties is re-seeded from the point farthest from every centroid.
inline KMeansResult spherical_kmeans(const Matrix& points, std::size_t m, std::size_t iters,
                                     RngStream rng) {
  const std::size_t n = points.rows();
  if (m == 0) throw std::invalid_argument("spherical_kmeans: need at least one centroid");
  if (n < m)
    throw std::invalid_argument("spherical_kmeans: " + std::to_string(n) +
                                " points cannot seed " + std::to_string(m) + " centroids");
  const std::size_t dim = points.cols();

  KMeansResult res;
  res.centroids = Matrix(m, dim);
  std::vector<double> closest(n, std::numeric_limits<double>::infinity());
  auto distances_to = [&](std::size_t point, std::vector<double>& out) {
    auto src = points.row(point);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::max(0.0, 1.0 - dot(points.row(i), src));
  };
  auto place = [&](std::size_t k, std::size_t point) {
    auto src = points.row(point);
    std::copy(src.begin(), src.end(), res.centroids.row(k).begin());
  };
  std::vector<double> dist;
  const std::size_t first = rng.below(n);
  place(0, first);
  distances_to(first, closest);
  // Greedy k-means++: draw a few candidates per step by D^2 weight (1 - cos
  // is half the squared chord length) and keep the one that lowers the
  // potential most.
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(m)));
  std::vector<double> trial_closest, best_closest;
  for (std::size_t k = 1; k < m; ++k) {
    double total = 0.0;
    for (double d : closest) total += d;
    std::size_t pick = 0;
    double pick_potential = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      std::size_t cand = n - 1;
      if (total <= 0.0) {
        cand = rng.below(n);
      } else {
        double target = rng.uniform() * total;
        for (std::size_t i = 0; i < n; ++i) {
          target -= closest[i];
          if (target < 0.0) {
            cand = i;
            break;
          }
        }
      }
      distances_to(cand, dist);
      trial_closest.resize(n);
      double potential = 0.0;
      for (std::size_t i = 0; i < n; ++i) potential += trial_closest[i] = std::min(closest[i], dist[i]);
      if (potential < pick_potential) {
        pick_potential = potential;
        pick = cand;
        best_closest.swap(trial_closest);
      }
    }
    place(k, pick);
    closest.swap(best_closest);
  }

  std::vector<int> prev;
  std::vector<double> best;
  for (std::size_t round = 0; round < std::max<std::size_t>(iters, 1); ++round) {
    detail::row_argmax(cosine_sim(points, res.centroids), res.assignment, best);
    double obj = 0.0;
    for (double b : best) obj += b;
    res.objective.push_back(obj);
    res.rounds = round + 1;
    if (res.assignment == prev) break;
    prev = res.assignment;

    Matrix sums(m, dim);
    std::vector<std::size_t> counts(m, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = sums.row(static_cast<std::size_t>(res.assignment[i]));
      auto src = points.row(i);
      for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
      ++counts[static_cast<std::size_t>(res.assignment[i])];
    }
    for (std::size_t k = 0; k < m; ++k) {
      if (counts[k] == 0) continue;
      auto s = sums.row(k);
      const double len = norm2(s);
      if (len < kDegenerateNormEps) continue;  // keep the previous centroid
      auto dst = res.centroids.row(k);
      for (std::size_t d = 0; d < dim; ++d) dst[d] = s[d] / len;
    }
    for (std::size_t k = 0; k < m; ++k) {
      if (counts[k] != 0) continue;
      // Farthest point from its best centroid under the current bank.
      Matrix sim = cosine_sim(points, res.centroids);
      std::vector<int> tmp;
      std::vector<double> sbest;
      detail::row_argmax(sim, tmp, sbest);
      const auto it = std::min_element(sbest.begin(), sbest.end());
      const auto far = static_cast<std::size_t>(it - sbest.begin());
      auto src = points.row(far);
      std::copy(src.begin(), src.end(), res.centroids.row(k).begin());
    }
  }
  detail::row_argmax(cosine_sim(points, res.centroids), res.assignment, best);
  return res;
}

// ---------------------------------------------------------------------------
// Prototype bank

class PrototypeBank {
 public:
  PrototypeBank(Matrix prototypes, double theta, double beta)
      : prototypes_(std::move(prototypes)), theta_(theta), beta_(beta) {
    if (!(theta > 0 && theta <= 1)) throw std::invalid_argument("PrototypeBank: theta must be in (0,1]");
    if (!(beta > 0 && beta < 1)) throw std::invalid_argument("PrototypeBank: beta must be in (0,1)");
    if (prototypes_.rows() == 0) throw std::invalid_argument("PrototypeBank: empty bank");
    NormalizedRows nz = l2_normalize_rows(prototypes_);
    if (nz.degenerate_count() != 0)
      throw std::invalid_argument("PrototypeBank: zero-norm prototype");
    prototypes_ = std::move(nz.values);
  }

  const Matrix& prototypes() const { return prototypes_; }
  Matrix& mutable_prototypes() { return prototypes_; }
  std::size_t size() const { return prototypes_.rows(); }
  std::size_t dim() const { return prototypes_.cols(); }
  double theta() const { return theta_; }
  double beta() const { return beta_; }

 private:
  Matrix prototypes_;
  double theta_;
  double beta_;
};

struct Assignment {
  std::vector<int> idx;     // prototype id, or -1 below threshold
  std::vector<double> sim;  // best similarity regardless of threshold
};

/// Nearest prototype by cosine similarity; -1 when the best similarity is
/// below theta. A similarity exactly equal to theta is assigned.
inline Assignment assign_prototypes(const PrototypeBank& bank, const Matrix& e) {
  Assignment a;
  detail::row_argmax(cosine_sim(e, bank.prototypes()), a.idx, a.sim);
  for (std::size_t i = 0; i < a.idx.size(); ++i)
    if (!(a.sim[i] >= bank.theta())) a.idx[i] = -1;
  return a;
}

/// Similarity-weighted momentum update, applied anchor by anchor in batch
/// order:
///   m = 1 - (1 - beta) * S(z, p_k);  p_k <- normalize((1 - m) z + m p_k)
/// Returns the momentum coefficient used for each update that fired.
inline std::vector<double> update_prototypes(PrototypeBank& bank, const Matrix& anchors,
                                             std::span<const int> idx,
                                             std::span<const double> sim) {
  if (idx.size() != anchors.rows() || sim.size() != anchors.rows())
    throw std::invalid_argument("update_prototypes: idx/sim length must match anchor count");
  if (anchors.cols() != bank.dim())
    throw std::invalid_argument("update_prototypes: anchor dim " + std::to_string(anchors.cols()) +
                                " vs bank dim " + std::to_string(bank.dim()));
  std::vector<double> used;
  Matrix& protos = bank.mutable_prototypes();
  for (std::size_t i = 0; i < anchors.rows(); ++i) {
    if (idx[i] < 0) continue;
    const auto k = static_cast<std::size_t>(idx[i]);
    if (k >= bank.size()) throw std::out_of_range("update_prototypes: prototype index out of range");
    const double s = std::clamp(sim[i], -1.0, 1.0);
    const double m = 1.0 - (1.0 - bank.beta()) * s;
    auto p = protos.row(k);
    auto z = anchors.row(i);
    for (std::size_t d = 0; d < p.size(); ++d) p[d] = (1.0 - m) * z[d] + m * p[d];
    const double len = norm2(p);
    if (len >= kDegenerateNormEps)
      for (double& v : p) v /= len;
    used.push_back(m);
  }
  return used;
}

// ---------------------------------------------------------------------------
// Relation mining

struct RelationLabels {
  BinaryMask labels;          // N x L, 1 = positive pair
  std::vector<int> anchor_idx;  // prototype of each anchor, -1 if unmatched
};

/// Anchor i and candidate j form a positive pair iff both carry the same
/// prototype id and the anchor's id is not -1.
inline RelationLabels mine_relations(std::span<const int> anchor_assign,
                                     std::span<const int> queue_idx) {
  RelationLabels out{BinaryMask(anchor_assign.size(), queue_idx.size()),
                     std::vector<int>(anchor_assign.begin(), anchor_assign.end())};
  for (std::size_t i = 0; i < anchor_assign.size(); ++i) {
    const int a = anchor_assign[i];
    if (a < 0) continue;
    for (std::size_t j = 0; j < queue_idx.size(); ++j)
      if (queue_idx[j] == a) out.labels.set(i, j, true);
  }
  return out;
}

}  // namespace rekd

#endif  // REKD_RELATION_MINER_HPP_
