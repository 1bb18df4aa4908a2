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

#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rekd/metrics.hpp"
#include "rekd/relation_miner.hpp"
#include "rekd/synth_data.hpp"

namespace rekd {
namespace {

TEST(SphericalKmeans, RecoversWellSeparatedClusters) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const LabeledDataset d = generate_mixture(MixtureSpec{3, 16, 100, 1.0, 0.05}, RngStream(seed));
    const KMeansResult km = spherical_kmeans(d.points, 3, 50, RngStream(100 + seed));
    EXPECT_GE(ari(km.assignment, d.labels), 0.99) << "seed " << seed;
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(norm2(km.centroids.row(c)), 1.0, 1e-12);
  }
}

TEST(SphericalKmeans, ObjectiveNeverDecreases) {
  const LabeledDataset d = generate_mixture(MixtureSpec{6, 8, 40, 0.4, 0.3}, RngStream(3));
  const KMeansResult km = spherical_kmeans(d.points, 6, 100, RngStream(4));
  ASSERT_GE(km.objective.size(), 1u);
  for (std::size_t r = 1; r < km.objective.size(); ++r) EXPECT_GE(km.objective[r], km.objective[r - 1] - 1e-9);
}

TEST(SphericalKmeans, RejectsTooManyClusters) {
  EXPECT_THROW(spherical_kmeans(Matrix{{1, 0}, {0, 1}}, 3, 10, RngStream(1)), std::invalid_argument);
}

TEST(PrototypeBank, NormalizesAndValidates) {
  const PrototypeBank bank(Matrix{{3, 4}}, 0.8, 0.8);
  EXPECT_NEAR(bank.prototypes()(0, 0), 0.6, 1e-15);
  EXPECT_THROW(PrototypeBank(Matrix{{0, 0}}, 0.8, 0.8), std::invalid_argument);
  EXPECT_THROW(PrototypeBank(Matrix{{1, 0}}, 0.0, 0.8), std::invalid_argument);
  EXPECT_THROW(PrototypeBank(Matrix{{1, 0}}, 0.8, 1.0), std::invalid_argument);
}

TEST(AssignPrototypes, ThresholdAndTies) {
  const double r = std::sqrt(0.5);
  const PrototypeBank bank(Matrix{{1, 0}, {0, 1}}, 0.7, 0.8);
  const Matrix e{{1, 0}, {r, r}, {-1, 0}, {0.6, 0.8}};
  const Assignment a = assign_prototypes(bank, e);
  EXPECT_EQ(a.idx, (std::vector<int>{0, 0, -1, 1}));  // tie goes to the lower index
  EXPECT_NEAR(a.sim[2], 0.0, 1e-15);                    // best sim kept even when unassigned

  const PrototypeBank exact(Matrix{{1, 0}}, 0.6, 0.8);
  EXPECT_EQ(assign_prototypes(exact, Matrix{{0.6, 0.8}}).idx[0], 0);  // sim == theta is assigned
}

TEST(UpdatePrototypes, MomentumRangeAndUnitNorm) {
  RngStream rng(5);
  Matrix protos(4, 6);
  for (double& v : protos.data()) v = rng.normal();
  PrototypeBank bank(protos, 0.1, 0.8);
  for (int step = 0; step < 50; ++step) {
    Matrix z(8, 6);
    for (double& v : z.data()) v = rng.normal();
    z = l2_normalize_rows(z).values;
    const Assignment a = assign_prototypes(bank, z);
    for (double m : update_prototypes(bank, z, a.idx, a.sim)) {
      EXPECT_GE(m, 0.8);
      EXPECT_LE(m, 1.0);
    }
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(norm2(bank.prototypes().row(k)), 1.0, 1e-12);
  }
}

TEST(UpdatePrototypes, MatchesHandComputedStep) {
  PrototypeBank bank(Matrix{{1, 0}, {0, 1}}, 0.5, 0.8);
  const Matrix z{{0.6, 0.8}, {1, 0}};
  const std::vector<int> idx{1, -1};
  const std::vector<double> sim{0.8, 1.0};
  const auto ms = update_prototypes(bank, z, idx, sim);
  ASSERT_EQ(ms.size(), 1u);
  const double m = 1 - 0.2 * 0.8;
  EXPECT_NEAR(ms[0], m, 1e-15);
  const double x = (1 - m) * 0.6, y = (1 - m) * 0.8 + m;
  const double n = std::hypot(x, y);
  EXPECT_NEAR(bank.prototypes()(1, 0), x / n, 1e-15);
  EXPECT_NEAR(bank.prototypes()(1, 1), y / n, 1e-15);
  EXPECT_EQ(bank.prototypes()(0, 0), 1.0);  // unassigned anchor leaves others alone
}

TEST(UpdatePrototypes, SequentialWithinBatch) {
  PrototypeBank a(Matrix{{1, 0}}, 0.1, 0.5);
  PrototypeBank b(Matrix{{1, 0}}, 0.1, 0.5);
  const Matrix z{{0.6, 0.8}, {0.8, 0.6}};
  const std::vector<int> idx{0, 0};
  const std::vector<double> sim{0.6, 0.8};
  update_prototypes(a, z, idx, sim);
  update_prototypes(b, Matrix{{0.6, 0.8}}, std::vector<int>{0}, std::vector<double>{0.6});
  update_prototypes(b, Matrix{{0.8, 0.6}}, std::vector<int>{0}, std::vector<double>{0.8});
  EXPECT_EQ(a.prototypes(), b.prototypes());
}

TEST(MineRelations, MatchesDoubleLoopOracle) {
  RngStream rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(16), l = 1 + rng.below(64), m = 1 + rng.below(8);
    std::vector<int> anchor(n), queue(l);
    for (int& v : anchor) v = static_cast<int>(rng.below(m + 1)) - 1;
    for (int& v : queue) v = static_cast<int>(rng.below(m + 1)) - 1;
    const RelationLabels got = mine_relations(anchor, queue);
    EXPECT_EQ(got.labels, oracle::mine_relations(anchor, queue)) << "trial " << trial;
    EXPECT_EQ(got.anchor_idx, anchor);
  }
}

TEST(MineRelations, OutliersNeverPair) {
  const std::vector<int> anchor{-1, 2};
  const std::vector<int> queue{-1, 2, -1};
  const RelationLabels r = mine_relations(anchor, queue);
  EXPECT_EQ(r.labels.row_count(0), 0u);
  EXPECT_FALSE(r.labels(1, 0));
  EXPECT_TRUE(r.labels(1, 1));
}

}  // namespace
}  // namespace rekd
