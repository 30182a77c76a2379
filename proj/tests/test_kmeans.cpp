#include <gtest/gtest.h>

#include "hbbs/kmeans.hpp"
#include "oracles.hpp"

using namespace hbbs;

namespace {

RowMatrix to_matrix(const std::vector<std::vector<double>>& pts) {
  RowMatrix m(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(pts[0].size()));
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts[0].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pts[i][j];
  return m;
}

}  // namespace

TEST(KMeans, SingleClusterIsMean) {
  std::vector<std::vector<double>> pts{{0, 0}, {2, 0}, {4, 3}, {1, 1}};
  auto p = kmeans(to_matrix(pts), 1, 5);
  ASSERT_EQ(p.k, 1u);
  EXPECT_NEAR(p.centroids(0, 0), 7.0 / 4, 1e-12);
  EXPECT_NEAR(p.centroids(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(p.inertia, oracle::optimal_inertia(pts, 1), 1e-12);
}

TEST(KMeans, TwoObviousGroups) {
  auto p = kmeans(to_matrix({{0, 0}, {0, 1}, {10, 10}, {10, 11}}), 2, 1);
  EXPECT_EQ(p.assignment[0], p.assignment[1]);
  EXPECT_EQ(p.assignment[2], p.assignment[3]);
  EXPECT_NE(p.assignment[0], p.assignment[2]);
  EXPECT_NEAR(p.inertia, 1.0, 1e-12);
}

TEST(KMeans, FixpointAndMonotoneTrace) {
  Rng rng(4);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    RowMatrix pts(200, 3);
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      for (Eigen::Index j = 0; j < 3; ++j) pts(i, j) = nd(rng) + (i % 4) * 2.0;
    auto p = kmeans(pts, 6, static_cast<std::uint64_t>(t));
    for (std::size_t i = 1; i < p.inertia_trace.size(); ++i) EXPECT_LE(p.inertia_trace[i], p.inertia_trace[i - 1] + 1e-9);
    ASSERT_TRUE(p.converged);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      const double own = detail::sq_dist(pts, i, p.centroids, static_cast<Eigen::Index>(p.assignment[static_cast<std::size_t>(i)]));
      for (Eigen::Index c = 0; c < p.centroids.rows(); ++c) EXPECT_LE(own, detail::sq_dist(pts, i, p.centroids, c) + 1e-12);
    }
    auto members = p.members();
    for (const auto& m : members) EXPECT_FALSE(m.empty());
  }
}

TEST(KMeans, DeterministicGivenSeed) {
  Rng rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  RowMatrix pts(100, 5);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (Eigen::Index j = 0; j < 5; ++j) pts(i, j) = u(rng);
  auto a = kmeans(pts, 7, 33), b = kmeans(pts, 7, 33);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(KMeans, PermutationGivesSamePartition) {
  std::vector<std::vector<double>> pts{{0, 0}, {0.5, 0.2}, {5, 5}, {5.2, 4.9}, {9, 0}, {9.1, 0.3}, {0.2, 0.4}};
  RowMatrix a = to_matrix(pts);
  RowMatrix init(3, 2);
  init << 0, 0, 5, 5, 9, 0;
  auto pa = kmeans_from_centroids(a, init);
  std::vector<std::size_t> perm{6, 3, 0, 5, 1, 4, 2};
  std::vector<std::vector<double>> shuffled;
  for (auto i : perm) shuffled.push_back(pts[i]);
  auto pb = kmeans_from_centroids(to_matrix(shuffled), init);
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < perm.size(); ++j)
      EXPECT_EQ(pb.assignment[i] == pb.assignment[j], pa.assignment[perm[i]] == pa.assignment[perm[j]]);
  EXPECT_NEAR(pa.inertia, pb.inertia, 1e-12);
}

TEST(KMeans, ReducesKForFewDistinctPoints) {
  auto p = kmeans(to_matrix({{1, 1}, {1, 1}, {2, 2}}), 3, 0);
  EXPECT_EQ(p.requested_k, 3u);
  EXPECT_EQ(p.k, 2u);
  EXPECT_EQ(p.assignment[0], p.assignment[1]);
  EXPECT_NE(p.assignment[0], p.assignment[2]);
  EXPECT_EQ(p.inertia, 0.0);
  EXPECT_THROW(kmeans(to_matrix({{1, 1}}), 0, 0), Error);
}

TEST(KMeans, EmptyClusterRepaired) {
  // Both initial centroids sit on the far right; the left points must still
  // end up with a live cluster.
  RowMatrix pts(4, 1);
  pts << 0, 1, 10, 11;
  RowMatrix init(3, 1);
  init << 10, 11, 100;
  auto p = kmeans_from_centroids(pts, init);
  for (const auto& m : p.members()) EXPECT_FALSE(m.empty());
}

TEST(KMeans, NearOptimalOnSmallFixtures) {
  Rng rng(123);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> npts(3, 8), kk(1, 3);
  for (int t = 0; t < 100; ++t) {
    const int n = npts(rng);
    const std::size_t k = static_cast<std::size_t>(std::min(kk(rng), n));
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < n; ++i) {
      const double cx = 20.0 * static_cast<double>(i % static_cast<int>(k));
      pts.push_back({cx + u(rng), u(rng)});
    }
    auto p = kmeans(to_matrix(pts), k, static_cast<std::uint64_t>(t));
    const double best = oracle::optimal_inertia(pts, p.k);
    EXPECT_GE(p.inertia, best - 1e-9);
    EXPECT_LE(p.inertia, best * 1.01 + 1e-12);
  }
}
