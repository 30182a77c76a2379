#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "hbbs/core.hpp"
#include "hbbs/rng.hpp"
#include "hbbs/surrogate.hpp"

namespace hbbs {

struct KMeansOptions {
  std::size_t max_iters = 300;
  std::size_t n_init = 1;  // independent k-means++ restarts; lowest inertia wins
};

/// Cluster ids are 0-based here (0..k-1).
struct ClusterPartition {
  std::size_t requested_k = 0;
  std::size_t k = 0;  // < requested_k only when there are fewer distinct points
  std::vector<std::size_t> assignment;
  RowMatrix centroids;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // after each Lloyd update
  std::size_t iterations = 0;
  bool converged = false;

  std::vector<std::vector<SeqIndex>> members() const {
    std::vector<std::vector<SeqIndex>> out(k);
    for (SeqIndex i = 0; i < assignment.size(); ++i) out[assignment[i]].push_back(i);
    return out;
  }
};

namespace detail {

inline double sq_dist(const RowMatrix& a, Eigen::Index i, const RowMatrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index d = 0; d < a.cols(); ++d) {
    const double t = a(i, d) - b(j, d);
    s += t * t;
  }
  return s;
}

/// Nearest centroid, ties to the lowest id.
inline std::size_t nearest(const RowMatrix& pts, Eigen::Index i, const RowMatrix& cents, double* dist_out) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < cents.rows(); ++c) {
    const double d = sq_dist(pts, i, cents, c);
    if (d < bd) {
      bd = d;
      best = static_cast<std::size_t>(c);
    }
  }
  if (dist_out) *dist_out = bd;
  return best;
}

inline double partition_inertia(const RowMatrix& pts, const std::vector<std::size_t>& assign,
                                const RowMatrix& cents) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    s += sq_dist(pts, i, cents, static_cast<Eigen::Index>(assign[static_cast<std::size_t>(i)]));
  return s;
}

inline RowMatrix kmeanspp_seed(const RowMatrix& pts, std::size_t k, Rng& rng) {
  const auto n = pts.rows();
  RowMatrix cents(static_cast<Eigen::Index>(k), pts.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  cents.row(0) = pts.row(first(rng));
  std::vector<double> mind(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) mind[static_cast<std::size_t>(i)] = sq_dist(pts, i, cents, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : mind) total += d;
    // Callers guarantee at least k distinct points, so total > 0 here.
    const double target = unit(rng) * total;
    double acc = 0.0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = mind[static_cast<std::size_t>(i)];
      if (d <= 0.0) continue;
      pick = i;
      acc += d;
      if (acc > target) break;
    }
    cents.row(static_cast<Eigen::Index>(c)) = pts.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      mind[static_cast<std::size_t>(i)] =
          std::min(mind[static_cast<std::size_t>(i)], sq_dist(pts, i, cents, static_cast<Eigen::Index>(c)));
  }
  return cents;
}

}  // namespace detail

/// Lloyd iterations from the given centroids until the assignment is a
/// fixpoint or max_iters is reached. An empty cluster takes over the point
/// farthest from its own centroid.
inline ClusterPartition kmeans_from_centroids(const RowMatrix& pts, RowMatrix cents, std::size_t max_iters = 300) {
  const auto n = pts.rows();
  const auto k = static_cast<std::size_t>(cents.rows());
  ClusterPartition part;
  part.requested_k = k;
  part.k = k;
  part.assignment.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n));
  std::vector<std::size_t> counts(k);
  bool have_prev = false;

  for (std::size_t it = 0; it < max_iters; ++it) {
    std::vector<std::size_t> next(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      next[static_cast<std::size_t>(i)] = detail::nearest(pts, i, cents, &dist[static_cast<std::size_t>(i)]);
    if (have_prev && next == part.assignment) {
      part.converged = true;
      break;
    }
    part.assignment = std::move(next);
    have_prev = true;

    std::fill(counts.begin(), counts.end(), 0);
    for (auto a : part.assignment) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      Eigen::Index far = -1;
      double fd = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto si = static_cast<std::size_t>(i);
        if (counts[part.assignment[si]] > 1 && dist[si] > fd) {
          fd = dist[si];
          far = i;
        }
      }
      if (far < 0) break;
      const auto sf = static_cast<std::size_t>(far);
      --counts[part.assignment[sf]];
      part.assignment[sf] = c;
      counts[c] = 1;
      dist[sf] = 0.0;
      cents.row(static_cast<Eigen::Index>(c)) = pts.row(far);
    }

    RowMatrix sums = RowMatrix::Zero(cents.rows(), cents.cols());
    for (Eigen::Index i = 0; i < n; ++i)
      sums.row(static_cast<Eigen::Index>(part.assignment[static_cast<std::size_t>(i)])) += pts.row(i);
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0) cents.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / double(counts[c]);
    part.inertia_trace.push_back(detail::partition_inertia(pts, part.assignment, cents));
    ++part.iterations;
  }
  part.centroids = std::move(cents);
  part.inertia = detail::partition_inertia(pts, part.assignment, part.centroids);
  return part;
}

/// k-means under the ℓ2 metric with k-means++ seeding. When k exceeds the
/// number of distinct points, k is reduced and every distinct point becomes
/// its own cluster (reported through requested_k / k).
inline ClusterPartition kmeans(const RowMatrix& pts, std::size_t k, std::uint64_t seed, const KMeansOptions& opt = {}) {
  if (k < 1) throw Error(Errc::ConfigInvalid, "k must be >= 1");
  if (pts.rows() == 0) throw Error(Errc::EmptyPool, "no points to cluster");

  std::map<std::vector<double>, std::size_t> distinct;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    std::vector<double> row(pts.row(i).data(), pts.row(i).data() + pts.cols());
    distinct.emplace(std::move(row), distinct.size());
    if (distinct.size() > k) break;
  }
  if (distinct.size() < k) {
    // K_EXCEEDS_POINTS: one cluster per distinct point, numbered by first appearance.
    ClusterPartition part;
    part.requested_k = k;
    part.k = distinct.size();
    part.centroids.resize(static_cast<Eigen::Index>(part.k), pts.cols());
    part.assignment.resize(static_cast<std::size_t>(pts.rows()));
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      std::vector<double> row(pts.row(i).data(), pts.row(i).data() + pts.cols());
      const auto id = distinct.at(row);
      part.assignment[static_cast<std::size_t>(i)] = id;
      part.centroids.row(static_cast<Eigen::Index>(id)) = pts.row(i);
    }
    part.inertia = 0.0;
    part.inertia_trace.push_back(0.0);
    part.converged = true;
    return part;
  }

  Rng rng(seed);
  ClusterPartition best;
  for (std::size_t r = 0; r < std::max<std::size_t>(opt.n_init, 1); ++r) {
    auto part = kmeans_from_centroids(pts, detail::kmeanspp_seed(pts, k, rng), opt.max_iters);
    if (r == 0 || part.inertia < best.inertia) best = std::move(part);
  }
  best.requested_k = k;
  return best;
}

}  // namespace hbbs
