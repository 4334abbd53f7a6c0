// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include "irr/error.hpp"
#include "irr/indexer.hpp"
#include "irr/kernels.hpp"

namespace irr::index {
namespace {

void check_points(const DenseMatrix& points, std::size_t clusters) {
  if (clusters == 0) throw ConfigError("kmeans: cluster count must be positive");
  if (points.rows() < clusters) {
    throw ConfigError("kmeans: " + std::to_string(points.rows()) + " points for " +
                      std::to_string(clusters) + " clusters");
  }
  if (!all_finite(points)) throw DataError("kmeans: non-finite input");
}

DenseMatrix distances(const DenseMatrix& points, const DenseMatrix& centroids) {
  DenseMatrix d(points.rows(), centroids.rows());
  kernels::squared_distances(points.data(), centroids.data(), d.data(), points.rows(),
                             centroids.rows(), points.cols());
  return d;
}

// Lowest index wins ties: strict < keeps the first minimum.
std::vector<std::size_t> nearest(const DenseMatrix& dist) {
  std::vector<std::size_t> out(dist.rows());
  for (std::size_t i = 0; i < dist.rows(); ++i) {
    const auto row = dist.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] < row[best]) best = c;
    }
    out[i] = best;
  }
  return out;
}

void reseed_empty_clusters(const DenseMatrix& points, DenseMatrix& centroids,
                           std::vector<std::size_t>& assign) {
  const std::size_t k = centroids.rows();
  std::vector<std::size_t> counts(k, 0);
  for (auto a : assign) ++counts[a];
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    std::size_t far = points.rows();
    double far_dist = -1.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
      if (counts[assign[i]] < 2) continue;
      double d = 0.0;
      for (std::size_t p = 0; p < points.cols(); ++p) {
        const double diff = points(i, p) - centroids(assign[i], p);
        d += diff * diff;
      }
      if (d > far_dist) {
        far_dist = d;
        far = i;
      }
    }
    // nothing to split: singletons only, or every point sits on its centroid
    if (far == points.rows() || far_dist <= 0.0) continue;
    --counts[assign[far]];
    assign[far] = c;
    counts[c] = 1;
    std::copy(points.row(far).begin(), points.row(far).end(), centroids.row(c).begin());
  }
}

void update_means(const DenseMatrix& points, DenseMatrix& centroids,
                  std::span<const std::size_t> assign) {
  DenseMatrix sums(centroids.rows(), centroids.cols());
  std::vector<std::size_t> counts(centroids.rows(), 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    auto dst = sums.row(assign[i]);
    const auto src = points.row(i);
    for (std::size_t p = 0; p < src.size(); ++p) dst[p] += src[p];
    ++counts[assign[i]];
  }
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    if (counts[c] == 0) continue;
    const double inv = 1.0 / static_cast<double>(counts[c]);
    for (std::size_t p = 0; p < centroids.cols(); ++p) centroids(c, p) = sums(c, p) * inv;
  }
}

}  // namespace

double within_cluster_sum_of_squares(const DenseMatrix& points, const DenseMatrix& centroids,
                                     std::span<const std::size_t> assignments) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (std::size_t p = 0; p < points.cols(); ++p) {
      const double diff = points(i, p) - centroids(assignments[i], p);
      total += diff * diff;
    }
  }
  return total;
}

DenseMatrix kmeans_plus_plus(const DenseMatrix& points, std::size_t clusters, Rng& rng) {
  check_points(points, clusters);
  const std::size_t n = points.rows();
  DenseMatrix centroids(clusters, points.cols());
  std::vector<bool> chosen(n, false);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());

  auto take = [&](std::size_t c, std::size_t i) {
    chosen[i] = true;
    std::copy(points.row(i).begin(), points.row(i).end(), centroids.row(c).begin());
    for (std::size_t j = 0; j < n; ++j) {
      double d = 0.0;
      for (std::size_t p = 0; p < points.cols(); ++p) {
        const double diff = points(j, p) - points(i, p);
        d += diff * diff;
      }
      best[j] = std::min(best[j], d);
    }
  };

  take(0, rng.below(n));
  for (std::size_t c = 1; c < clusters; ++c) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += best[j];
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cumulative = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        cumulative += best[j];
        if (best[j] > 0.0 && cumulative > target) {
          pick = j;
          break;
        }
      }
      if (pick == n) {
        // rounding left target at the very end; take the last positive-weight point
        for (std::size_t j = n; j-- > 0;) {
          if (best[j] > 0.0) {
            pick = j;
            break;
          }
        }
      }
    } else {
      // every remaining point coincides with a chosen centroid
      for (std::size_t j = 0; j < n && pick == n; ++j) {
        if (!chosen[j]) pick = j;
      }
    }
    take(c, pick);
  }
  return centroids;
}

KMeansResult lloyd(const DenseMatrix& points, DenseMatrix centroids, std::size_t max_iters) {
  check_points(points, centroids.rows());
  if (max_iters == 0) throw ConfigError("kmeans: max_iters must be at least 1");
  if (centroids.cols() != points.cols()) {
    throw DimensionError("kmeans: centroid width " + centroids.shape_string() +
                         " does not match points " + points.shape_string());
  }
  KMeansResult result;
  result.assignments = nearest(distances(points, centroids));
  result.wcss_history.push_back(
      within_cluster_sum_of_squares(points, centroids, result.assignments));

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    auto assign = nearest(distances(points, centroids));
    const bool changed = iter == 0 || assign != result.assignments;
    const auto before_reseed = assign;
    reseed_empty_clusters(points, centroids, assign);
    const bool reseeded = assign != before_reseed;
    update_means(points, centroids, assign);
    result.assignments = std::move(assign);
    result.wcss_history.push_back(
        within_cluster_sum_of_squares(points, centroids, result.assignments));
    result.iterations = iter + 1;
    if (!changed && !reseeded) {
      result.converged = true;
      break;
    }
  }
  result.centroids = std::move(centroids);
  return result;
}

KMeansResult kmeans(const DenseMatrix& points, std::size_t clusters, std::size_t max_iters,
                    std::uint64_t seed) {
  check_points(points, clusters);
  Rng rng(seed);
  return lloyd(points, kmeans_plus_plus(points, clusters, rng), max_iters);
}

}  // namespace irr::index
