// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "irr/error.hpp"
#include "irr/indexer.hpp"
#include "irr/kernels.hpp"

namespace irr::index {
namespace {

double mean_row_norm(const DenseMatrix& m) {
  double total = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sq = 0.0;
    for (double v : m.row(r)) sq += v * v;
    total += std::sqrt(sq);
  }
  return m.rows() == 0 ? 0.0 : total / static_cast<double>(m.rows());
}

std::size_t saturating_pow(std::size_t base, std::size_t exp) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (out > std::numeric_limits<std::size_t>::max() / base) {
      return std::numeric_limits<std::size_t>::max();
    }
    out *= base;
  }
  return out;
}

// Greedy capacity-constrained assignment: within each parent group, (item,
// centroid) pairs are taken in ascending distance order while the child
// prefix still has room. Reduces to plain nearest assignment when no child
// overflows.
std::vector<std::size_t> constrained_assign(const DenseMatrix& residuals,
                                            const DenseMatrix& centroids,
                                            const std::vector<std::vector<std::size_t>>& groups,
                                            std::size_t capacity) {
  const std::size_t k = centroids.rows();
  DenseMatrix dist(residuals.rows(), k);
  kernels::squared_distances(residuals.data(), centroids.data(), dist.data(), residuals.rows(), k,
                             residuals.cols());
  std::vector<std::size_t> assign(residuals.rows(), 0);
  for (const auto& members : groups) {
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    pairs.reserve(members.size() * k);
    for (auto item : members) {
      for (std::size_t c = 0; c < k; ++c) pairs.emplace_back(dist(item, c), item, c);
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<std::size_t> load(k, 0);
    std::map<std::size_t, bool> done;
    std::size_t placed = 0;
    for (const auto& [d, item, c] : pairs) {
      if (placed == members.size()) break;
      if (load[c] >= capacity || done[item]) continue;
      done[item] = true;
      assign[item] = c;
      ++load[c];
      ++placed;
    }
    if (placed != members.size()) {
      throw CapacityError("residual_quantize: prefix group of " + std::to_string(members.size()) +
                          " items cannot fit " + std::to_string(k) + " x " +
                          std::to_string(capacity) + " slots");
    }
  }
  return assign;
}

void recompute_means(const DenseMatrix& residuals, DenseMatrix& centroids,
                     std::span<const std::size_t> assign) {
  DenseMatrix sums(centroids.rows(), centroids.cols());
  std::vector<std::size_t> counts(centroids.rows(), 0);
  for (std::size_t i = 0; i < residuals.rows(); ++i) {
    for (std::size_t p = 0; p < residuals.cols(); ++p) sums(assign[i], p) += residuals(i, p);
    ++counts[assign[i]];
  }
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t p = 0; p < centroids.cols(); ++p) {
      centroids(c, p) = sums(c, p) / static_cast<double>(counts[c]);
    }
  }
}

}  // namespace

ResidualQuantization residual_quantize(const DenseMatrix& embeddings,
                                       const ResidualOptions& options) {
  const std::size_t n = embeddings.rows();
  const std::size_t k = options.codebook_size;
  if (options.levels == 0) throw ConfigError("residual_quantize: levels must be at least 1");
  if (options.capacity_depth != 0 && options.capacity_depth < options.levels) {
    throw ConfigError("residual_quantize: capacity depth shorter than level count");
  }
  if (options.capacity_depth != 0 && n > saturating_pow(k, options.capacity_depth)) {
    throw CapacityError("residual_quantize: " + std::to_string(n) + " items exceed " +
                        std::to_string(k) + "^" + std::to_string(options.capacity_depth) +
                        " distinct SIDs");
  }

  ResidualQuantization out;
  out.codes.assign(n, std::vector<std::uint32_t>(options.levels, 0));
  DenseMatrix residual = embeddings;
  out.mean_residual_norm.push_back(mean_row_norm(residual));

  // parent prefix -> member items, refined level by level
  std::vector<std::vector<std::size_t>> groups(1);
  for (std::size_t i = 0; i < n; ++i) groups[0].push_back(i);

  for (std::size_t level = 1; level <= options.levels; ++level) {
    KMeansResult km =
        kmeans(residual, k, options.max_iters, derive_seed(options.seed, level));
    std::vector<std::size_t> assign = km.assignments;
    DenseMatrix centroids = std::move(km.centroids);

    if (options.capacity_depth != 0) {
      const std::size_t capacity = saturating_pow(k, options.capacity_depth - level);
      bool overflow = false;
      for (const auto& members : groups) {
        std::vector<std::size_t> load(k, 0);
        for (auto item : members) overflow |= ++load[assign[item]] > capacity;
      }
      if (overflow) {
        std::vector<std::size_t> previous;
        for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
          assign = constrained_assign(residual, centroids, groups, capacity);
          if (assign == previous) break;
          recompute_means(residual, centroids, assign);
          previous = assign;
        }
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      out.codes[i][level - 1] = static_cast<std::uint32_t>(assign[i]);
      auto r = residual.row(i);
      const auto c = centroids.row(assign[i]);
      for (std::size_t p = 0; p < r.size(); ++p) r[p] -= c[p];
    }
    out.mean_residual_norm.push_back(mean_row_norm(residual));
    out.centroid_sets.push_back({level, std::move(centroids)});

    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> next;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (auto item : groups[g]) next[{g, assign[item]}].push_back(item);
    }
    groups.clear();
    for (auto& [key, members] : next) groups.push_back(std::move(members));
  }
  return out;
}

}  // namespace irr::index
