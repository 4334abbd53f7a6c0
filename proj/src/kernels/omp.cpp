// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "row_kernels.hpp"

namespace irr::kernels {
namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = 1 << 15;

using Index = std::int64_t;

}  // namespace

namespace omp {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  const Index rows = static_cast<Index>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (Index i = 0; i < rows; ++i) detail::gemm_nn_row(a, b, c, i, k, n, accumulate);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  const Index rows = static_cast<Index>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (Index i = 0; i < rows; ++i) detail::gemm_nt_row(a, b, c, i, k, n, accumulate);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  const Index rows = static_cast<Index>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (Index i = 0; i < rows; ++i) detail::gemm_tn_row(a, b, c, i, m, k, n, accumulate);
}

void causal_attention_forward(const AttentionShape& shape, const double* q, const double* k,
                              const double* v, double* out, double* probs) {
  const Index blocks = static_cast<Index>(shape.batch * shape.heads);
  const std::size_t work = shape.batch * shape.steps * shape.steps * shape.width();
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (Index blk = 0; blk < blocks; ++blk) {
    const auto b = static_cast<std::size_t>(blk) / shape.heads;
    const auto h = static_cast<std::size_t>(blk) % shape.heads;
    detail::attention_forward_block(shape, b, h, q, k, v, out, probs);
  }
}

void causal_attention_backward(const AttentionShape& shape, const double* q, const double* k,
                               const double* v, const double* probs, const double* dout,
                               double* dq, double* dk, double* dv) {
  const Index blocks = static_cast<Index>(shape.batch * shape.heads);
  const std::size_t work = shape.batch * shape.steps * shape.steps * shape.width();
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (Index blk = 0; blk < blocks; ++blk) {
    const auto b = static_cast<std::size_t>(blk) / shape.heads;
    const auto h = static_cast<std::size_t>(blk) % shape.heads;
    detail::attention_backward_block(shape, b, h, q, k, v, probs, dout, dq, dk, dv);
  }
}

void squared_distances(const double* points, const double* centroids, double* out,
                       std::size_t n, std::size_t centroid_count, std::size_t dim) {
  const Index rows = static_cast<Index>(n);
#pragma omp parallel for schedule(static) if (n * centroid_count * dim > kParallelWork)
  for (Index i = 0; i < rows; ++i) {
    detail::squared_distance_row(points, centroids, out, i, centroid_count, dim);
  }
}

}  // namespace omp

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) noexcept {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace irr::kernels
