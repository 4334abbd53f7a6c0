// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Dense numeric kernels. Every kernel exists twice: a serial reference in
// `serial::` and an OpenMP version in `omp::` that partitions the same per-row
// work across threads. Both produce bit-identical results because each output
// row is owned by one thread and reduced in the same order.

#pragma once

#include <cstddef>
#include <span>

namespace irr::kernels {

/// Packed multi-head causal attention layout: `batch` sequences padded to
/// `steps` rows each, `heads` column blocks of width `head_dim`. Key j is
/// visible to query i iff j <= i and j < lengths[b].
struct AttentionShape {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::size_t heads = 1;
  std::size_t head_dim = 0;
  std::span<const std::size_t> lengths;

  std::size_t width() const noexcept { return heads * head_dim; }
  std::size_t prob_size() const noexcept { return batch * heads * steps * steps; }
};

#define IRR_KERNEL_DECLS                                                                   \
  /* c(m x n) (+)= a(m x k) * b(k x n) */                                                  \
  void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,  \
               std::size_t n, bool accumulate);                                            \
  /* c(m x n) (+)= a(m x k) * b(n x k)^T */                                                \
  void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,  \
               std::size_t n, bool accumulate);                                            \
  /* c(m x n) (+)= a(k x m)^T * b(k x n) */                                                \
  void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,  \
               std::size_t n, bool accumulate);                                            \
  void causal_attention_forward(const AttentionShape& shape, const double* q,              \
                                const double* k, const double* v, double* out,             \
                                double* probs);                                            \
  /* Accumulates into dq, dk, dv. */                                                       \
  void causal_attention_backward(const AttentionShape& shape, const double* q,             \
                                 const double* k, const double* v, const double* probs,    \
                                 const double* dout, double* dq, double* dk, double* dv);  \
  /* out(n x centroids) = squared euclidean distances */                                   \
  void squared_distances(const double* points, const double* centroids, double* out,       \
                         std::size_t n, std::size_t centroid_count, std::size_t dim);

namespace serial {
IRR_KERNEL_DECLS
}  // namespace serial

namespace omp {
IRR_KERNEL_DECLS
}  // namespace omp

#undef IRR_KERNEL_DECLS

// The library calls the parallel versions.
using omp::causal_attention_backward;
using omp::causal_attention_forward;
using omp::gemm_nn;
using omp::gemm_nt;
using omp::gemm_tn;
using omp::squared_distances;

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads() noexcept;
void set_threads(int n) noexcept;

}  // namespace irr::kernels
