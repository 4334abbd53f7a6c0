// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "row_kernels.hpp"

namespace irr::kernels::serial {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) detail::gemm_nn_row(a, b, c, i, k, n, accumulate);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) detail::gemm_nt_row(a, b, c, i, k, n, accumulate);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) detail::gemm_tn_row(a, b, c, i, m, k, n, accumulate);
}

void causal_attention_forward(const AttentionShape& shape, const double* q, const double* k,
                              const double* v, double* out, double* probs) {
  for (std::size_t b = 0; b < shape.batch; ++b) {
    for (std::size_t h = 0; h < shape.heads; ++h) {
      detail::attention_forward_block(shape, b, h, q, k, v, out, probs);
    }
  }
}

void causal_attention_backward(const AttentionShape& shape, const double* q, const double* k,
                               const double* v, const double* probs, const double* dout,
                               double* dq, double* dk, double* dv) {
  for (std::size_t b = 0; b < shape.batch; ++b) {
    for (std::size_t h = 0; h < shape.heads; ++h) {
      detail::attention_backward_block(shape, b, h, q, k, v, probs, dout, dq, dk, dv);
    }
  }
}

void squared_distances(const double* points, const double* centroids, double* out,
                       std::size_t n, std::size_t centroid_count, std::size_t dim) {
  for (std::size_t i = 0; i < n; ++i) {
    detail::squared_distance_row(points, centroids, out, i, centroid_count, dim);
  }
}

}  // namespace irr::kernels::serial
