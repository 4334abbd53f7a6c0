// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Per-row work shared by the serial and OpenMP kernel drivers.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "irr/kernels.hpp"

namespace irr::kernels::detail {

inline double dot(const double* x, const double* y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t p = 0;
  for (; p + 4 <= n; p += 4) {
    s0 += x[p] * y[p];
    s1 += x[p + 1] * y[p + 1];
    s2 += x[p + 2] * y[p + 2];
    s3 += x[p + 3] * y[p + 3];
  }
  for (; p < n; ++p) s0 += x[p] * y[p];
  return (s0 + s1) + (s2 + s3);
}

inline void gemm_nn_row(const double* a, const double* b, double* c, std::size_t i,
                        std::size_t k, std::size_t n, bool accumulate) {
  double* crow = c + i * n;
  if (!accumulate) std::fill(crow, crow + n, 0.0);
  const double* arow = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = arow[p];
    if (av == 0.0) continue;
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void gemm_nt_row(const double* a, const double* b, double* c, std::size_t i,
                        std::size_t k, std::size_t n, bool accumulate) {
  double* crow = c + i * n;
  const double* arow = a + i * k;
  for (std::size_t j = 0; j < n; ++j) {
    const double v = dot(arow, b + j * k, k);
    crow[j] = accumulate ? crow[j] + v : v;
  }
}

inline void gemm_tn_row(const double* a, const double* b, double* c, std::size_t i,
                        std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  double* crow = c + i * n;
  if (!accumulate) std::fill(crow, crow + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p * m + i];
    if (av == 0.0) continue;
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline std::size_t visible_keys(const AttentionShape& s, std::size_t b, std::size_t i) {
  const std::size_t len = std::max<std::size_t>(1, s.lengths[b]);
  return std::min(i + 1, len);
}

/// One (sequence, head) block of the attention forward pass.
inline void attention_forward_block(const AttentionShape& s, std::size_t b, std::size_t h,
                                    const double* q, const double* k, const double* v,
                                    double* out, double* probs) {
  const std::size_t width = s.width();
  const std::size_t T = s.steps;
  const std::size_t dh = s.head_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t base = b * T;
  for (std::size_t i = 0; i < T; ++i) {
    double* prow = probs + ((b * s.heads + h) * T + i) * T;
    std::fill(prow, prow + T, 0.0);
    const std::size_t visible = visible_keys(s, b, i);
    const double* qi = q + (base + i) * width + h * dh;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < visible; ++j) {
      prow[j] = scale * dot(qi, k + (base + j) * width + h * dh, dh);
      mx = std::max(mx, prow[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < visible; ++j) {
      prow[j] = std::exp(prow[j] - mx);
      total += prow[j];
    }
    for (std::size_t j = 0; j < visible; ++j) prow[j] /= total;
    double* oi = out + (base + i) * width + h * dh;
    std::fill(oi, oi + dh, 0.0);
    for (std::size_t j = 0; j < visible; ++j) {
      const double pj = prow[j];
      const double* vj = v + (base + j) * width + h * dh;
      for (std::size_t c = 0; c < dh; ++c) oi[c] += pj * vj[c];
    }
  }
}

inline void attention_backward_block(const AttentionShape& s, std::size_t b, std::size_t h,
                                     const double* q, const double* k, const double* v,
                                     const double* probs, const double* dout, double* dq,
                                     double* dk, double* dv) {
  const std::size_t width = s.width();
  const std::size_t T = s.steps;
  const std::size_t dh = s.head_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t base = b * T;
  std::vector<double> dp(T);
  for (std::size_t i = 0; i < T; ++i) {
    const double* prow = probs + ((b * s.heads + h) * T + i) * T;
    const std::size_t visible = visible_keys(s, b, i);
    const double* doi = dout + (base + i) * width + h * dh;
    double weighted = 0.0;
    for (std::size_t j = 0; j < visible; ++j) {
      const std::size_t off = (base + j) * width + h * dh;
      dp[j] = dot(doi, v + off, dh);
      weighted += prow[j] * dp[j];
      double* dvj = dv + off;
      for (std::size_t c = 0; c < dh; ++c) dvj[c] += prow[j] * doi[c];
    }
    const double* qi = q + (base + i) * width + h * dh;
    double* dqi = dq + (base + i) * width + h * dh;
    for (std::size_t j = 0; j < visible; ++j) {
      const double ds = scale * prow[j] * (dp[j] - weighted);
      if (ds == 0.0) continue;
      const std::size_t off = (base + j) * width + h * dh;
      const double* kj = k + off;
      double* dkj = dk + off;
      for (std::size_t c = 0; c < dh; ++c) {
        dqi[c] += ds * kj[c];
        dkj[c] += ds * qi[c];
      }
    }
  }
}

inline void squared_distance_row(const double* points, const double* centroids, double* out,
                                 std::size_t i, std::size_t centroid_count, std::size_t dim) {
  const double* x = points + i * dim;
  for (std::size_t c = 0; c < centroid_count; ++c) {
    const double* y = centroids + c * dim;
    double s = 0.0;
    for (std::size_t p = 0; p < dim; ++p) {
      const double diff = x[p] - y[p];
      s += diff * diff;
    }
    out[i * centroid_count + c] = s;
  }
}

}  // namespace irr::kernels::detail
