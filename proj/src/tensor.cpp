// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "irr/error.hpp"

namespace irr {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
  }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  DenseMatrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged initializer rows");
    std::copy(row.begin(), row.end(), m.row(i++).begin());
  }
  return m;
}

DenseMatrix DenseMatrix::row_vector(std::span<const double> values) {
  DenseMatrix m(1, values.size());
  std::copy(values.begin(), values.end(), m.data_.begin());
  return m;
}

std::string DenseMatrix::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

void DenseMatrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void DenseMatrix::reset(std::size_t rows, std::size_t cols) {
  rows_ = rows;
  cols_ = cols;
  data_.assign(rows * cols, 0.0);
}

bool all_finite(const DenseMatrix& m) noexcept {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("max_abs_diff shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  }
  return worst;
}

}  // namespace irr
