#include "fairgnn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>

#include "fairgnn/error.hpp"

namespace fairgnn {

namespace {
std::atomic<bool> g_warnings_enabled{true};
}

void warn(const std::string& message) {
  if (g_warnings_enabled.load()) std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled.store(enabled); }

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("tensor value count " + std::to_string(data_.size()) +
                     " does not match shape " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Tensor t(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != t.cols()) throw ShapeError("ragged rows in Tensor::from_rows");
    std::copy(rows[r].begin(), rows[r].end(), t.row(r).begin());
  }
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Tensor Tensor::transpose() const {
  Tensor t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + a.shape_string() + " x " + b.shape_string());
  }
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols,
                           std::vector<std::size_t> offsets,
                           std::vector<std::size_t> indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      offsets_(std::move(offsets)),
      indices_(std::move(indices)),
      values_(std::move(values)) {
  validate();
}

void SparseMatrix::validate() const {
  if (offsets_.size() != rows_ + 1) throw ShapeError("CSR offsets size != rows + 1");
  if (offsets_.front() != 0 || offsets_.back() != indices_.size())
    throw ShapeError("CSR offsets do not span the index array");
  if (values_.size() != indices_.size()) throw ShapeError("CSR values/indices size mismatch");
  for (std::size_t r = 0; r < rows_; ++r) {
    if (offsets_[r] > offsets_[r + 1]) throw ShapeError("CSR offsets not monotone");
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
      if (indices_[k] >= cols_) throw ShapeError("CSR column index out of range");
      if (k > offsets_[r] && indices_[k] <= indices_[k - 1])
        throw ShapeError("CSR column indices not strictly sorted in row " + std::to_string(r));
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> offsets(rows + 1, 0);
  std::vector<std::size_t> indices;
  std::vector<double> values;
  indices.reserve(triplets.size());
  values.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (t.row >= rows || t.col >= cols) throw ShapeError("triplet out of range");
    if (i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
      values.back() += t.value;
      continue;
    }
    indices.push_back(t.col);
    values.push_back(t.value);
    ++offsets[t.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) offsets[r + 1] += offsets[r];
  return SparseMatrix(rows, cols, std::move(offsets), std::move(indices), std::move(values));
}

SparseMatrix SparseMatrix::with_values(std::vector<double> values) const {
  if (values.size() != nnz()) throw ShapeError("with_values: wrong value count");
  SparseMatrix m = *this;
  m.values_ = std::move(values);
  return m;
}

Tensor SparseMatrix::to_dense() const {
  Tensor t(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) t(r, indices_[k]) += values_[k];
  return t;
}

Tensor SparseMatrix::multiply(const Tensor& x) const {
  if (x.rows() != cols_) {
    throw ShapeError("spmm: sparse " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                     " x dense " + x.shape_string());
  }
  Tensor out(rows_, x.cols());
  for (std::size_t r = 0; r < rows_; ++r) {
    auto orow = out.row(r);
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
      const double v = values_[k];
      auto xrow = x.row(indices_[k]);
      for (std::size_t j = 0; j < x.cols(); ++j) orow[j] += v * xrow[j];
    }
  }
  return out;
}

Tensor SparseMatrix::multiply_transposed(const Tensor& x) const {
  if (x.rows() != rows_) throw ShapeError("spmm^T: shape mismatch");
  Tensor out(cols_, x.cols());
  for (std::size_t r = 0; r < rows_; ++r) {
    auto xrow = x.row(r);
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
      const double v = values_[k];
      auto orow = out.row(indices_[k]);
      for (std::size_t j = 0; j < x.cols(); ++j) orow[j] += v * xrow[j];
    }
  }
  return out;
}

std::vector<double> SparseMatrix::row_sums() const {
  std::vector<double> sums(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) sums[r] += values_[k];
  return sums;
}

}  // namespace fairgnn
