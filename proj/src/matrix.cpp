// Copyright (c) 2026 The SheetToken Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "sheettoken/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sheettoken/error.hpp"

namespace sheettoken {

namespace {

std::string ShapeOf(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  Require(data_.size() == rows_ * cols_, ErrorCode::kInvalidArgument,
          "matrix data length does not match shape");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    Require(r.size() == cols_, ErrorCode::kInvalidArgument, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::Identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::RowVector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::Fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Matrix::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Matrix MatMul(const Matrix& a, const Matrix& b) {
  Require(a.cols() == b.rows(), ErrorCode::kInvalidArgument,
          "matmul shape mismatch: " + ShapeOf(a) + " by " + ShapeOf(b));
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* crow = c.data().data() + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data().data() + k * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix MatMulTransA(const Matrix& a, const Matrix& b) {
  Require(a.rows() == b.rows(), ErrorCode::kInvalidArgument,
          "matmul^T shape mismatch: " + ShapeOf(a) + " by " + ShapeOf(b));
  Matrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* brow = b.data().data() + k * n;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* crow = c.data().data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix MatMulTransB(const Matrix& a, const Matrix& b) {
  Require(a.cols() == b.cols(), ErrorCode::kInvalidArgument,
          "matmul shape mismatch: " + ShapeOf(a) + " by " + ShapeOf(b) + "^T");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = Dot(a.row(i), b.row(j));
  }
  return c;
}

Matrix Transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix Add(const Matrix& a, const Matrix& b) {
  Require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kInvalidArgument,
          "add shape mismatch: " + ShapeOf(a) + " vs " + ShapeOf(b));
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Matrix Scale(const Matrix& a, double s) {
  Matrix c = a;
  for (double& x : c.data()) x *= s;
  return c;
}

void Axpy(Matrix& a, double s, const Matrix& b) {
  Require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kInvalidArgument,
          "axpy shape mismatch: " + ShapeOf(a) + " vs " + ShapeOf(b));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

double Dot(std::span<const double> u, std::span<const double> v) {
  Require(u.size() == v.size(), ErrorCode::kInvalidArgument, "dot length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double Norm(std::span<const double> v) { return std::sqrt(Dot(v, v)); }

std::vector<double> Softmax(std::span<const double> v, double temperature) {
  Require(temperature > 0.0, ErrorCode::kInvalidArgument, "softmax temperature must be positive");
  std::vector<double> out(v.size());
  if (v.empty()) return out;
  double hi = v[0] / temperature;
  for (double x : v) hi = std::max(hi, x / temperature);
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] / temperature - hi);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

double Cosine(std::span<const double> u, std::span<const double> v) {
  const double nu = Norm(u);
  const double nv = Norm(v);
  Require(nu > 0.0 && nv > 0.0, ErrorCode::kNumeric, "cosine of a zero-norm vector");
  return std::clamp(Dot(u, v) / (nu * nv), -1.0, 1.0);
}

Matrix RowNormalize(const Matrix& a) {
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double sum = 0.0;
    for (double x : a.row(i)) {
      Require(x >= 0.0, ErrorCode::kInvalidArgument, "row_normalize: negative entry");
      sum += x;
    }
    auto row = out.row(i);
    if (sum == 0.0) {
      Require(a.rows() == a.cols(), ErrorCode::kInvalidArgument,
              "row_normalize: zero row in a non-square matrix");
      std::fill(row.begin(), row.end(), 0.0);
      row[i] = 1.0;
    } else {
      for (double& x : row) x /= sum;
    }
  }
  return out;
}

double MaxAbsDiff(const Matrix& a, const Matrix& b) {
  Require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kInvalidArgument,
          "shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace sheettoken
