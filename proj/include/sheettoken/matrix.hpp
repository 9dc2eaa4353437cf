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
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sheettoken {

// Dense row-major matrix of doubles. Vectors are 1 x n matrices unless stated.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix Identity(std::size_t n);
  static Matrix RowVector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void Fill(double value);
  bool AllFinite() const;

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix MatMul(const Matrix& a, const Matrix& b);
// a^T b and a b^T without materializing the transpose.
Matrix MatMulTransA(const Matrix& a, const Matrix& b);
Matrix MatMulTransB(const Matrix& a, const Matrix& b);
Matrix Transpose(const Matrix& a);
Matrix Add(const Matrix& a, const Matrix& b);
Matrix Scale(const Matrix& a, double s);
// In-place a += s * b.
void Axpy(Matrix& a, double s, const Matrix& b);

double Dot(std::span<const double> u, std::span<const double> v);
double Norm(std::span<const double> v);

// exp(v_i / temperature) / sum_j exp(v_j / temperature), max-subtracted.
std::vector<double> Softmax(std::span<const double> v, double temperature = 1.0);

// Cosine similarity; throws on a zero-norm argument.
double Cosine(std::span<const double> u, std::span<const double> v);

// Divides each row by its sum. A zero row becomes the one-hot self-loop row;
// the matrix must be square for that fallback to apply.
Matrix RowNormalize(const Matrix& a);

double MaxAbsDiff(const Matrix& a, const Matrix& b);

}  // namespace sheettoken
