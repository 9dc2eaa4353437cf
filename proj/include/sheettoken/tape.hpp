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

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sheettoken/matrix.hpp"

namespace sheettoken {

// A trainable tensor that outlives any single tape. Dense parameters receive
// their gradient in `grad`; row-sparse parameters (embedding tables) receive
// only the touched rows in `sparse_grad`.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool row_sparse = false;
  std::map<std::size_t, std::vector<double>> sparse_grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v, bool sparse = false)
      : name(std::move(n)), value(std::move(v)), row_sparse(sparse) {}
};

class Tape;

// Handle to a node recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records matrix operations in execution order; Backward walks them in
// reverse, which is a reverse topological order by construction.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Constant(Matrix value);
  // Free leaf with an adjoint but no backing Parameter.
  Var Leaf(Matrix value);
  // Binds a parameter; repeated calls return the same node.
  Var Param(Parameter& p);

  // Records an op node. `requires_grad` is derived from the inputs.
  Var Record(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  void Backward(Var loss);
  // Copies adjoints of bound parameters into Parameter::grad / sparse_grad.
  void ExportGradients() const;

  const Matrix& Value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& Grad(std::size_t id) const { return nodes_[id].grad; }
  bool RequiresGrad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Adjoint buffer for an input, allocated on first use. Callers must check
  // RequiresGrad first.
  Matrix& GradRef(std::size_t id);
  void AccumulateSparse(Parameter* p, std::size_t row, std::span<const double> g, double scale);
  void NoteSparseUse(Parameter* p);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, std::size_t> bound_;
  std::map<Parameter*, std::map<std::size_t, std::vector<double>>> sparse_;
  std::vector<Parameter*> sparse_order_;
};

// Differentiable ops. All inputs must live on the same tape.
Var MatMul(Var a, Var b);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
// Adds a 1 x n row to every row of an m x n matrix.
Var AddRow(Var a, Var row);
Var Scale(Var a, double s);
Var AddScalar(Var a, double s);
Var Relu(Var a);
Var Tanh(Var a);
Var Sigmoid(Var a);
Var Exp(Var a);
Var Log(Var a);
Var Abs(Var a);
// Elementwise clamp; the gradient is zero where the input was clipped.
Var Clamp(Var a, double lo, double hi);
Var Transpose(Var a);
Var ConcatCols(std::span<const Var> parts);
Var ConcatRows(std::span<const Var> parts);
Var RepeatRows(Var row, std::size_t m);
Var SelectRows(Var a, std::span<const std::size_t> rows);
Var Sum(Var a);
Var Mean(Var a);
// Column sums of an m x n matrix, as 1 x n.
Var SumRows(Var a);
Var SoftmaxRows(Var a);
Var LogSoftmaxRows(Var a);
// Row-stochastic normalization with the self-loop fallback for zero rows.
Var RowNormalize(Var a);
Var L2NormalizeRows(Var a);
// Cosine of every row of `a` (m x d) against the single row `b` (1 x d),
// as an m x 1 column. Norms are floored at 1e-12.
Var CosineRows(Var a, Var b);
// Element of a matrix as a 1 x 1 node.
Var At(Var a, std::size_t r, std::size_t c);
// sum_k weights[k] * channels[k]; weights is 1 x K.
Var MixChannels(Var weights, std::span<const Matrix> channels);
// Sum of table rows, each weighted by its count, as 1 x d.
Var EmbeddingSum(Tape& tape, Parameter& table,
                 std::span<const std::pair<std::uint32_t, double>> rows);

}  // namespace sheettoken
