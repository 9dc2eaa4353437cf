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
#include "sheettoken/tape.hpp"

#include <algorithm>
#include <cmath>

#include "sheettoken/error.hpp"

namespace sheettoken {

namespace {

constexpr double kNormFloor = 1e-12;

Tape& SameTape(std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    Require(v.valid(), ErrorCode::kInvalidArgument, "op on an unbound variable");
    if (t == nullptr) t = v.tape();
    Require(t == v.tape(), ErrorCode::kInvalidArgument, "op mixes variables from two tapes");
  }
  return *t;
}

void RequireSameShape(const Matrix& a, const Matrix& b, const char* op) {
  Require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kInvalidArgument,
          std::string(op) + ": shape mismatch");
}

// Elementwise unary op whose derivative is a function of input and output.
template <typename F, typename D>
Var Unary(Var a, F f, D dfdx) {
  Tape& t = SameTape({a});
  Matrix out = a.value();
  for (double& x : out.data()) x = f(x);
  const std::size_t ia = a.id();
  const Var inputs[] = {a};
  return t.Record(std::move(out), inputs, [ia, dfdx](Tape& tape, std::size_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const Matrix& x = tape.Value(ia);
    const Matrix& y = tape.Value(self);
    const Matrix& g = tape.Grad(self);
    Matrix& ga = tape.GradRef(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
  });
}

}  // namespace

const Matrix& Var::value() const { return tape_->Value(id_); }
const Matrix& Var::grad() const { return tape_->Grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  Require(v.rows() == 1 && v.cols() == 1, ErrorCode::kInvalidArgument, "variable is not scalar");
  return v[0];
}

Var Tape::Constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::Leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::Param(Parameter& p) {
  Require(!p.row_sparse, ErrorCode::kInvalidArgument,
          "row-sparse parameter '" + p.name + "' must be read through EmbeddingSum");
  auto it = bound_.find(&p);
  if (it != bound_.end()) return Var(this, it->second);
  Var v = Leaf(p.value);
  bound_.emplace(&p, v.id());
  return v;
}

Var Tape::Record(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    Require(v.tape() == this, ErrorCode::kInvalidArgument, "input recorded on another tape");
    needs = needs || nodes_[v.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::GradRef(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::NoteSparseUse(Parameter* p) {
  if (sparse_.emplace(p, std::map<std::size_t, std::vector<double>>{}).second) {
    sparse_order_.push_back(p);
  }
}

void Tape::AccumulateSparse(Parameter* p, std::size_t row, std::span<const double> g,
                            double scale) {
  auto& rows = sparse_[p];
  auto& acc = rows[row];
  if (acc.empty()) acc.assign(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) acc[i] += scale * g[i];
}

void Tape::Backward(Var loss) {
  Require(loss.tape() == this, ErrorCode::kInvalidArgument, "loss recorded on another tape");
  const Matrix& lv = nodes_[loss.id()].value;
  Require(lv.rows() == 1 && lv.cols() == 1, ErrorCode::kInvalidArgument,
          "backward requires a scalar loss");
  for (Node& n : nodes_) n.grad = Matrix();
  for (auto& [p, rows] : sparse_) rows.clear();
  GradRef(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

void Tape::ExportGradients() const {
  for (const auto& [p, id] : bound_) {
    const Node& n = nodes_[id];
    p->grad = n.grad.empty() ? Matrix(n.value.rows(), n.value.cols()) : n.grad;
  }
  for (Parameter* p : sparse_order_) p->sparse_grad = sparse_.at(p);
}

Var MatMul(Var a, Var b) {
  Tape& t = SameTape({a, b});
  const std::size_t ia = a.id(), ib = b.id();
  const Var inputs[] = {a, b};
  return t.Record(sheettoken::MatMul(a.value(), b.value()), inputs,
                  [ia, ib](Tape& tape, std::size_t self) {
                    const Matrix& g = tape.Grad(self);
                    if (tape.RequiresGrad(ia)) {
                      Axpy(tape.GradRef(ia), 1.0, MatMulTransB(g, tape.Value(ib)));
                    }
                    if (tape.RequiresGrad(ib)) {
                      Axpy(tape.GradRef(ib), 1.0, MatMulTransA(tape.Value(ia), g));
                    }
                  });
}

Var Add(Var a, Var b) {
  Tape& t = SameTape({a, b});
  RequireSameShape(a.value(), b.value(), "add");
  const std::size_t ia = a.id(), ib = b.id();
  const Var inputs[] = {a, b};
  return t.Record(sheettoken::Add(a.value(), b.value()), inputs,
                  [ia, ib](Tape& tape, std::size_t self) {
                    const Matrix& g = tape.Grad(self);
                    if (tape.RequiresGrad(ia)) Axpy(tape.GradRef(ia), 1.0, g);
                    if (tape.RequiresGrad(ib)) Axpy(tape.GradRef(ib), 1.0, g);
                  });
}

Var Sub(Var a, Var b) {
  Tape& t = SameTape({a, b});
  RequireSameShape(a.value(), b.value(), "sub");
  Matrix out = a.value();
  Axpy(out, -1.0, b.value());
  const std::size_t ia = a.id(), ib = b.id();
  const Var inputs[] = {a, b};
  return t.Record(std::move(out), inputs, [ia, ib](Tape& tape, std::size_t self) {
    const Matrix& g = tape.Grad(self);
    if (tape.RequiresGrad(ia)) Axpy(tape.GradRef(ia), 1.0, g);
    if (tape.RequiresGrad(ib)) Axpy(tape.GradRef(ib), -1.0, g);
  });
}

Var Mul(Var a, Var b) {
  Tape& t = SameTape({a, b});
  RequireSameShape(a.value(), b.value(), "mul");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  const Var inputs[] = {a, b};
  return t.Record(std::move(out), inputs, [ia, ib](Tape& tape, std::size_t self) {
    const Matrix& g = tape.Grad(self);
    if (tape.RequiresGrad(ia)) {
      Matrix& ga = tape.GradRef(ia);
      const Matrix& vb = tape.Value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (tape.RequiresGrad(ib)) {
      Matrix& gb = tape.GradRef(ib);
      const Matrix& va = tape.Value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

Var AddRow(Var a, Var row) {
  Tape& t = SameTape({a, row});
  Require(row.rows() == 1 && row.cols() == a.cols(), ErrorCode::kInvalidArgument,
          "add_row: bias shape mismatch");
  Matrix out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto dst = out.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += row.value()[c];
  }
  const std::size_t ia = a.id(), ir = row.id();
  const Var inputs[] = {a, row};
  return t.Record(std::move(out), inputs, [ia, ir](Tape& tape, std::size_t self) {
    const Matrix& g = tape.Grad(self);
    if (tape.RequiresGrad(ia)) Axpy(tape.GradRef(ia), 1.0, g);
    if (tape.RequiresGrad(ir)) {
      Matrix& gr = tape.GradRef(ir);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += g(r, c);
    }
  });
}

Var Scale(Var a, double s) {
  return Unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var AddScalar(Var a, double s) {
  return Unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var Relu(Var a) {
  return Unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Tanh(Var a) {
  return Unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var Sigmoid(Var a) {
  return Unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var Exp(Var a) {
  return Unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var Log(Var a) {
  return Unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var Abs(Var a) {
  return Unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var Clamp(Var a, double lo, double hi) {
  return Unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var Transpose(Var a) {
  Tape& t = SameTape({a});
  const std::size_t ia = a.id();
  const Var inputs[] = {a};
  return t.Record(sheettoken::Transpose(a.value()), inputs, [ia](Tape& tape, std::size_t self) {
    if (tape.RequiresGrad(ia)) Axpy(tape.GradRef(ia), 1.0, sheettoken::Transpose(tape.Grad(self)));
  });
}

Var ConcatCols(std::span<const Var> parts) {
  Require(!parts.empty(), ErrorCode::kInvalidArgument, "concat of nothing");
  Tape& t = *parts[0].tape();
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    Require(p.tape() == &t && p.rows() == rows, ErrorCode::kInvalidArgument,
            "concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, off + c) = p.value()(r, c);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return t.Record(std::move(out), parts, [ids, offsets](Tape& tape, std::size_t self) {
    const Matrix& g = tape.Grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tape.RequiresGrad(ids[k])) continue;
      Matrix& gp = tape.GradRef(ids[k]);
      for (std::size_t r = 0; r < gp.rows(); ++r)
        for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g(r, offsets[k] + c);
    }
  });
}

Var ConcatRows(std::span<const Var> parts) {
  Require(!parts.empty(), ErrorCode::kInvalidArgument, "concat of nothing");
  Tape& t = *parts[0].tape();
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    Require(p.tape() == &t && p.cols() == cols, ErrorCode::kInvalidArgument,
            "concat_rows: column count mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + off * cols);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  return t.Record(std::move(out), parts, [ids, offsets](Tape& tape, std::size_t self) {
    const Matrix& g = tape.Grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tape.RequiresGrad(ids[k])) continue;
      Matrix& gp = tape.GradRef(ids[k]);
      const std::size_t base = offsets[k] * g.cols();
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[base + i];
    }
  });
}

Var RepeatRows(Var row, std::size_t m) {
  Tape& t = SameTape({row});
  Require(row.rows() == 1, ErrorCode::kInvalidArgument, "repeat_rows expects a row vector");
  Matrix out(m, row.cols());
  for (std::size_t r = 0; r < m; ++r)
    std::copy(row.value().data().begin(), row.value().data().end(), out.row(r).begin());
  const std::size_t ir = row.id();
  const Var inputs[] = {row};
  return t.Record(std::move(out), inputs, [ir](Tape& tape, std::size_t self) {
    if (!tape.RequiresGrad(ir)) return;
    const Matrix& g = tape.Grad(self);
    Matrix& gr = tape.GradRef(ir);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += g(r, c);
  });
}

Var SelectRows(Var a, std::span<const std::size_t> rows) {
  Tape& t = SameTape({a});
  Matrix out(rows.size(), a.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    Require(rows[k] < a.rows(), ErrorCode::kInvalidArgument, "select_rows: index out of range");
    auto src = a.value().row(rows[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  const std::size_t ia = a.id();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  const Var inputs[] = {a};
  return t.Record(std::move(out), inputs, [ia, idx](Tape& tape, std::size_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const Matrix& g = tape.Grad(self);
    Matrix& ga = tape.GradRef(ia);
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(idx[k], c) += g(k, c);
  });
}

Var Sum(Var a) {
  Tape& t = SameTape({a});
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  const std::size_t ia = a.id();
  const Var inputs[] = {a};
  return t.Record(Matrix(1, 1, s), inputs, [ia](Tape& tape, std::size_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const double g = tape.Grad(self)[0];
    for (double& x : tape.GradRef(ia).data()) x += g;
  });
}

Var Mean(Var a) {
  Require(a.value().size() > 0, ErrorCode::kInvalidArgument, "mean of an empty matrix");
  return Scale(Sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var SumRows(Var a) {
  Tape& t = SameTape({a});
  Matrix out(1, a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out[c] += a.value()(r, c);
  const std::size_t ia = a.id();
  const Var inputs[] = {a};
  return t.Record(std::move(out), inputs, [ia](Tape& tape, std::size_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const Matrix& g = tape.Grad(self);
    Matrix& ga = tape.GradRef(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[c];
  });
}

Var SoftmaxRows(Var a) {
  Tape& t = SameTape({a});
  Matrix out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto p = Softmax(a.value().row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  const std::size_t ia = a.id();
  const Var inputs[] = {a};
  return t.Record(std::move(out), inputs, [ia](Tape& tape, std::size_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const Matrix& y = tape.Value(self);
    const Matrix& g = tape.Grad(self);
    Matrix& ga = tape.GradRef(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const double inner = Dot(g.row(r), y.row(r));
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - inner);
    }
  });
}

Var LogSoftmaxRows(Var a) {
  Tape& t = SameTape({a});
  Matrix out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.value().row(r);
    double hi = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double x : row) total += std::exp(x - hi);
    const double lse = hi + std::log(total);
    for (std::size_t c = 0; c < row.size(); ++c) out(r, c) = row[c] - lse;
  }
  const std::size_t ia = a.id();
  const Var inputs[] = {a};
  return t.Record(std::move(out), inputs, [ia](Tape& tape, std::size_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const Matrix& y = tape.Value(self);
    const Matrix& g = tape.Grad(self);
    Matrix& ga = tape.GradRef(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double gsum = 0.0;
      for (double x : g.row(r)) gsum += x;
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += g(r, c) - std::exp(y(r, c)) * gsum;
    }
  });
}

Var RowNormalize(Var a) {
  Tape& t = SameTape({a});
  Matrix out = sheettoken::RowNormalize(a.value());
  const std::size_t ia = a.id();
  const Var inputs[] = {a};
  return t.Record(std::move(out), inputs, [ia](Tape& tape, std::size_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const Matrix& x = tape.Value(ia);
    const Matrix& y = tape.Value(self);
    const Matrix& g = tape.Grad(self);
    Matrix& ga = tape.GradRef(ia);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double sum = 0.0;
      for (double v : x.row(r)) sum += v;
      // The self-loop fallback is constant, so it passes no gradient.
      if (sum == 0.0) continue;
      const double inner = Dot(g.row(r), y.row(r));
      for (std::size_t c = 0; c < x.cols(); ++c) ga(r, c) += (g(r, c) - inner) / sum;
    }
  });
}

Var L2NormalizeRows(Var a) {
  Tape& t = SameTape({a});
  Matrix out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double n = std::max(Norm(out.row(r)), kNormFloor);
    for (double& x : out.row(r)) x /= n;
  }
  const std::size_t ia = a.id();
  const Var inputs[] = {a};
  return t.Record(std::move(out), inputs, [ia](Tape& tape, std::size_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const Matrix& x = tape.Value(ia);
    const Matrix& y = tape.Value(self);
    const Matrix& g = tape.Grad(self);
    Matrix& ga = tape.GradRef(ia);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double n = Norm(x.row(r));
      if (n < kNormFloor) {
        for (std::size_t c = 0; c < x.cols(); ++c) ga(r, c) += g(r, c) / kNormFloor;
        continue;
      }
      const double inner = Dot(g.row(r), y.row(r));
      for (std::size_t c = 0; c < x.cols(); ++c) ga(r, c) += (g(r, c) - y(r, c) * inner) / n;
    }
  });
}

Var CosineRows(Var a, Var b) {
  Tape& t = SameTape({a, b});
  Require(b.rows() == 1 && b.cols() == a.cols(), ErrorCode::kInvalidArgument,
          "cosine_rows: shape mismatch");
  Var an = L2NormalizeRows(a);
  Var bn = L2NormalizeRows(b);
  (void)t;
  return MatMul(an, Transpose(bn));
}

Var At(Var a, std::size_t r, std::size_t c) {
  Tape& t = SameTape({a});
  Require(r < a.rows() && c < a.cols(), ErrorCode::kInvalidArgument, "at: index out of range");
  const std::size_t ia = a.id();
  const Var inputs[] = {a};
  return t.Record(Matrix(1, 1, a.value()(r, c)), inputs, [ia, r, c](Tape& tape, std::size_t self) {
    if (tape.RequiresGrad(ia)) tape.GradRef(ia)(r, c) += tape.Grad(self)[0];
  });
}

Var MixChannels(Var weights, std::span<const Matrix> channels) {
  Tape& t = SameTape({weights});
  Require(weights.rows() == 1 && weights.cols() == channels.size() && !channels.empty(),
          ErrorCode::kInvalidArgument, "mix_channels: weight/channel count mismatch");
  Matrix out(channels[0].rows(), channels[0].cols());
  for (std::size_t k = 0; k < channels.size(); ++k) {
    RequireSameShape(out, channels[k], "mix_channels");
    Axpy(out, weights.value()[k], channels[k]);
  }
  const std::size_t iw = weights.id();
  std::vector<Matrix> held(channels.begin(), channels.end());
  const Var inputs[] = {weights};
  return t.Record(std::move(out), inputs, [iw, held = std::move(held)](Tape& tape, std::size_t self) {
    if (!tape.RequiresGrad(iw)) return;
    const Matrix& g = tape.Grad(self);
    Matrix& gw = tape.GradRef(iw);
    for (std::size_t k = 0; k < held.size(); ++k) gw[k] += Dot(g.data(), held[k].data());
  });
}

Var EmbeddingSum(Tape& tape, Parameter& table,
                 std::span<const std::pair<std::uint32_t, double>> rows) {
  Require(table.row_sparse, ErrorCode::kInvalidArgument,
          "embedding_sum expects a row-sparse parameter");
  const std::size_t d = table.value.cols();
  Matrix out(1, d);
  for (const auto& [row, weight] : rows) {
    Require(row < table.value.rows(), ErrorCode::kInvalidArgument, "embedding row out of range");
    auto src = table.value.row(row);
    for (std::size_t c = 0; c < d; ++c) out[c] += weight * src[c];
  }
  tape.NoteSparseUse(&table);
  Parameter* p = &table;
  std::vector<std::pair<std::uint32_t, double>> held(rows.begin(), rows.end());
  // A free leaf marks the node as differentiable; the table itself is
  // updated through the sparse accumulator.
  Var marker = tape.Leaf(Matrix(1, 1));
  const Var inputs[] = {marker};
  return tape.Record(std::move(out), inputs, [p, held = std::move(held)](Tape& t, std::size_t self) {
    const Matrix& g = t.Grad(self);
    for (const auto& [row, weight] : held) t.AccumulateSparse(p, row, g.data(), weight);
  });
}

}  // namespace sheettoken
