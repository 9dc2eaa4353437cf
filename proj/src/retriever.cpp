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
#include "sheettoken/retriever.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "binary_io.hpp"
#include "sheettoken/error.hpp"
#include "sheettoken/optim.hpp"
#include "sheettoken/rng.hpp"

namespace sheettoken {

namespace {

constexpr char kModelMagic[4] = {'S', 'T', 'R', 'T'};
constexpr std::uint32_t kModelVersion = 1;
constexpr double kProbFloor = 1e-12;
constexpr double kNormFloor = 1e-12;

Matrix Gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.Normal(0.0, stddev);
  return m;
}

double SafeCosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::max(Norm(a), kNormFloor), nb = std::max(Norm(b), kNormFloor);
  return Dot(a, b) / (na * nb);
}

std::vector<double> ToDouble(const std::vector<float>& v) { return {v.begin(), v.end()}; }

}  // namespace

void ValidateRetrieverConfig(const RetrieverConfig& cfg) {
  Require(cfg.num_stages >= 1, ErrorCode::kInvalidArgument, "retriever needs at least one stage");
  Require(cfg.gcn_layers >= 1, ErrorCode::kInvalidArgument, "retriever needs at least one propagation layer");
  Require(cfg.tau_pool > 0.0 && cfg.tau_ret > 0.0, ErrorCode::kInvalidArgument, "temperatures must be positive");
  Require(cfg.lambda_align >= 0.0 && cfg.lambda_node >= 0.0, ErrorCode::kInvalidArgument,
          "loss weights must be non-negative");
  Require(cfg.learning_rate > 0.0 && std::isfinite(cfg.learning_rate), ErrorCode::kInvalidArgument,
          "learning rate must be positive");
  Require(cfg.momentum >= 0.0 && cfg.momentum < 1.0, ErrorCode::kInvalidArgument, "momentum must lie in [0, 1)");
  Require(cfg.batch_size >= 1, ErrorCode::kInvalidArgument, "batch size must be at least 1");
}

RetrieverConfig ConfigForMode(RetrieverConfig cfg, RetrieverMode mode) {
  if (mode == RetrieverMode::kBaseline) cfg.num_stages = 2;
  return cfg;
}

void ValidateWorkspace(const Workspace& ws) {
  const std::size_t m = ws.ids.size();
  Require(m >= 1, ErrorCode::kInvalidArgument, "workspace has no candidates");
  Require(ws.nodes.rows() == m && ws.records.size() == m, ErrorCode::kInvalidArgument,
          "workspace rows, ids and records disagree");
  Require(ws.query.size() == ws.nodes.cols(), ErrorCode::kInvalidArgument, "query and node dimensions differ");
  Require(ws.labels.empty() || ws.labels.size() == m, ErrorCode::kInvalidArgument,
          "workspace labels do not cover every candidate");
  Require(std::abs(Norm(ws.query) - 1.0) <= 1e-5, ErrorCode::kInvalidArgument, "query vector is not unit norm");
  for (std::size_t i = 0; i < m; ++i) {
    Require(std::abs(Norm(ws.nodes.row(i)) - 1.0) <= 1e-5, ErrorCode::kInvalidArgument,
            "node " + std::to_string(ws.ids[i]) + " is not unit norm");
    Require(ws.records[i].num_rows > 0 && ws.records[i].num_cols > 0, ErrorCode::kInvalidArgument,
            "sheet " + std::to_string(ws.ids[i]) + " has a zero dimension");
  }
}

Workspace PermuteWorkspace(const Workspace& ws, std::span<const std::size_t> perm) {
  Require(perm.size() == ws.size(), ErrorCode::kInvalidArgument, "permutation size mismatch");
  Workspace out;
  out.query = ws.query;
  out.nodes = Matrix(ws.nodes.rows(), ws.nodes.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::copy(ws.nodes.row(perm[i]).begin(), ws.nodes.row(perm[i]).end(), out.nodes.row(i).begin());
    out.ids.push_back(ws.ids[perm[i]]);
    out.records.push_back(ws.records[perm[i]]);
    if (!ws.labels.empty()) out.labels.push_back(ws.labels[perm[i]]);
  }
  return out;
}

std::vector<std::string> HeaderTokens(const SheetRecord& record) {
  std::set<std::string> tokens;
  for (const ColumnMeta& c : record.columns) {
    std::string cur;
    for (char ch : c.header + " ") {
      if (std::isalnum(static_cast<unsigned char>(ch))) {
        cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      } else if (!cur.empty()) {
        tokens.insert(cur);
        cur.clear();
      }
    }
  }
  return {tokens.begin(), tokens.end()};
}

double Jaccard(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (std::size_t i = 0, j = 0; i < a.size() && j < b.size();) {
    if (a[i] == b[j]) {
      ++inter, ++i, ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

double ShapeAffinity(std::size_t rows_a, std::size_t cols_a, std::size_t rows_b, std::size_t cols_b) {
  Require(rows_a > 0 && cols_a > 0 && rows_b > 0 && cols_b > 0, ErrorCode::kInvalidArgument,
          "shape affinity of a zero-dimension sheet");
  const double dr = std::abs(std::log(static_cast<double>(rows_a) / static_cast<double>(rows_b)));
  const double dc = std::abs(std::log(static_cast<double>(cols_a) / static_cast<double>(cols_b)));
  return std::exp(-(dr + dc));
}

AdjacencyChannels BuildChannels(const Workspace& ws) {
  ValidateWorkspace(ws);
  const std::size_t m = ws.size();
  AdjacencyChannels ch(kNumChannels, Matrix(m, m));
  std::vector<double> relevance(m);
  std::vector<std::vector<std::string>> headers(m);
  for (std::size_t i = 0; i < m; ++i) {
    relevance[i] = std::max(0.0, SafeCosine(ws.query, ws.nodes.row(i)));
    headers[i] = HeaderTokens(ws.records[i]);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) {
        for (Matrix& c : ch) c(i, i) = 1.0;
        continue;
      }
      const double cos = std::clamp(SafeCosine(ws.nodes.row(i), ws.nodes.row(j)), -1.0, 1.0);
      ch[kSemantic](i, j) = (cos + 1.0) / 2.0;
      ch[kQuery](i, j) = relevance[i] * relevance[j];
      ch[kSchema](i, j) = Jaccard(headers[i], headers[j]);
      const SheetRecord& a = ws.records[i];
      const SheetRecord& b = ws.records[j];
      ch[kShape](i, j) = ShapeAffinity(a.num_rows, a.num_cols, b.num_rows, b.num_cols);
    }
  }
  return ch;
}

std::vector<Parameter*> RetrieverParams::All() {
  std::vector<Parameter*> out{&stage_logits};
  for (Parameter& w : gcn) out.push_back(&w);
  for (Parameter* p : {&head_w1, &head_b1, &head_w2, &head_b2}) out.push_back(p);
  return out;
}

std::vector<const Parameter*> RetrieverParams::All() const {
  std::vector<const Parameter*> out{&stage_logits};
  for (const Parameter& w : gcn) out.push_back(&w);
  for (const Parameter* p : {&head_w1, &head_b1, &head_w2, &head_b2}) out.push_back(p);
  return out;
}

RetrieverParams InitRetriever(const RetrieverConfig& cfg, std::size_t dim, std::uint64_t seed) {
  ValidateRetrieverConfig(cfg);
  Require(dim > 0, ErrorCode::kInvalidArgument, "retriever dim must be positive");
  Rng rng(seed);
  RetrieverParams p;
  p.config = cfg;
  p.dim = dim;
  p.stage_logits = Parameter("stage_logits", Matrix(cfg.num_stages, kNumChannels));
  for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
    Matrix w = Gaussian(dim, dim, cfg.init_noise, rng);
    for (std::size_t i = 0; i < dim; ++i) w(i, i) += 1.0;
    p.gcn.emplace_back("gcn_w" + std::to_string(l + 1), std::move(w));
  }
  p.head_w1 = Parameter("node_w1", Gaussian(2 * dim, dim, 1.0 / std::sqrt(2.0 * static_cast<double>(dim)), rng));
  p.head_b1 = Parameter("node_b1", Matrix(1, dim));
  p.head_w2 = Parameter("node_w2", Gaussian(dim, 1, 1.0 / std::sqrt(static_cast<double>(dim)), rng));
  p.head_b2 = Parameter("node_b2", Matrix(1, 1));
  return p;
}

void ValidateRetrieverParams(const RetrieverParams& p) {
  ValidateRetrieverConfig(p.config);
  const std::size_t d = p.dim;
  Require(d > 0, ErrorCode::kSchema, "retriever dim must be positive");
  Require(p.stage_logits.value.rows() >= 1 && p.stage_logits.value.cols() == kNumChannels, ErrorCode::kSchema,
          "stage logits must be T x 4");
  Require(!p.gcn.empty(), ErrorCode::kSchema, "retriever has no propagation layers");
  for (const Parameter& w : p.gcn)
    Require(w.value.rows() == d && w.value.cols() == d, ErrorCode::kSchema, "propagation weight is not d x d");
  Require(p.head_w1.value.rows() == 2 * d && p.head_w1.value.cols() == d && p.head_b1.value.rows() == 1 &&
              p.head_b1.value.cols() == d && p.head_w2.value.rows() == d && p.head_w2.value.cols() == 1 &&
              p.head_b2.value.rows() == 1 && p.head_b2.value.cols() == 1,
          ErrorCode::kSchema, "node head has inconsistent shapes");
  for (const Parameter* q : p.All())
    Require(q->value.AllFinite(), ErrorCode::kNumeric, "retriever parameter '" + q->name + "' is not finite");
}

Matrix ComposeAdjacency(const AdjacencyChannels& channels, const Matrix& stage_logits) {
  Require(channels.size() == kNumChannels, ErrorCode::kInvalidArgument, "expected four channels");
  Require(stage_logits.rows() >= 1 && stage_logits.cols() == kNumChannels, ErrorCode::kInvalidArgument,
          "stage logits must be T x 4");
  Matrix out;
  for (std::size_t t = 0; t < stage_logits.rows(); ++t) {
    const std::vector<double> pi = Softmax(stage_logits.row(t));
    Matrix mixed(channels[0].rows(), channels[0].cols());
    for (std::size_t k = 0; k < kNumChannels; ++k) Axpy(mixed, pi[k], channels[k]);
    out = t == 0 ? std::move(mixed) : MatMul(out, mixed);
  }
  return out;
}

Matrix NormalizedAdjacency(const Matrix& composed) {
  return RowNormalize(Add(RowNormalize(composed), Matrix::Identity(composed.rows())));
}

Matrix Propagate(const Matrix& normalized, const Matrix& nodes, std::span<const Matrix> weights) {
  Matrix h = nodes;
  for (const Matrix& w : weights) {
    h = MatMul(MatMul(normalized, h), w);
    for (double& x : h.data()) x = std::max(0.0, x);
  }
  return h;
}

Pooling Pool(std::span<const double> query, const Matrix& refined, double tau_pool) {
  Require(tau_pool > 0.0, ErrorCode::kInvalidArgument, "pooling temperature must be positive");
  Require(refined.rows() >= 1 && refined.cols() == query.size(), ErrorCode::kInvalidArgument,
          "pooling: shape mismatch");
  std::vector<double> s(refined.rows());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = Dot(query, refined.row(i));
  Pooling out;
  out.beta = Softmax(s, tau_pool);
  out.set_vector.assign(refined.cols(), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t c = 0; c < refined.cols(); ++c) out.set_vector[c] += out.beta[i] * refined(i, c);
  return out;
}

double RetrievalLoss(std::span<const double> query, std::span<const std::vector<double>> sets,
                     std::size_t positive, double tau_ret) {
  Require(!sets.empty() && positive < sets.size(), ErrorCode::kInvalidArgument,
          "retrieval loss: positive index outside the set list");
  Require(tau_ret > 0.0, ErrorCode::kInvalidArgument, "retrieval temperature must be positive");
  std::vector<double> logits;
  for (const std::vector<double>& s : sets) logits.push_back(Cosine(query, s) / tau_ret);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  return -(logits[positive] - mx - std::log(z));
}

double AlignmentLoss(std::span<const double> query, const Matrix& refined, std::span<const std::size_t> positives,
                     std::span<const std::size_t> negatives) {
  Require(!positives.empty() && !negatives.empty(), ErrorCode::kInvalidArgument,
          "alignment loss needs positives and negatives");
  auto mean_cos = [&](std::span<const std::size_t> rows) {
    double s = 0.0;
    for (std::size_t i : rows) s += SafeCosine(query, refined.row(i));
    return s / static_cast<double>(rows.size());
  };
  return 1.0 - mean_cos(positives) + std::max(0.0, mean_cos(negatives));
}

double NodeLoss(std::span<const double> probabilities, std::span<const int> labels) {
  Require(probabilities.size() == labels.size() && !labels.empty(), ErrorCode::kInvalidArgument,
          "node loss: probability and label counts differ");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probabilities[i], kProbFloor, 1.0 - kProbFloor);
    total -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(labels.size());
}

double TotalLoss(double retrieval, double alignment, double node, const RetrieverConfig& cfg) {
  return retrieval + cfg.lambda_align * alignment + cfg.lambda_node * node;
}

ForwardVars ForwardVar(Tape& tape, const Workspace& ws, const AdjacencyChannels& channels, RetrieverParams& params) {
  const std::size_t m = ws.size();
  Require(channels.size() == kNumChannels && channels[0].rows() == m, ErrorCode::kInvalidArgument,
          "channels do not match the workspace");
  Require(ws.nodes.cols() == params.dim, ErrorCode::kInvalidArgument, "workspace dimension differs from the model");
  ForwardVars f;
  Var logits = tape.Param(params.stage_logits);
  for (std::size_t t = 0; t < params.num_stages(); ++t) {
    const std::size_t row[] = {t};
    Var mixed = MixChannels(SoftmaxRows(SelectRows(logits, row)), channels);
    f.composed = t == 0 ? mixed : MatMul(f.composed, mixed);
  }
  f.normalized = RowNormalize(Add(RowNormalize(f.composed), tape.Constant(Matrix::Identity(m))));
  Var h = tape.Constant(ws.nodes);
  for (Parameter& w : params.gcn) h = Relu(MatMul(MatMul(f.normalized, h), tape.Param(w)));
  f.refined = h;

  Var query = tape.Constant(Matrix::RowVector(ws.query));
  Var scores = Scale(Transpose(MatMul(h, Transpose(query))), 1.0 / params.config.tau_pool);
  f.beta = SoftmaxRows(scores);
  f.set_vector = MatMul(f.beta, h);

  Var q_rows = RepeatRows(query, m);
  const Var parts[] = {h, q_rows};
  Var hidden = Tanh(AddRow(MatMul(ConcatCols(parts), tape.Param(params.head_w1)), tape.Param(params.head_b1)));
  f.node_probs = Sigmoid(AddRow(MatMul(hidden, tape.Param(params.head_w2)), tape.Param(params.head_b2)));
  return f;
}

Var PoolSubsetVar(Var query, Var refined, std::span<const std::size_t> rows, double tau_pool) {
  Require(!rows.empty(), ErrorCode::kInvalidArgument, "pooling over an empty subset");
  Var sub = SelectRows(refined, rows);
  Var beta = SoftmaxRows(Scale(Transpose(MatMul(sub, Transpose(query))), 1.0 / tau_pool));
  return MatMul(beta, sub);
}

Var RetrievalLossVar(Var query, std::span<const Var> sets, std::size_t positive, double tau_ret) {
  Require(!sets.empty() && positive < sets.size(), ErrorCode::kInvalidArgument,
          "retrieval loss: positive index outside the set list");
  Var stacked = sets.size() == 1 ? sets[0] : ConcatRows(sets);
  Var sims = Transpose(CosineRows(stacked, query));
  return Scale(At(LogSoftmaxRows(Scale(sims, 1.0 / tau_ret)), 0, positive), -1.0);
}

Var AlignmentLossVar(Var query, Var refined, std::span<const std::size_t> positives,
                     std::span<const std::size_t> negatives) {
  Require(!positives.empty() && !negatives.empty(), ErrorCode::kInvalidArgument,
          "alignment loss needs positives and negatives");
  Var cos = CosineRows(refined, query);
  Var pos = Mean(SelectRows(cos, positives));
  Var neg = Mean(SelectRows(cos, negatives));
  return Add(AddScalar(Scale(pos, -1.0), 1.0), Relu(neg));
}

Var NodeLossVar(Var node_probs, std::span<const int> labels) {
  Require(node_probs.rows() == labels.size() && node_probs.cols() == 1 && !labels.empty(),
          ErrorCode::kInvalidArgument, "node loss: probability and label counts differ");
  Tape& t = *node_probs.tape();
  Matrix pos(labels.size(), 1), neg(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    pos[i] = labels[i] ? 1.0 : 0.0;
    neg[i] = 1.0 - pos[i];
  }
  Var p = Clamp(node_probs, kProbFloor, 1.0 - kProbFloor);
  Var ll = Add(Mul(Log(p), t.Constant(std::move(pos))), Mul(Log(AddScalar(Scale(p, -1.0), 1.0)), t.Constant(std::move(neg))));
  return Scale(Mean(ll), -1.0);
}

Var BatchLossVar(Tape& tape, std::span<const Workspace* const> batch,
                 std::span<const AdjacencyChannels* const> channels, RetrieverParams& params, BatchLoss* parts) {
  Require(!batch.empty() && batch.size() == channels.size(), ErrorCode::kInvalidArgument,
          "batch and channel counts differ");
  const RetrieverConfig& cfg = params.config;
  struct PerQuery {
    Var query, refined, probs, pos_set, neg_set;
    std::vector<std::size_t> pos, neg;
  };
  std::vector<PerQuery> q(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Workspace& ws = *batch[b];
    Require(ws.labels.size() == ws.size(), ErrorCode::kInvalidArgument, "training workspace is unlabelled");
    for (std::size_t i = 0; i < ws.size(); ++i) (ws.labels[i] ? q[b].pos : q[b].neg).push_back(i);
    Require(!q[b].pos.empty() && !q[b].neg.empty(), ErrorCode::kInvalidArgument,
            "training workspace needs positives and negatives");
    ForwardVars f = ForwardVar(tape, ws, *channels[b], params);
    q[b].query = tape.Constant(Matrix::RowVector(ws.query));
    q[b].refined = f.refined;
    q[b].probs = f.node_probs;
    q[b].pos_set = PoolSubsetVar(q[b].query, f.refined, q[b].pos, cfg.tau_pool);
    q[b].neg_set = PoolSubsetVar(q[b].query, f.refined, q[b].neg, cfg.tau_pool);
  }
  std::vector<Var> totals;
  BatchLoss sum;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    std::vector<Var> sets{q[b].pos_set};
    if (cfg.own_negative_set) sets.push_back(q[b].neg_set);
    for (std::size_t o = 0; o < batch.size(); ++o)
      if (o != b) sets.push_back(q[o].pos_set);
    Var ret = RetrievalLossVar(q[b].query, sets, 0, cfg.tau_ret);
    Var align = AlignmentLossVar(q[b].query, q[b].refined, q[b].pos, q[b].neg);
    Var node = NodeLossVar(q[b].probs, batch[b]->labels);
    totals.push_back(Add(Add(ret, Scale(align, cfg.lambda_align)), Scale(node, cfg.lambda_node)));
    sum.retrieval += ret.scalar();
    sum.alignment += align.scalar();
    sum.node += node.scalar();
  }
  Var loss = Scale(Sum(totals.size() == 1 ? totals[0] : ConcatRows(totals)), 1.0 / static_cast<double>(batch.size()));
  if (parts) {
    const double n = static_cast<double>(batch.size());
    *parts = {loss.scalar(), sum.retrieval / n, sum.alignment / n, sum.node / n};
  }
  return loss;
}

RetrievalResult ScoreWorkspace(const Workspace& ws, const RetrieverParams& params, double threshold,
                               std::optional<std::size_t> top_k) {
  const AdjacencyChannels channels = BuildChannels(ws);
  // Forward only; parameters are read, never written.
  RetrieverParams& p = const_cast<RetrieverParams&>(params);
  Tape tape;
  ForwardVars f = ForwardVar(tape, ws, channels, p);
  RetrievalResult r;
  r.candidates = ws.ids;
  const std::size_t m = ws.size();
  for (std::size_t i = 0; i < m; ++i) {
    r.scores.push_back(f.node_probs.value()[i]);
    r.beta.push_back(f.beta.value()[i]);
  }
  r.set_vector.assign(f.set_vector.value().data().begin(), f.set_vector.value().data().end());
  r.ranking.resize(m);
  std::iota(r.ranking.begin(), r.ranking.end(), std::size_t{0});
  std::sort(r.ranking.begin(), r.ranking.end(), [&](std::size_t a, std::size_t b) {
    if (r.scores[a] != r.scores[b]) return r.scores[a] > r.scores[b];
    return r.candidates[a] < r.candidates[b];
  });
  r.selected.assign(m, false);
  if (top_k) {
    for (std::size_t k = 0; k < std::min(*top_k, m); ++k) r.selected[r.ranking[k]] = true;
  } else {
    for (std::size_t i = 0; i < m; ++i) r.selected[i] = r.scores[i] >= threshold;
  }
  return r;
}

Workspace MakeWorkspace(std::span<const double> query_vec, const SheetCatalog& catalog, const TokenCache& tokens,
                        std::span<const SheetId> candidates) {
  std::vector<SheetId> ids(candidates.begin(), candidates.end());
  if (ids.empty()) ids = catalog.ids();
  std::sort(ids.begin(), ids.end());
  Require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), ErrorCode::kInvalidArgument,
          "duplicate candidate sheet ids");
  Require(!ids.empty(), ErrorCode::kInvalidArgument, "empty candidate set");
  Workspace ws;
  ws.query.assign(query_vec.begin(), query_vec.end());
  ws.nodes = Matrix(ids.size(), tokens.dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = tokens.entries.find(ids[i]);
    Require(it != tokens.entries.end(), ErrorCode::kInvalidArgument,
            "sheet " + std::to_string(ids[i]) + " has no cached token");
    const std::vector<double> v = ToDouble(it->second);
    std::copy(v.begin(), v.end(), ws.nodes.row(i).begin());
    ws.records.push_back(catalog.at(ids[i]));
  }
  ws.ids = std::move(ids);
  ValidateWorkspace(ws);
  return ws;
}

Workspace MakeWorkspace(const QueryInstance& query, std::span<const double> query_vec, const SheetCatalog& catalog,
                        const TokenCache& tokens) {
  std::vector<SheetId> ids = query.positives;
  ids.insert(ids.end(), query.negatives.begin(), query.negatives.end());
  Workspace ws = MakeWorkspace(query_vec, catalog, tokens, ids);
  const std::set<SheetId> pos(query.positives.begin(), query.positives.end());
  for (SheetId id : ws.ids) ws.labels.push_back(pos.count(id) ? 1 : 0);
  return ws;
}

ListwiseScore EvaluateQueries(std::span<const Workspace> workspaces, std::span<const QueryInstance> queries,
                              const RetrieverParams& params, unsigned threads) {
  std::vector<RetrievalResult> results(workspaces.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < workspaces.size(); i += stride) results[i] = ScoreWorkspace(workspaces[i], params);
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(workspaces.size())));
  if (n == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(work, w, n);
    for (auto& t : pool) t.join();
  }
  return ListwiseAccuracy(results, queries);
}

RetrieverTrainResult TrainRetriever(const SheetCatalog& catalog, const TokenCache& tokens,
                                    const EncoderParams& encoder, std::span<const QueryInstance> queries,
                                    std::span<const std::size_t> train, std::span<const std::size_t> eval,
                                    const RetrieverConfig& cfg) {
  ValidateRetrieverConfig(cfg);
  ValidateTokenCache(tokens);
  Require(!train.empty() && !eval.empty(), ErrorCode::kInvalidArgument, "retriever training needs non-empty splits");
  Require(tokens.dim == encoder.config.dim, ErrorCode::kInvalidArgument,
          "token cache dimension differs from the encoder");

  auto build = [&](std::span<const std::size_t> idx, std::vector<Workspace>& ws, std::vector<QueryInstance>& qs) {
    for (std::size_t i : idx) {
      Require(i < queries.size(), ErrorCode::kInvalidArgument, "query index out of range");
      ws.push_back(MakeWorkspace(queries[i], EmbedText(queries[i].query, encoder), catalog, tokens));
      qs.push_back(queries[i]);
    }
  };
  std::vector<Workspace> train_ws, eval_ws;
  std::vector<QueryInstance> train_q, eval_q;
  build(train, train_ws, train_q);
  build(eval, eval_ws, eval_q);
  std::vector<AdjacencyChannels> train_ch;
  for (const Workspace& ws : train_ws) train_ch.push_back(BuildChannels(ws));

  RetrieverTrainResult result{InitRetriever(cfg, tokens.dim, DeriveSeed(cfg.seed, 0)), {}, {}};
  RetrieverParams& params = result.params;
  std::vector<Parameter*> all = params.All();
  SgdMomentum optimizer(cfg.momentum);
  Rng order_rng(DeriveSeed(cfg.seed, 1));
  std::vector<std::size_t> order(train_ws.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches * cfg.epochs;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.Shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const Workspace*> batch;
      std::vector<const AdjacencyChannels*> channels;
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(&train_ws[order[k]]);
        channels.push_back(&train_ch[order[k]]);
      }
      Tape tape;
      Var loss = BatchLossVar(tape, batch, channels, params);
      Require(std::isfinite(loss.scalar()), ErrorCode::kNumeric,
              "retriever training diverged (non-finite loss) at epoch " + std::to_string(epoch));
      tape.Backward(loss);
      tape.ExportGradients();
      optimizer.Step(all, LinearDecay(cfg.learning_rate, step++, total_steps));
      epoch_loss += loss.scalar() * static_cast<double>(end - start);
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    const ListwiseScore tr = EvaluateQueries(train_ws, train_q, params, cfg.threads);
    const ListwiseScore ev = EvaluateQueries(eval_ws, eval_q, params, cfg.threads);
    const int e = static_cast<int>(epoch);
    result.log.push_back({2, "train", tr.accuracy, tr.entropy, e});
    result.log.push_back({2, "eval", ev.accuracy, ev.entropy, e});
  }
  return result;
}

RetrievalResult Retrieve(std::string_view query_text, const SheetCatalog& catalog, const TokenCache& tokens,
                         const EncoderParams& encoder, const RetrieverParams& params,
                         std::span<const SheetId> candidates, double threshold, std::optional<std::size_t> top_k) {
  Require(!query_text.empty(), ErrorCode::kInvalidArgument, "empty query text");
  const std::vector<double> z = EmbedText(query_text, encoder);
  return ScoreWorkspace(MakeWorkspace(z, catalog, tokens, candidates), params, threshold, top_k);
}

std::string EncodeRetrieverModel(const RetrieverParams& params) {
  ValidateRetrieverParams(params);
  const RetrieverConfig& c = params.config;
  std::string out(kModelMagic, 4);
  detail::PutU32(out, kModelVersion);
  detail::PutU32(out, static_cast<std::uint32_t>(params.dim));
  detail::PutU32(out, static_cast<std::uint32_t>(params.num_stages()));
  detail::PutU32(out, static_cast<std::uint32_t>(params.gcn.size()));
  detail::PutU32(out, c.own_negative_set ? 1u : 0u);
  for (double v : {c.tau_pool, c.tau_ret, c.lambda_align, c.lambda_node}) detail::PutF32(out, v);
  for (const Parameter* p : params.All()) {
    detail::PutU32(out, static_cast<std::uint32_t>(p->value.rows()));
    detail::PutU32(out, static_cast<std::uint32_t>(p->value.cols()));
    for (double x : p->value.data()) detail::PutF32(out, x);
  }
  return out;
}

RetrieverParams DecodeRetrieverModel(std::string_view bytes) {
  detail::ByteReader in(bytes, "retriever model");
  Require(in.Raw(4) == std::string_view(kModelMagic, 4), ErrorCode::kFormat, "retriever model: magic mismatch");
  const std::uint32_t version = in.U32();
  Require(version == kModelVersion, ErrorCode::kFormat,
          "retriever model: unsupported version " + std::to_string(version));
  RetrieverConfig cfg;
  const std::uint32_t dim = in.U32();
  cfg.num_stages = in.U32();
  cfg.gcn_layers = in.U32();
  cfg.own_negative_set = (in.U32() & 1u) != 0;
  cfg.tau_pool = in.F32();
  cfg.tau_ret = in.F32();
  cfg.lambda_align = in.F32();
  cfg.lambda_node = in.F32();
  ValidateRetrieverConfig(cfg);
  Require(dim > 0 && cfg.num_stages < 64 && cfg.gcn_layers < 64, ErrorCode::kFormat,
          "retriever model: implausible header");
  RetrieverParams p;
  p.config = cfg;
  p.dim = dim;
  p.gcn.resize(cfg.gcn_layers);
  std::vector<Parameter*> all = p.All();
  for (std::size_t k = 0; k < all.size(); ++k) {
    const std::uint32_t rows = in.U32(), cols = in.U32();
    Require(static_cast<std::uint64_t>(rows) * cols * 4 <= in.remaining(), ErrorCode::kFormat,
            "retriever model: payload is truncated");
    Matrix m(rows, cols);
    for (double& x : m.data()) x = in.F32();
    std::string name = k == 0 ? "stage_logits"
                       : k <= cfg.gcn_layers
                           ? "gcn_w" + std::to_string(k)
                           : std::vector<std::string>{"node_w1", "node_b1", "node_w2", "node_b2"}[k - 1 - cfg.gcn_layers];
    *all[k] = Parameter(std::move(name), std::move(m));
  }
  Require(in.done(), ErrorCode::kFormat, "retriever model: trailing bytes");
  ValidateRetrieverParams(p);
  return p;
}

void SaveRetriever(const RetrieverParams& params, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodeRetrieverModel(params));
}

RetrieverParams LoadRetriever(const std::filesystem::path& path) {
  return DecodeRetrieverModel(ReadFileBytes(path));
}

}  // namespace sheettoken
