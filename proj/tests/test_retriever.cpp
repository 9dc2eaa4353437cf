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
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "sheettoken/encoder.hpp"
#include "sheettoken/error.hpp"
#include "sheettoken/fabricate.hpp"
#include "sheettoken/retriever.hpp"

using namespace sheettoken;
using namespace sheettoken::testing;

namespace {

SheetRecord Record(SheetId id, std::uint32_t rows, std::uint32_t cols, std::vector<std::string> headers) {
  SheetRecord r;
  r.sheet_id = id;
  r.source_name = "b" + std::to_string(id) + ".xlsx::s";
  r.num_rows = rows;
  r.num_cols = cols;
  for (auto& h : headers) r.columns.push_back({h, ""});
  return r;
}

Workspace TwoNodeWorkspace() {
  Workspace ws;
  ws.query = {1.0, 0.0};
  ws.nodes = Matrix{{1.0, 0.0}, {0.0, 1.0}};
  ws.ids = {3, 9};
  ws.records = {Record(3, 10, 4, {"Date", "Amount"}), Record(9, 20, 4, {"date", "Region"})};
  ws.labels = {1, 0};
  return ws;
}

const FabricatedCorpus& SmallCorpus() {
  static const FabricatedCorpus corpus = [] {
    TemplateCounts counts;
    counts.financial_statements = 30;
    counts.sales_records = 8;
    counts.inventory = 12;
    counts.human_resources = 8;
    counts.project_management = 6;
    counts.stock_ticks = 8;
    counts.financial_business = 6;
    counts.global_indices = 2;
    FabricationConfig cfg;
    cfg.num_queries = 20;
    return BuildCorpus(GenerateTemplates(counts, 5), cfg);
  }();
  return corpus;
}

}  // namespace

TEST_CASE("channel values") {
  const Workspace ws = TwoNodeWorkspace();
  const AdjacencyChannels ch = BuildChannels(ws);
  REQUIRE(ch.size() == kNumChannels);
  for (const Matrix& a : ch) {
    CHECK(a(0, 0) == 1.0);
    CHECK(a(1, 1) == 1.0);
    CHECK(a(0, 1) == a(1, 0));
  }
  CHECK(ch[kSemantic](0, 1) == doctest::Approx(0.5));
  CHECK(ch[kQuery](0, 1) == 0.0);
  CHECK(ch[kSchema](0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(ch[kShape](0, 1) == doctest::Approx(0.5).epsilon(1e-14));

  CHECK(ShapeAffinity(10, 4, 10, 4) == 1.0);
  CHECK(ShapeAffinity(10, 4, 20, 8) == doctest::Approx(0.25));
  CHECK_THROWS_AS(ShapeAffinity(0, 4, 10, 4), Error);

  const auto h1 = HeaderTokens(Record(1, 1, 2, {"Unit Price", "qty"}));
  const auto h2 = HeaderTokens(Record(2, 1, 2, {"unit_price", "QTY"}));
  CHECK(h1 == std::vector<std::string>{"price", "qty", "unit"});
  CHECK(Jaccard(h1, h2) == 1.0);
  const auto h3 = HeaderTokens(Record(3, 1, 1, {"Region"}));
  CHECK(Jaccard(h1, h3) == 0.0);
}

TEST_CASE("semantic and query channels on equal tokens") {
  Workspace ws = TwoNodeWorkspace();
  ws.nodes = Matrix{{0.6, 0.8}, {0.6, 0.8}};
  const AdjacencyChannels ch = BuildChannels(ws);
  CHECK(ch[kSemantic](0, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ch[kQuery](0, 1) == doctest::Approx(0.36).epsilon(1e-14));
  Workspace bad = ws;
  bad.records[1].num_rows = 0;
  CHECK_THROWS_AS(BuildChannels(bad), Error);
  bad = ws;
  bad.nodes(0, 0) = 2.0;
  CHECK_THROWS_AS(BuildChannels(bad), Error);
}

TEST_CASE("composition equals a brute-force product") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.Below(5);
    const std::size_t stages = 1 + rng.Below(4);
    const AdjacencyChannels ch = RandomChannels(rng, m);
    const Matrix logits = RandomMatrix(rng, stages, kNumChannels, 2.0);
    CHECK(MaxAbsDiff(ComposeAdjacency(ch, logits), BruteForceCompose(ch, logits)) <= 1e-12);
  }
}

TEST_CASE("one-hot stages reduce to literal channel products") {
  Rng rng(7);
  const AdjacencyChannels ch = RandomChannels(rng, 4);
  auto one_hot = [](std::initializer_list<std::size_t> picks) {
    Matrix l(picks.size(), kNumChannels);
    std::size_t t = 0;
    for (std::size_t k : picks) {
      for (std::size_t c = 0; c < kNumChannels; ++c) l(t, c) = c == k ? 0.0 : -1e4;
      ++t;
    }
    return l;
  };
  for (std::size_t k = 0; k < kNumChannels; ++k) CHECK(MaxAbsDiff(ComposeAdjacency(ch, one_hot({k})), ch[k]) <= 1e-12);
  CHECK(MaxAbsDiff(ComposeAdjacency(ch, one_hot({0, 2})), MatMul(ch[0], ch[2])) <= 1e-12);
  CHECK(MaxAbsDiff(ComposeAdjacency(ch, one_hot({3, 1, 1})), MatMul(MatMul(ch[3], ch[1]), ch[1])) <= 1e-12);
}

TEST_CASE("stage logits are shift invariant") {
  Rng rng(5);
  const AdjacencyChannels ch = RandomChannels(rng, 5);
  Matrix logits = RandomMatrix(rng, 3, kNumChannels);
  const Matrix base = ComposeAdjacency(ch, logits);
  for (std::size_t c = 0; c < kNumChannels; ++c) logits(1, c) += 37.5;
  CHECK(MaxAbsDiff(ComposeAdjacency(ch, logits), base) <= 1e-12);
  const std::vector<double> v = {0.3, -1.2, 2.0};
  const std::vector<double> shifted = {100.3, 98.8, 102.0};
  const auto a = Softmax(v), b = Softmax(shifted);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
}

TEST_CASE("normalized adjacency is row stochastic") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.Below(8);
    const Matrix a = ComposeAdjacency(RandomChannels(rng, m), RandomMatrix(rng, 3, kNumChannels));
    const Matrix n = NormalizedAdjacency(a);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        CHECK(n(i, j) >= 0.0);
        s += n(i, j);
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
      CHECK(n(i, i) >= 0.5 - 1e-12);
    }
  }
  CHECK(NormalizedAdjacency(Matrix{{5.0}}) == Matrix{{1.0}});
  CHECK(NormalizedAdjacency(Matrix(3, 3)) == Matrix::Identity(3));
}

TEST_CASE("propagation on a hand-computed two-node graph") {
  const Matrix a_bar{{0.75, 0.25}, {0.5, 0.5}};
  const Matrix h0{{1.0, 2.0}, {3.0, -1.0}};
  const Matrix w0{{1.0, -1.0}, {0.0, 1.0}};
  const Matrix w[] = {w0};
  const Matrix h1 = Propagate(a_bar, h0, w);
  const Matrix expected{{1.5, 0.0}, {2.0, 0.0}};
  CHECK(MaxAbsDiff(h1, expected) <= 1e-12);

  // Identity weights on an empty graph only apply the ReLU.
  const Matrix id[] = {Matrix::Identity(2), Matrix::Identity(2)};
  CHECK(Propagate(NormalizedAdjacency(Matrix(2, 2)), h0, id) == Matrix{{1.0, 2.0}, {3.0, 0.0}});
}

TEST_CASE("pooling weights lie on the simplex") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Workspace ws = RandomWorkspace(rng, 1 + rng.Below(9), 6);
    const Pooling p = Pool(ws.query, ws.nodes, 0.5 + rng.Uniform());
    CHECK(std::abs(std::accumulate(p.beta.begin(), p.beta.end(), 0.0) - 1.0) <= 1e-12);
    for (double b : p.beta) CHECK(b > 0.0);
  }
  const Matrix single{{0.2, -0.4}};
  const Pooling one = Pool(std::vector<double>{1.0, 0.0}, single, 1.0);
  CHECK(one.beta == std::vector<double>{1.0});
  CHECK(one.set_vector == std::vector<double>{0.2, -0.4});
  const Matrix tied{{1.0, 0.0}, {1.0, 2.0}};
  const Pooling even = Pool(std::vector<double>{1.0, 0.0}, tied, 1.0);
  CHECK(even.beta[0] == doctest::Approx(0.5));
  CHECK(even.set_vector[1] == doctest::Approx(1.0));
}

TEST_CASE("contrastive loss examples") {
  const std::vector<double> q = {1.0, 0.0};
  const std::vector<std::vector<double>> one = {{0.3, 0.7}};
  CHECK(RetrievalLoss(q, one, 0, 0.1) == 0.0);
  const std::vector<std::vector<double>> equal = {{0.5, 0.5}, {0.5, -0.5}};
  CHECK(RetrievalLoss(q, equal, 0, 0.1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  const std::vector<std::vector<double>> opposite = {{2.0, 0.0}, {-3.0, 0.0}};
  CHECK(RetrievalLoss(q, opposite, 0, 1.0) == doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-14));
  CHECK(RetrievalLoss(q, opposite, 0, 1.0) == doctest::Approx(0.126928).epsilon(1e-6));
  CHECK_THROWS_AS(RetrievalLoss(q, opposite, 2, 1.0), Error);
  const std::vector<std::vector<double>> zero = {{0.0, 0.0}};
  CHECK_THROWS_AS(RetrievalLoss(q, zero, 0, 1.0), Error);
}

TEST_CASE("alignment loss examples") {
  const std::vector<double> q = {1.0, 0.0};
  const double s = std::sqrt(1.0 - 0.04);
  const Matrix h{{1.0, 0.0}, {-0.2, s}};
  const std::size_t pos[] = {0}, neg[] = {1};
  CHECK(AlignmentLoss(q, h, pos, neg) == doctest::Approx(0.0).epsilon(1e-14));
  const Matrix h2{{0.2, std::sqrt(0.96)}, {0.5, std::sqrt(0.75)}};
  CHECK(AlignmentLoss(q, h2, pos, neg) == doctest::Approx(1.3).epsilon(1e-14));
  const Matrix h3{{0.0, 1.0}, {0.0, -2.0}};
  CHECK(AlignmentLoss(q, h3, pos, neg) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(AlignmentLoss(q, h3, pos, {}), Error);
}

TEST_CASE("node loss and composite loss examples") {
  CHECK(NodeLoss(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}) == doctest::Approx(std::log(2.0)));
  CHECK(NodeLoss(std::vector<double>{0.25}, std::vector<int>{1}) == doctest::Approx(std::log(4.0)));
  CHECK(NodeLoss(std::vector<double>{1.0, 0.0}, std::vector<int>{1, 0}) < 1e-11);
  CHECK(std::isfinite(NodeLoss(std::vector<double>{0.0}, std::vector<int>{1})));
  CHECK_THROWS_AS(NodeLoss(std::vector<double>{0.5}, std::vector<int>{0, 1}), Error);

  RetrieverConfig cfg;
  CHECK(TotalLoss(1.0, 1.0, 1.0, cfg) == 2.5);
  cfg.lambda_align = cfg.lambda_node = 0.0;
  CHECK(TotalLoss(0.7, 3.0, 9.0, cfg) == 0.7);
}

TEST_CASE("tape forward matches the plain evaluation") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    RetrieverParams p = RandomRetriever(rng, 5, 3);
    const Workspace ws = RandomWorkspace(rng, 7, 5);
    const AdjacencyChannels ch = BuildChannels(ws);
    Tape tape;
    const ForwardVars f = ForwardVar(tape, ws, ch, p);
    const Matrix composed = ComposeAdjacency(ch, p.stage_logits.value);
    const Matrix normalized = NormalizedAdjacency(composed);
    std::vector<Matrix> w;
    for (const Parameter& g : p.gcn) w.push_back(g.value);
    const Matrix refined = Propagate(normalized, ws.nodes, w);
    CHECK(MaxAbsDiff(f.composed.value(), composed) <= 1e-12);
    CHECK(MaxAbsDiff(f.normalized.value(), normalized) <= 1e-12);
    CHECK(MaxAbsDiff(f.refined.value(), refined) <= 1e-12);
    const Pooling pool = Pool(ws.query, refined, p.config.tau_pool);
    for (std::size_t i = 0; i < ws.size(); ++i) CHECK(f.beta.value()[i] == doctest::Approx(pool.beta[i]).epsilon(1e-12));

    std::vector<double> probs(f.node_probs.value().data().begin(), f.node_probs.value().data().end());
    CHECK(NodeLossVar(f.node_probs, ws.labels).scalar() == doctest::Approx(NodeLoss(probs, ws.labels)).epsilon(1e-12));
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < ws.size(); ++i) (ws.labels[i] ? pos : neg).push_back(i);
    Var q = tape.Constant(Matrix::RowVector(ws.query));
    CHECK(AlignmentLossVar(q, f.refined, pos, neg).scalar() ==
          doctest::Approx(AlignmentLoss(ws.query, refined, pos, neg)).epsilon(1e-12));
  }
}

TEST_CASE("all-zero node head scores one half") {
  Rng rng(4);
  RetrieverParams p = RandomRetriever(rng, 3, 2);
  for (Parameter* q : {&p.head_w1, &p.head_b1, &p.head_w2, &p.head_b2}) q->value.Fill(0.0);
  const Workspace ws = RandomWorkspace(rng, 5, 3);
  const RetrievalResult r = ScoreWorkspace(ws, p);
  for (double s : r.scores) CHECK(s == 0.5);
  // Equal scores rank by ascending sheet id and all pass the threshold.
  for (std::size_t i = 0; i + 1 < r.ranking.size(); ++i)
    CHECK(r.candidates[r.ranking[i]] < r.candidates[r.ranking[i + 1]]);
  for (bool s : r.selected) CHECK(s);
  const RetrievalResult top = ScoreWorkspace(ws, p, 0.5, 2);
  CHECK(std::count(top.selected.begin(), top.selected.end(), true) == 2);
}

TEST_CASE("composite loss gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const GradCheckResult res = RetrieverGradientCheck(seed);
    INFO("seed " << seed << " worst leaf " << res.worst_param);
    CHECK(res.worst_rel_err <= 1e-4);
  }
}

TEST_CASE("single query with only the positive set has zero contrastive loss") {
  Rng rng(6);
  RetrieverParams p = RandomRetriever(rng, 4, 3);
  p.config.own_negative_set = false;
  p.config.lambda_align = p.config.lambda_node = 0.0;
  const Workspace ws = RandomWorkspace(rng, 6, 4);
  const AdjacencyChannels ch = BuildChannels(ws);
  const Workspace* batch[] = {&ws};
  const AdjacencyChannels* chans[] = {&ch};
  Tape tape;
  Var loss = BatchLossVar(tape, batch, chans, p);
  CHECK(loss.scalar() == 0.0);
  tape.Backward(loss);
  tape.ExportGradients();
  for (const Parameter* q : p.All())
    for (double g : q->grad.data()) CHECK(g == 0.0);
}

TEST_CASE("candidate permutations leave losses unchanged and permute outputs") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const PermutationGap gap = PermutationTrial(rng);
    CHECK(gap.loss <= 1e-10);
    CHECK(gap.output <= 1e-10);
  }
}

TEST_CASE("model files round trip") {
  Rng rng(8);
  RetrieverParams p = RandomRetriever(rng, 6, 2);
  p.config.own_negative_set = false;
  p.config.tau_ret = 0.25;
  const std::string bytes = EncodeRetrieverModel(p);
  const RetrieverParams back = DecodeRetrieverModel(bytes);
  CHECK(EncodeRetrieverModel(back) == bytes);
  CHECK(back.num_stages() == 2);
  CHECK(back.dim == 6);
  CHECK(back.config.own_negative_set == false);
  CHECK(back.config.tau_ret == 0.25);
  CHECK_THROWS_AS(DecodeRetrieverModel(bytes.substr(0, 20)), Error);
  CHECK_THROWS_AS(DecodeRetrieverModel("STEN" + bytes.substr(4)), Error);
}

TEST_CASE("baseline mode only changes the stage count") {
  RetrieverConfig cfg;
  const RetrieverConfig base = ConfigForMode(cfg, RetrieverMode::kBaseline);
  CHECK(base.num_stages == 2);
  CHECK(ConfigForMode(cfg, RetrieverMode::kEnhanced).num_stages == 3);
  CHECK(base.gcn_layers == cfg.gcn_layers);
  CHECK(base.tau_pool == cfg.tau_pool);
  CHECK(base.lambda_node == cfg.lambda_node);
}

TEST_CASE("retrieval over the catalog") {
  const auto& corpus = SmallCorpus();
  EncoderConfig ecfg;
  ecfg.dim = 16;
  const EncoderParams enc = InitEncoder(ecfg, 1);
  const TokenCache tokens = EncodeCatalog(corpus.catalog, enc);
  RetrieverConfig rcfg;
  const RetrieverParams p = InitRetriever(rcfg, ecfg.dim, 2);

  const SheetId first = corpus.catalog.ids().front();
  const SheetId only[] = {first};
  const RetrievalResult single = Retrieve("anything", corpus.catalog, tokens, enc, p, only);
  REQUIRE(single.ranking.size() == 1);
  CHECK(single.candidates[single.ranking[0]] == first);

  const std::vector<SheetId> ids = corpus.catalog.ids();
  std::vector<SheetId> some(ids.begin(), ids.begin() + 12);
  const RetrievalResult r0 = Retrieve("sales for acme", corpus.catalog, tokens, enc, p, some);
  std::reverse(some.begin(), some.end());
  const RetrievalResult r1 = Retrieve("sales for acme", corpus.catalog, tokens, enc, p, some);
  for (std::size_t i = 0; i < r0.ranking.size(); ++i) {
    CHECK(r0.candidates[r0.ranking[i]] == r1.candidates[r1.ranking[i]]);
    CHECK(std::abs(r0.scores[r0.ranking[i]] - r1.scores[r1.ranking[i]]) <= 1e-10);
  }
  const RetrievalResult all = Retrieve("sales", corpus.catalog, tokens, enc, p);
  CHECK(all.candidates.size() == corpus.catalog.size());
  const SheetId missing[] = {999999};
  CHECK_THROWS_AS(Retrieve("x", corpus.catalog, tokens, enc, p, missing), Error);
}

TEST_CASE("retriever training is deterministic") {
  const auto& corpus = SmallCorpus();
  Rng rng(3);
  const CorpusSplits s = MakeSplits(corpus.pairs.size(), corpus.queries.size(), rng);
  EncoderConfig ecfg;
  ecfg.dim = 16;
  const EncoderParams enc = InitEncoder(ecfg, 1);
  const TokenCache tokens = EncodeCatalog(corpus.catalog, enc);
  RetrieverConfig cfg;
  cfg.epochs = 3;
  const auto a = TrainRetriever(corpus.catalog, tokens, enc, corpus.queries, s.query_train, s.query_eval, cfg);
  cfg.threads = 4;
  const auto b = TrainRetriever(corpus.catalog, tokens, enc, corpus.queries, s.query_train, s.query_eval, cfg);
  CHECK(EncodeRetrieverModel(a.params) == EncodeRetrieverModel(b.params));
  CHECK(TrainLogCsv(a.log) == TrainLogCsv(b.log));
  CHECK(a.log.size() == 2 * cfg.epochs);
  for (const auto& row : a.log) {
    CHECK(row.stage == 2);
    CHECK(row.accuracy >= 0.0);
    CHECK(row.accuracy <= 1.0);
  }
}
