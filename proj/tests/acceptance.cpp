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
// Acceptance runner: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset. Exit status is nonzero if any selected
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sheettoken/corpus.hpp"
#include "sheettoken/encoder.hpp"
#include "sheettoken/fabricate.hpp"
#include "sheettoken/harness.hpp"
#include "sheettoken/matrix.hpp"
#include "sheettoken/retriever.hpp"

using namespace sheettoken;
using namespace sheettoken::testing;

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) { return std::chrono::duration<double>(Clock::now() - since).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

const CorpusData& Reference() {
  static const CorpusData data = ReferenceCorpus(42);
  return data;
}

// ---- 1 ---------------------------------------------------------------------

Outcome Gradients() {
  const auto start = Clock::now();
  double enc = 0.0, ret = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    enc = std::max(enc, EncoderGradientCheck(seed, 1e-5).worst_rel_err);
    ret = std::max(ret, RetrieverGradientCheck(seed, 1e-5).worst_rel_err);
  }
  const double t = Seconds(start);
  return {enc <= 1e-4 && ret <= 1e-4 && t < 30.0,
          Fmt("20 seeds, worst rel err stage 1 %.2e, stage 2 %.2e; %.1f s", enc, ret, t)};
}

// ---- 2 ---------------------------------------------------------------------

Matrix OneHotLogits(const std::vector<std::size_t>& picks) {
  Matrix l(picks.size(), kNumChannels);
  for (std::size_t t = 0; t < picks.size(); ++t)
    for (std::size_t c = 0; c < kNumChannels; ++c) l(t, c) = c == picks[t] ? 0.0 : -1e4;
  return l;
}

Outcome Composition() {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.Below(5);
    const std::size_t stages = 1 + rng.Below(4);
    const AdjacencyChannels ch = RandomChannels(rng, m);
    const Matrix logits = RandomMatrix(rng, stages, kNumChannels, 2.0);
    worst = std::max(worst, MaxAbsDiff(ComposeAdjacency(ch, logits), BruteForceCompose(ch, logits)));
  }
  // Every one-hot stage sequence of length 1..3 against the literal product.
  double one_hot = 0.0;
  std::size_t cases = 0;
  const AdjacencyChannels ch = RandomChannels(rng, 4);
  std::function<void(std::vector<std::size_t>&)> walk = [&](std::vector<std::size_t>& picks) {
    if (!picks.empty()) {
      Matrix literal = ch[picks[0]];
      for (std::size_t t = 1; t < picks.size(); ++t) literal = MatMul(literal, ch[picks[t]]);
      one_hot = std::max(one_hot, MaxAbsDiff(ComposeAdjacency(ch, OneHotLogits(picks)), literal));
      ++cases;
    }
    if (picks.size() == 3) return;
    for (std::size_t k = 0; k < kNumChannels; ++k) {
      picks.push_back(k);
      walk(picks);
      picks.pop_back();
    }
  };
  std::vector<std::size_t> picks;
  walk(picks);
  return {worst <= 1e-12 && one_hot <= 1e-12,
          Fmt("100 random instances max diff %.2e; %zu one-hot sequences max diff %.2e", worst, cases, one_hot)};
}

// ---- 3 ---------------------------------------------------------------------

Outcome Invariants() {
  Rng rng(11);
  double row = 0.0, beta = 0.0, shift = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.Below(8);
    const AdjacencyChannels ch = RandomChannels(rng, m);
    Matrix logits = RandomMatrix(rng, 1 + rng.Below(4), kNumChannels);
    const Matrix composed = ComposeAdjacency(ch, logits);
    const Matrix n = NormalizedAdjacency(composed);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += n(i, j);
      row = std::max(row, std::abs(s - 1.0));
    }
    const Workspace ws = RandomWorkspace(rng, m, 6);
    const Pooling p = Pool(ws.query, ws.nodes, 0.5 + rng.Uniform());
    beta = std::max(beta, std::abs(std::accumulate(p.beta.begin(), p.beta.end(), 0.0) - 1.0));

    const double c = 50.0 * rng.Normal();
    for (std::size_t k = 0; k < kNumChannels; ++k) logits(0, k) += c;
    shift = std::max(shift, MaxAbsDiff(ComposeAdjacency(ch, logits), composed));
    std::vector<double> v(1 + rng.Below(6)), w;
    for (double& x : v) x = rng.Normal();
    for (double x : v) w.push_back(x + c);
    const auto a = Softmax(v), b = Softmax(w);
    for (std::size_t i = 0; i < v.size(); ++i) shift = std::max(shift, std::abs(a[i] - b[i]));
  }

  // InfoNCE over a single query: plain function and the batched tape term.
  bool zero = true;
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = RandomUnit(rng, 5);
    const std::vector<std::vector<double>> one = {RandomUnit(rng, 5)};
    zero = zero && RetrievalLoss(q, one, 0, 0.05 + rng.Uniform()) == 0.0;
    RetrieverParams p = RandomRetriever(rng, 4, 3);
    p.config.own_negative_set = false;
    const Workspace ws = RandomWorkspace(rng, 6, 4);
    const AdjacencyChannels chans = BuildChannels(ws);
    const Workspace* batch[] = {&ws};
    const AdjacencyChannels* cs[] = {&chans};
    Tape t;
    BatchLoss parts;
    BatchLossVar(t, batch, cs, p, &parts);
    zero = zero && parts.retrieval == 0.0;
  }
  return {row <= 1e-12 && beta <= 1e-12 && zero && shift <= 1e-12,
          Fmt("A_bar row sum err %.2e, beta sum err %.2e, B=1 InfoNCE %s, shift err %.2e", row, beta,
              zero ? "exactly 0" : "nonzero", shift)};
}

// ---- 4 ---------------------------------------------------------------------

Outcome Fabricator() {
  const auto start = Clock::now();
  FabricationConfig cfg;
  cfg.seed = 42;
  const FabricationRun run = FabricateCorpus({}, 200, cfg);
  const FabricatedCorpus& c = run.corpus;
  double lo = 1.0, hi = 0.0;
  for (const FabricatedPair& p : c.fabricated) {
    lo = std::min(lo, p.column_overlap);
    hi = std::max(hi, p.column_overlap);
  }
  std::size_t pos = 0, neg = 0;
  for (const PairExample& p : c.pairs) (p.label ? pos : neg) += 1;
  bool balanced = !c.queries.empty();
  for (const QueryInstance& q : c.queries) balanced = balanced && q.positives.size() == q.negatives.size();
  const double t = Seconds(start);
  const bool pass = c.fabricated.size() == 200 && lo >= 0.5 && hi <= 0.7 &&
                    std::abs(c.stats.string_rate - 0.20) <= 0.03 && c.stats.numeric_min >= 0.0 && neg == 5 * pos &&
                    balanced && t < 60.0;
  return {pass, Fmt("%zu pairs, overlap [%.3f, %.3f], string rate %.4f, numeric min %.3g, neg:pos %zu:%zu, "
                    "%zu queries balanced %s; %.1f s",
                    c.fabricated.size(), lo, hi, c.stats.string_rate, c.stats.numeric_min, neg, pos, c.queries.size(),
                    balanced ? "yes" : "no", t)};
}

// ---- 5 and 6 ---------------------------------------------------------------

struct ReferenceRun {
  EncoderTrainResult encoder;
  TokenCache tokens;
  RetrieverTrainResult retriever;
  double encoder_seconds = 0.0, retriever_seconds = 0.0;
};

const ReferenceRun& Trained() {
  static const ReferenceRun run = [] {
    const CorpusData& d = Reference();
    ReferenceRun r;
    EncoderConfig ec;
    ec.seed = 42;
    auto start = Clock::now();
    r.encoder = TrainEncoder(d.catalog, d.pairs, d.splits.pair_train, d.splits.pair_eval, ec);
    r.encoder_seconds = Seconds(start);
    r.tokens = EncodeCatalog(d.catalog, r.encoder.params);
    RetrieverConfig rc;
    rc.seed = 42;
    start = Clock::now();
    r.retriever =
        TrainRetriever(d.catalog, r.tokens, r.encoder.params, d.queries, d.splits.query_train, d.splits.query_eval, rc);
    r.retriever_seconds = Seconds(start);
    return r;
  }();
  return run;
}

std::vector<MetricReport> EvalRows(const std::vector<MetricReport>& log) {
  std::vector<MetricReport> out;
  for (const MetricReport& r : log)
    if (r.split == "eval") out.push_back(r);
  return out;
}

Outcome StageOne() {
  const ReferenceRun& r = Trained();
  const auto rows = EvalRows(r.encoder.log);
  if (rows.size() != 30) return {false, Fmt("expected 30 eval rows, got %zu", rows.size())};
  const MetricReport& first = rows.front();
  const MetricReport& last = rows.back();
  const bool pass = last.accuracy >= 0.90 && last.entropy < first.entropy && r.encoder_seconds < 300.0;
  return {pass, Fmt("%zu pairs; eval accuracy at epoch 30 %.4f; eval entropy epoch 1 %.4f -> epoch 30 %.4f; %.1f s",
                    Reference().pairs.size(), last.accuracy, first.entropy, last.entropy, r.encoder_seconds)};
}

Outcome StageTwo() {
  const ReferenceRun& r = Trained();
  const auto rows = EvalRows(r.retriever.log);
  if (rows.size() != 50) return {false, Fmt("expected 50 eval rows, got %zu", rows.size())};
  const auto best = std::max_element(rows.begin(), rows.end(), [](const MetricReport& a, const MetricReport& b) {
    return a.accuracy < b.accuracy;
  });
  const bool pass = best->accuracy >= 0.80 && r.retriever_seconds < 600.0;
  return {pass, Fmt("eval listwise accuracy best %.4f (epoch %d), final %.4f; target 0.80; %.1f s", best->accuracy,
                    best->epoch, rows.back().accuracy, r.retriever_seconds)};
}

// ---- 7 ---------------------------------------------------------------------

Outcome Ablation() {
  const auto start = Clock::now();
  const std::uint64_t seeds[] = {1, 2, 3, 4, 5};
  const AblationReport rep = RunAblations(Reference(), seeds, PipelineConfig{}, [](const std::string& msg) {
    std::fprintf(stderr, "  ablation %s\n", msg.c_str());
  });
  return {rep.Passes(), Fmt("mean full %.4f, shallow %.4f, w/o examples %.4f; ordered on %zu/5 seeds; %.0f s",
                            rep.MeanAccuracy(AblationVariant::kFull), rep.MeanAccuracy(AblationVariant::kShallow),
                            rep.MeanAccuracy(AblationVariant::kNoExamples), rep.OrderedSeeds(), Seconds(start))};
}

// ---- 8 ---------------------------------------------------------------------

Outcome Determinism() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) failures.push_back(what);
  };

  FabricationConfig fc;
  fc.seed = 42;
  const FabricationRun a = FabricateCorpus({}, 0, fc);
  fc.threads = 4;
  const FabricationRun b = FabricateCorpus({}, 0, fc);
  const std::string cat = SerializeCatalog(a.corpus.catalog);
  const std::string pairs = SerializePairs(a.corpus.pairs);
  const std::string queries = SerializeQueries(a.corpus.queries);
  expect(cat == SerializeCatalog(b.corpus.catalog), "sheets.json differs across runs");
  expect(pairs == SerializePairs(b.corpus.pairs), "train.json differs across runs");
  expect(queries == SerializeQueries(b.corpus.queries), "query.json differs across runs");
  expect(a.splits == b.splits, "splits differ across runs");
  expect(StatsJson(a.corpus.stats) == StatsJson(b.corpus.stats), "stats differ across runs");

  expect(SerializeCatalog(ParseCatalog(cat)) == cat && ParseCatalog(cat) == a.corpus.catalog,
         "sheets.json round trip");
  expect(SerializePairs(ParsePairs(pairs)) == pairs && ParsePairs(pairs) == a.corpus.pairs, "train.json round trip");
  expect(SerializeQueries(ParseQueries(queries)) == queries && ParseQueries(queries) == a.corpus.queries,
         "query.json round trip");

  const CorpusData d = ToCorpusData(a);
  EncoderConfig ec;
  ec.epochs = 2;
  auto train_encoder = [&] { return TrainEncoder(d.catalog, d.pairs, d.splits.pair_train, d.splits.pair_eval, ec); };
  const EncoderTrainResult e1 = train_encoder(), e2 = train_encoder();
  expect(TrainLogCsv(e1.log) == TrainLogCsv(e2.log), "encoder train log differs");
  expect(EncodeEncoderModel(e1.params) == EncodeEncoderModel(e2.params), "encoder model bytes differ");
  expect(EncodeEncoderModel(DecodeEncoderModel(EncodeEncoderModel(e1.params))) == EncodeEncoderModel(e1.params),
         "encoder model round trip");

  const TokenCache t1 = EncodeCatalog(d.catalog, e1.params, 1);
  const TokenCache t2 = EncodeCatalog(d.catalog, e2.params, 4);
  const std::string tok = EncodeTokenCache(t1);
  expect(tok == EncodeTokenCache(t2), "token cache bytes differ");
  expect(DecodeTokenCache(tok) == t1 && EncodeTokenCache(DecodeTokenCache(tok)) == tok, "token cache round trip");

  RetrieverConfig rc;
  rc.epochs = 2;
  auto train_retriever = [&] {
    return TrainRetriever(d.catalog, t1, e1.params, d.queries, d.splits.query_train, d.splits.query_eval, rc);
  };
  const RetrieverTrainResult r1 = train_retriever(), r2 = train_retriever();
  expect(TrainLogCsv(r1.log) == TrainLogCsv(r2.log), "retriever train log differs");
  expect(EncodeRetrieverModel(r1.params) == EncodeRetrieverModel(r2.params), "retriever model bytes differ");
  expect(EncodeRetrieverModel(DecodeRetrieverModel(EncodeRetrieverModel(r1.params))) ==
             EncodeRetrieverModel(r1.params),
         "retriever model round trip");

  std::string detail = failures.empty() ? "corpora, splits, train logs, model files and token cache identical; "
                                          "json and binary formats round trip"
                                        : "";
  for (const std::string& f : failures) detail += (detail.empty() ? "" : "; ") + f;
  return {failures.empty(), detail};
}

// ---- 9 ---------------------------------------------------------------------

Outcome Permutation() {
  Rng rng(77);
  double loss = 0.0, output = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const PermutationGap gap = PermutationTrial(rng);
    loss = std::max(loss, gap.loss);
    output = std::max(output, gap.output);
  }
  return {loss <= 1e-10 && output <= 1e-10,
          Fmt("50 workspaces, max loss change %.2e, max y_hat/beta mismatch %.2e", loss, output)};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "gradient correctness", Gradients},
    {2, "composition oracle", Composition},
    {3, "normalization and simplex invariants", Invariants},
    {4, "fabricator statistics", Fabricator},
    {5, "stage 1 training", StageOne},
    {6, "stage 2 training", StageTwo},
    {7, "ablation ordering", Ablation},
    {8, "determinism and formats", Determinism},
    {9, "permutation equivariance", Permutation},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    char* end = nullptr;
    const long v = std::strtol(argv[i], &end, 10);
    if (*end != '\0' || v < 1 || v > 9) {
      std::fprintf(stderr, "usage: %s [criterion 1-9 ...]\n", argv[0]);
      return 2;
    }
    selected.insert(static_cast<int>(v));
  }
  int failed = 0;
  for (const Criterion& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d: %s  %s: %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
