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
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sheettoken/error.hpp"
#include "sheettoken/harness.hpp"
#include "sheettoken/metrics.hpp"

using namespace sheettoken;

namespace {

RetrievalResult Result(std::vector<SheetId> ids, std::vector<double> scores) {
  RetrievalResult r;
  r.candidates = std::move(ids);
  r.scores = std::move(scores);
  return r;
}

std::filesystem::path TempFile(const std::string& name, const std::string& body) {
  const auto p = std::filesystem::temp_directory_path() / ("sheettoken_metrics_" + name);
  std::ofstream(p, std::ios::binary) << body;
  return p;
}

SheetCatalog TwoSheets() {
  SheetCatalog c;
  for (SheetId id : {4u, 9u}) {
    SheetRecord r;
    r.sheet_id = id;
    r.source_name = "b.xlsx::s" + std::to_string(id);
    r.num_rows = 2;
    r.num_cols = 1;
    r.columns = {{"h", "1"}};
    c.Insert(r);
  }
  return c;
}

}  // namespace

TEST_CASE("pairwise accuracy") {
  const std::vector<int> y = {1, 0, 1, 1};
  CHECK(PairwiseAccuracy(y, y) == 1.0);
  const std::vector<int> flipped = {0, 1, 0, 0};
  CHECK(PairwiseAccuracy(flipped, y) == 0.0);
  const std::vector<int> three = {1, 0, 0, 1};
  CHECK(PairwiseAccuracy(three, y) == 0.75);
  CHECK_THROWS_AS(PairwiseAccuracy(std::vector<int>{1}, y), Error);
  CHECK_THROWS_AS(PairwiseAccuracy(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST_CASE("normalized entropy") {
  CHECK(BinaryEntropy(0.5) == doctest::Approx(1.0).epsilon(1e-15));
  const double oracle = (0.25 * std::log(4.0) + 0.75 * std::log(4.0 / 3.0)) / std::log(2.0);
  CHECK(BinaryEntropy(0.25) == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(BinaryEntropy(0.25) == doctest::Approx(0.811278).epsilon(1e-6));
  CHECK(BinaryEntropy(0.0) < 1e-10);
  CHECK(BinaryEntropy(1.0) < 1e-10);
  CHECK(NormalizedEntropy(std::vector<double>{0.5, 0.5, 0.5}) == doctest::Approx(1.0));
  CHECK(NormalizedEntropy(std::vector<double>{1e-14, 1.0 - 1e-14}) < 1e-10);
  for (double p = 0.01; p < 1.0; p += 0.01) {
    const double h = BinaryEntropy(p);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
    if (std::abs(p - 0.5) > 1e-9) CHECK(h < 1.0);
  }
}

TEST_CASE("listwise accuracy counts candidate decisions") {
  QueryInstance q;
  q.query = "q";
  q.positives = {1, 2, 3, 4};
  q.negatives = {5, 6, 7, 8};
  // Two mistakes: sheet 4 missed and sheet 8 accepted.
  const RetrievalResult r = Result({1, 2, 3, 4, 5, 6, 7, 8}, {0.9, 0.8, 0.5, 0.4, 0.1, 0.2, 0.3, 0.6});
  const RetrievalResult rs[] = {r};
  const QueryInstance qs[] = {q};
  const ListwiseScore s = ListwiseAccuracy(rs, qs);
  CHECK(s.accuracy == 0.75);
  CHECK(s.exact_set == 0.0);
  CHECK(s.decisions == 8);

  const RetrievalResult perfect = Result({5, 6, 7, 8, 1, 2, 3, 4}, {0, 0, 0, 0, 1, 1, 1, 1});
  const RetrievalResult both[] = {r, perfect};
  const QueryInstance two[] = {q, q};
  const ListwiseScore s2 = ListwiseAccuracy(both, two);
  CHECK(s2.accuracy == 14.0 / 16.0);
  CHECK(s2.exact_set == 0.5);

  const RetrievalResult wrong_ids[] = {Result({1, 2}, {0.1, 0.2})};
  CHECK_THROWS_AS(ListwiseAccuracy(wrong_ids, qs), Error);
}

TEST_CASE("exact set holds exactly when every decision is right") {
  QueryInstance q;
  q.positives = {1};
  q.negatives = {2, 3};
  for (double s2 : {0.2, 0.7})
    for (double s3 : {0.1, 0.5}) {
      const RetrievalResult rs[] = {Result({1, 2, 3}, {0.9, s2, s3})};
      const QueryInstance qs[] = {q};
      const ListwiseScore s = ListwiseAccuracy(rs, qs);
      CHECK((s.exact_set == 1.0) == (s.accuracy == 1.0));
    }
}

TEST_CASE("single-candidate queries reduce to pairwise accuracy") {
  std::vector<RetrievalResult> rs;
  std::vector<QueryInstance> qs;
  std::vector<int> pred, label;
  const double scores[] = {0.9, 0.2, 0.6, 0.4, 0.55};
  const int labels[] = {1, 1, 0, 0, 1};
  for (int i = 0; i < 5; ++i) {
    QueryInstance q;
    (labels[i] ? q.positives : q.negatives).push_back(static_cast<SheetId>(i));
    qs.push_back(q);
    rs.push_back(Result({static_cast<SheetId>(i)}, {scores[i]}));
    pred.push_back(scores[i] >= 0.5);
    label.push_back(labels[i]);
  }
  CHECK(ListwiseAccuracy(rs, qs).accuracy == PairwiseAccuracy(pred, label));
}

TEST_CASE("train log csv") {
  const std::vector<MetricReport> rows = {{1, "train", 0.5, 0.25, 1}, {1, "eval", 1.0, 0.125, 1}};
  CHECK(TrainLogCsv(rows) == "epoch,split,accuracy,entropy\n1,train,0.500000,0.250000\n1,eval,1.000000,0.125000\n");
  const std::string table = MetricTable(rows);
  CHECK(table.find("accuracy") != std::string::npos);
  CHECK(table.find("0.1250") != std::string::npos);
}

TEST_CASE("flops of a single matmul") { CHECK(MatMulFlops(2, 3, 4) == 48); }

TEST_CASE("flops totals equal the summed breakdown") {
  FlopsConfig cfg;
  cfg.candidates = 25;
  cfg.dim = 128;
  cfg.num_stages = 3;
  cfg.gcn_layers = 2;
  for (const FlopsEstimate& e : {EstimateEncoderFlops(cfg), EstimateRetrieverFlops(cfg)}) {
    std::uint64_t enc = 0, graph = 0;
    for (const FlopsEntry& f : e.breakdown) (f.part == "encoder" ? enc : graph) += f.flops;
    CHECK(enc == e.encoder_flops);
    CHECK(graph == e.graph_flops);
    CHECK(e.total() == enc + graph);
  }
  // Propagation layer 1 by hand: A*H is 2*25*25*128 and H*W is 2*25*128*128.
  const FlopsEstimate r = EstimateRetrieverFlops(cfg);
  bool seen = false;
  for (const FlopsEntry& f : r.breakdown) {
    if (f.op == "propagation 1 A*H") {
      CHECK(f.flops == 160000u);
      seen = true;
    }
    if (f.op == "propagation 1 H*W") CHECK(f.flops == 819200u);
  }
  CHECK(seen);
}

TEST_CASE("flops grow with every size parameter") {
  const FlopsConfig base;
  const std::uint64_t t0 = EstimateRetrieverFlops(base).total();
  for (int which = 0; which < 4; ++which) {
    FlopsConfig c = base;
    if (which == 0) c.candidates += 1;
    if (which == 1) c.dim += 1;
    if (which == 2) c.num_stages += 1;
    if (which == 3) c.gcn_layers += 1;
    CHECK(EstimateRetrieverFlops(c).total() > t0);
  }
  FlopsConfig bigger = base;
  bigger.dim *= 2;
  CHECK(EstimateEncoderFlops(bigger).total() > EstimateEncoderFlops(base).total());
  FlopsConfig bad = base;
  bad.dim = 0;
  CHECK_THROWS_AS(EstimateEncoderFlops(bad), Error);
  const FlopsEstimate both[] = {EstimateEncoderFlops(base), EstimateRetrieverFlops(base)};
  const std::string table = FlopsTable(both);
  CHECK(table.find("45.9") != std::string::npos);
  CHECK(table.find("235.0") != std::string::npos);
  CHECK(table.find("not comparable") != std::string::npos);
  CHECK(FlopsJson(both).find("\"graph_flops\"") != std::string::npos);
}

TEST_CASE("ablation report ordering and formats") {
  AblationReport rep;
  rep.seeds = {1, 2, 3, 4, 5};
  const double full[] = {0.80, 0.78, 0.79, 0.81, 0.70};
  const double shallow[] = {0.79, 0.77, 0.79, 0.80, 0.72};
  const double plain[] = {0.70, 0.70, 0.71, 0.72, 0.69};
  for (std::size_t i = 0; i < 5; ++i) {
    rep.rows.push_back({AblationVariant::kFull, rep.seeds[i], full[i], 0.5, 0.1});
    rep.rows.push_back({AblationVariant::kShallow, rep.seeds[i], shallow[i], 0.5, 0.1});
    rep.rows.push_back({AblationVariant::kNoExamples, rep.seeds[i], plain[i], 0.5, 0.1});
  }
  CHECK(rep.OrderedSeeds() == 4);
  CHECK(rep.MeanAccuracy(AblationVariant::kFull) == doctest::Approx(0.776));
  CHECK(rep.MeanOrdered());
  CHECK(rep.Passes());
  rep.rows[3].accuracy = 0.5;  // seed 2 full
  CHECK(rep.OrderedSeeds() == 3);
  CHECK_FALSE(rep.Passes());

  const std::string csv = AblationCsv(rep);
  CHECK(csv.rfind("variant,seed,accuracy,entropy,exact_set\n", 0) == 0);
  CHECK(csv.find("full,mean,") != std::string::npos);
  CHECK(csv.find("shallow,mean,") != std::string::npos);
  CHECK(csv.find("no_examples,mean,") != std::string::npos);
  CHECK(AblationCsv(rep) == csv);
  const std::string json = AblationJson(rep);
  CHECK(json.find("\"passes\": false") != std::string::npos);
  CHECK_THROWS_AS(rep.Accuracy(AblationVariant::kFull, 99), Error);
}

TEST_CASE("external embeddings import") {
  const SheetCatalog catalog = TwoSheets();
  const auto ok = TempFile("ok.csv", "# id, vector\n4,3,4\n9,0,-2\n");
  const TokenCache cache = ImportEmbeddings(ok, catalog);
  CHECK(cache.dim == 2);
  CHECK(cache.entries.at(4) == std::vector<float>{0.6f, 0.8f});
  CHECK(cache.entries.at(9) == std::vector<float>{0.0f, -1.0f});
  CHECK_THROWS_AS(ImportEmbeddings(TempFile("missing.csv", "4,1,0\n"), catalog), Error);
  CHECK_THROWS_AS(ImportEmbeddings(TempFile("ragged.csv", "4,1,0\n9,1\n"), catalog), Error);
  CHECK_THROWS_AS(ImportEmbeddings(TempFile("zero.csv", "4,0,0\n9,1,0\n"), catalog), Error);
  CHECK_THROWS_AS(ImportEmbeddings(TempFile("text.csv", "4,a,0\n9,1,0\n"), catalog), Error);
  CHECK_THROWS_AS(ImportEmbeddings(TempFile("unknown.csv", "4,1,0\n9,1,0\n5,1,1\n"), catalog), Error);
}

TEST_CASE("run configuration overrides") {
  const RunConfig defaults = ParseRunConfig("");
  CHECK(defaults.encoder.dim == EncoderConfig{}.dim);
  const RunConfig rc = ParseRunConfig(R"({"encoder": {"dim": 16, "include_examples": false},
                                          "retriever": {"tau_pool": 0.5}, "flops": {"candidates": 9}})");
  CHECK(rc.encoder.dim == 16);
  CHECK_FALSE(rc.encoder.include_examples);
  CHECK(rc.retriever.tau_pool == 0.5);
  CHECK(rc.flops.candidates == 9);
  CHECK(rc.fabricate.neg_ratio == 5);
  CHECK_THROWS_AS(ParseRunConfig(R"({"stage3": {}})"), Error);
  CHECK_THROWS_AS(ParseRunConfig(R"({"encoder": {"epochs": 1.5}})"), Error);
  CHECK_THROWS_AS(ParseRunConfig(R"({"encoder": {"learning_rate": "fast"}})"), Error);
}

TEST_CASE("scaled template counts") {
  const TemplateCounts ref;
  const TemplateCounts same = ScaleTemplateCounts(ref.total());
  CHECK(same.financial_statements == ref.financial_statements);
  CHECK(same.text_sentiment == ref.text_sentiment);
  for (std::size_t n : {1u, 10u, 60u, 500u}) CHECK(ScaleTemplateCounts(n).total() == n);
  CHECK_THROWS_AS(ScaleTemplateCounts(0), Error);
}

TEST_CASE("fabricated corpus matches a stored and reloaded copy") {
  FabricationConfig cfg;
  cfg.seed = 11;
  cfg.num_queries = 10;
  const FabricationRun run = FabricateCorpus({}, 40, cfg);
  CHECK(run.corpus.stats.positives == 40);
  const auto dir = std::filesystem::temp_directory_path() / "sheettoken_metrics_corpus";
  std::filesystem::remove_all(dir);
  StoreCorpus(run.corpus, run.splits, dir);
  const CorpusData loaded = LoadCorpusData(dir);
  const CorpusData direct = ToCorpusData(run);
  CHECK(loaded.catalog == direct.catalog);
  CHECK(loaded.pairs == direct.pairs);
  CHECK(loaded.queries == direct.queries);
  CHECK(loaded.splits == direct.splits);
  std::filesystem::remove_all(dir);
}
