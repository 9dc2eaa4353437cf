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
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "sheettoken/error.hpp"
#include "sheettoken/fabricate.hpp"

using namespace sheettoken;

namespace {

CellGrid NumericTable(std::size_t cols, std::size_t rows, std::string name = "wb.xlsx::Sales") {
  CellGrid g;
  g.source_name = std::move(name);
  std::vector<Cell> head;
  for (std::size_t j = 0; j < cols; ++j) head.emplace_back("h" + std::to_string(j));
  g.cells.push_back(head);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<Cell> row;
    for (std::size_t j = 0; j < cols; ++j) {
      if (j % 2 == 0) {
        row.emplace_back(std::to_string(r * 10 + j) + ".5");
      } else {
        row.emplace_back("text value " + std::to_string(r));
      }
    }
    g.cells.push_back(row);
  }
  return g;
}

// First neighbor of `key` read straight from the shipped map.
char FirstNeighborFromFile(char key) {
  std::ifstream in(SHEETTOKEN_QWERTY_FILE);
  REQUIRE(in.good());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line[0] == key) return line[2];
  }
  return '\0';
}

}  // namespace

TEST_CASE("schema noise") {
  CHECK(SchemaNoise("Vendor", "Sales") == "Sales_Vendor");
  CHECK(SchemaNoise("", "T") == "T_");
  CHECK(SchemaNoise("X", "") == "_X");
}

TEST_CASE("string noise") {
  Rng rng(1);
  CHECK(StringNoise("\xc3\xa9", 0.0, rng) == "e");
  CHECK(StringNoise("Caf\xc3\xa9 M\xc3\xbcller", 0.0, rng) == "Cafe Muller");
  CHECK(Transliterate("\xe2\x82\xac") == "EUR");
  CHECK(Transliterate("\xf0\x9f\x98\x80") == "?");
  CHECK(PerturbChar('a', 0) == FirstNeighborFromFile('a'));
  CHECK(PerturbChar('A', 0) == std::toupper(FirstNeighborFromFile('a')));
  CHECK(PerturbChar('-', 0) == '-');
  CHECK(StringNoise("---", 1.0, rng) == "---");

  std::string out = StringNoise("a", 1.0, rng);
  CHECK(KeyboardNeighbors('a').find(out[0]) != std::string_view::npos);
  CHECK_THROWS_AS(StringNoise("a", 1.5, rng), Error);

  NoiseStats stats;
  const std::string text(20000, 'k');
  StringNoise(text, 0.2, rng, &stats);
  CHECK(stats.string_chars == 20000);
  CHECK(std::abs(static_cast<double>(stats.string_replaced) / 20000.0 - 0.2) < 0.02);
}

TEST_CASE("numeric noise") {
  FabricationConfig cfg;
  Rng rng(3);
  std::vector<double> col{-5, 3, 10, -1, 0.5};
  for (double v : NumericNoise(col, cfg, rng)) CHECK(v >= 0.0);
  for (double v : NumericNoise(std::vector<double>(8, 0.0), cfg, rng)) CHECK(v == 0.0);
  CHECK_THROWS_AS(NumericNoise({}, cfg, rng), Error);

  for (int trial = 0; trial < 200; ++trial) {
    const double e = DrawEpsilon(cfg, rng);
    CHECK(std::abs(e) >= 0.1);
    CHECK(std::abs(e) <= 0.5);
  }

  // Column with mean 100 and population sd 10.
  std::vector<double> base(10000);
  for (std::size_t i = 0; i < base.size(); ++i) base[i] = i % 2 ? 110.0 : 90.0;
  Rng a(77), b(77);
  const std::vector<double> noisy = NumericNoise(base, cfg, a);
  // Oracle: the same draws written out directly.
  const double mag_mu = b.Uniform(0.1, 0.5);
  const double eps_mu = b.Bernoulli(0.5) ? -mag_mu : mag_mu;
  const double mag_sd = b.Uniform(0.1, 0.5);
  const double eps_sd = b.Bernoulli(0.5) ? -mag_sd : mag_sd;
  double oracle_mean = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    oracle_mean += std::abs(b.Normal(100.0 * (1 + eps_mu), 10.0 * (1 + eps_sd)));
    mean += noisy[i];
  }
  oracle_mean /= static_cast<double>(base.size());
  mean /= static_cast<double>(base.size());
  CHECK(mean == doctest::Approx(oracle_mean).epsilon(1e-12));
  CHECK(mean >= 100.0 * 0.5 - 1.0);
  CHECK(mean <= 100.0 * 1.5 + 1.0);
}

TEST_CASE("shared column count") {
  CHECK(SharedColumnCount(10, 0.5, 0.5, 0.7) == 5);
  CHECK(SharedColumnCount(10, 0.7, 0.5, 0.7) == 7);
  CHECK(SharedColumnCount(4, 0.55, 0.5, 0.7) == 2);
  CHECK(SharedColumnCount(7, 0.69, 0.5, 0.7) == 4);
  for (std::size_t c = 4; c <= 40; ++c) {
    for (double f = 0.5; f <= 0.7; f += 0.01) {
      const double frac = static_cast<double>(SharedColumnCount(c, f, 0.5, 0.7)) / static_cast<double>(c);
      CHECK(frac >= 0.5);
      CHECK(frac <= 0.7);
    }
  }
}

TEST_CASE("fabricate pair") {
  FabricationConfig cfg;
  cfg.col_overlap_lo = cfg.col_overlap_hi = 0.5;
  Rng rng(9);
  const CellGrid table = NumericTable(10, 12);
  FabricatedPair p = FabricatePair(table, cfg, rng);
  CHECK(p.alignment.size() == 5);
  CHECK(p.source_rows.size() + p.target_rows.size() == 12 + 6);

  std::set<std::size_t> s, t;
  for (auto [i, j] : p.alignment) {
    CHECK(s.insert(i).second);
    CHECK(t.insert(j).second);
    // Target keeps the pre-noise header; source carries the table prefix.
    CHECK(*p.source.cells[0][i] == "Sales_" + *p.target.cells[0][j]);
    CHECK(table.cells[0][p.source_columns[i]] == p.target.cells[0][j]);
  }
  CHECK_THROWS_AS(FabricatePair(NumericTable(3, 12), cfg, rng), Error);
  CHECK_THROWS_AS(FabricatePair(NumericTable(6, 7), cfg, rng), Error);
}

TEST_CASE("fabricate pair overlap and determinism") {
  FabricationConfig cfg;
  cfg.p_string = 0.0;
  cfg.eps_lo = cfg.eps_hi = 0.1;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const CellGrid table = NumericTable(4 + seed % 9, 10);
    FabricatedPair p = FabricatePair(table, cfg, rng);
    CHECK(p.column_overlap >= 0.5);
    CHECK(p.column_overlap <= 0.7);
    Rng again(seed);
    CHECK(FabricatePair(table, cfg, again) == p);
  }
}

TEST_CASE("derive attributes") {
  CellGrid g{"acme_financials_2023.xlsx::balance_sheet", {{"A"}, {"1"}}};
  AttributeMap a = DeriveAttributes(g);
  CHECK(a.at("company") == "acme");
  CHECK(a.at("fiscal_year") == "2023");
  CHECK(a.at("sub_category") == "balance_sheet");
  CHECK(a.count("quarter") == 0);

  g = {"hooli_sales_2021.xlsx::Q3", {{"A"}, {"1"}}};
  a = DeriveAttributes(g);
  CHECK(a.at("quarter") == "q3");
  CHECK(a.count("sub_category") == 0);

  g = {"stark_inventory.xlsx::inbound", {{"SKU", "Movement Date"}, {"1", std::nullopt}, {"2", "2020-03-04"}}};
  a = DeriveAttributes(g);
  CHECK(a.at("fiscal_year") == "2020");
  CHECK(a.at("company") == "stark");

  g = {"indices_us.xlsx::daily", {{"A"}, {"1"}}};
  CHECK(DeriveAttributes(g).count("company") == 0);

  QueryTemplate q{{{"company", "acme"}, {"fiscal_year", "2023"}}};
  CHECK(q.Render() == "retrieve all sheets for company acme and fiscal year 2023");
  CHECK(q.Matches({{"company", "acme"}, {"fiscal_year", "2023"}, {"quarter", "q1"}}));
  CHECK_FALSE(q.Matches({{"company", "acme"}}));
}

TEST_CASE("build corpus at reference scale") {
  const std::vector<CellGrid> templates = GenerateTemplates({}, 42);
  REQUIRE(templates.size() == 307);
  FabricationConfig cfg;
  const FabricatedCorpus corpus = BuildCorpus(templates, cfg);
  CHECK(corpus.catalog.size() == 614);
  CHECK(corpus.stats.positives == 307);
  CHECK(corpus.stats.negatives == 1535);
  CHECK(corpus.pairs.size() == 1842);
  CHECK(corpus.queries.size() == 134);

  std::map<SheetId, std::string> workbook;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    workbook[2 * i] = workbook[2 * i + 1] = WorkbookOf(templates[i].source_name);
  }
  std::set<std::pair<SheetId, SheetId>> seen;
  for (std::size_t k = 0; k < corpus.pairs.size(); ++k) {
    const PairExample& p = corpus.pairs[k];
    CHECK(p.label == (k % 6 == 0 ? 1 : 0));
    if (p.label == 0) CHECK(workbook[p.id1] != workbook[p.id2]);
    CHECK(seen.insert(std::minmax(p.id1, p.id2)).second);
  }
  for (const QueryInstance& q : corpus.queries) {
    CHECK(q.positives.size() == q.negatives.size());
    CHECK_NOTHROW(ValidateQuery(q, &corpus.catalog, 0));
  }
  CHECK(corpus.stats.min_overlap >= 0.5);
  CHECK(corpus.stats.max_overlap <= 0.7);
  CHECK(corpus.stats.numeric_min >= 0.0);
  CHECK(std::abs(corpus.stats.string_rate - 0.2) <= 0.03);

  FabricationConfig threaded = cfg;
  threaded.threads = 4;
  const FabricatedCorpus parallel = BuildCorpus(templates, threaded);
  CHECK(SerializeCatalog(parallel.catalog) == SerializeCatalog(corpus.catalog));
  CHECK(SerializePairs(parallel.pairs) == SerializePairs(corpus.pairs));
  CHECK(SerializeQueries(parallel.queries) == SerializeQueries(corpus.queries));
}

TEST_CASE("build corpus needs two workbooks") {
  std::vector<CellGrid> one{NumericTable(6, 10, "a.xlsx::x"), NumericTable(6, 10, "a.xlsx::y")};
  CHECK_THROWS_AS(BuildCorpus(one, {}), Error);
}

TEST_CASE("splits") {
  Rng rng(42);
  CorpusSplits s = MakeSplits(1842, 134, rng);
  CHECK(s.pair_train.size() == 1658);
  CHECK(s.pair_eval.size() == 184);
  CHECK(s.query_train.size() == 107);
  CHECK(s.query_eval.size() == 27);
  std::set<std::size_t> all(s.pair_train.begin(), s.pair_train.end());
  for (std::size_t i : s.pair_eval) CHECK(all.insert(i).second);
  CHECK(all.size() == 1842);
  CHECK(*all.rbegin() == 1841);
  Rng again(42);
  CHECK(MakeSplits(1842, 134, again) == s);
}

TEST_CASE("template directory round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "sheettoken_test_templates";
  std::filesystem::remove_all(dir);
  TemplateCounts counts{};
  counts = TemplateCounts{2, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  const std::vector<CellGrid> templates = GenerateTemplates(counts, 7);
  StoreTemplates(templates, dir);
  std::vector<CellGrid> sorted = templates;
  std::sort(sorted.begin(), sorted.end(),
            [](const CellGrid& a, const CellGrid& b) { return a.source_name < b.source_name; });
  CHECK(LoadTemplates(dir) == sorted);
}
