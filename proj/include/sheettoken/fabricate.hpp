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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sheettoken/corpus.hpp"
#include "sheettoken/extract.hpp"
#include "sheettoken/rng.hpp"

namespace sheettoken {

struct FabricationConfig {
  double col_overlap_lo = 0.5;
  double col_overlap_hi = 0.7;
  double row_overlap = 0.5;
  double p_string = 0.20;
  // |epsilon| is drawn uniformly from [eps_lo, eps_hi] with a random sign.
  double eps_lo = 0.1;
  double eps_hi = 0.5;
  int neg_ratio = 5;
  std::uint64_t seed = 42;

  // Listwise query construction.
  std::size_t num_queries = 134;
  std::size_t min_positives = 6;
  std::size_t max_positives = 24;

  PlaceholderPolicy placeholders;
  // Worker threads for pair fabrication; output does not depend on it.
  unsigned threads = 1;
};

void ValidateConfig(const FabricationConfig& cfg);

// Counters for one fabricated pair, used by the statistics report.
struct NoiseStats {
  std::size_t string_chars = 0;     // source characters eligible for replacement
  std::size_t string_replaced = 0;  // of those, how many were replaced
  std::size_t numeric_values = 0;
  double numeric_min = 0.0;
};

struct FabricatedPair {
  CellGrid source;
  CellGrid target;
  // (source column, target column) for every shared column.
  std::vector<std::pair<std::size_t, std::size_t>> alignment;
  // Template column / data-row indices kept on each side, in output order.
  std::vector<std::size_t> source_columns, target_columns;
  std::vector<std::size_t> source_rows, target_rows;
  double column_overlap = 0.0;  // shared columns / template columns
  NoiseStats stats;
  friend bool operator==(const FabricatedPair& a, const FabricatedPair& b) {
    return a.source == b.source && a.target == b.target && a.alignment == b.alignment &&
           a.source_rows == b.source_rows && a.target_rows == b.target_rows;
  }
};

// Number of shared columns for a draw f: round(f * C), clamped so that the
// shared fraction stays inside [lo, hi] whenever an integer count allows it.
std::size_t SharedColumnCount(std::size_t num_cols, double f, double lo, double hi);

FabricatedPair FabricatePair(const CellGrid& table, const FabricationConfig& cfg, Rng& rng);

// Table-name prefix rule.
std::string SchemaNoise(std::string_view header, std::string_view table_name);

// ASCII transliteration from the bundled table; unknown scalars become "?".
std::string Transliterate(std::string_view text);
// Neighbor list of a character in the bundled QWERTY map (empty if absent).
std::string_view KeyboardNeighbors(char c);
// The `choice`-th neighbor (modulo the list size), preserving case.
char PerturbChar(char c, std::size_t choice);
std::string StringNoise(std::string_view text, double p, Rng& rng, NoiseStats* stats = nullptr);

// Half-normal resampling around perturbed column statistics.
std::vector<double> NumericNoise(const std::vector<double>& column, const FabricationConfig& cfg,
                                 Rng& rng);
// Epsilon from [-hi, -lo] U [lo, hi].
double DrawEpsilon(const FabricationConfig& cfg, Rng& rng);

// Query attributes of a sheet, keyed by attribute name
// ("company", "fiscal_year", "quarter", "sub_category").
using AttributeMap = std::map<std::string, std::string>;
AttributeMap DeriveAttributes(const CellGrid& grid);
std::string WorkbookOf(std::string_view source_name);
std::string TabOf(std::string_view source_name);

struct QueryTemplate {
  std::vector<std::pair<std::string, std::string>> terms;  // attribute -> value
  std::string Render() const;
  bool Matches(const AttributeMap& attrs) const;
};

struct FabricationStats {
  std::size_t templates = 0;
  std::size_t sheets = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t queries = 0;
  std::size_t skipped_queries = 0;
  double mean_positives = 0.0;
  double min_overlap = 0.0, max_overlap = 0.0, mean_overlap = 0.0;
  std::size_t string_chars = 0, string_replaced = 0;
  double string_rate = 0.0;
  std::size_t numeric_values = 0;
  double numeric_min = 0.0;
};

struct FabricatedCorpus {
  SheetCatalog catalog;
  std::vector<PairExample> pairs;
  std::vector<QueryInstance> queries;
  std::vector<FabricatedPair> fabricated;  // one per template
  FabricationStats stats;
  std::vector<std::string> warnings;
};

FabricatedCorpus BuildCorpus(const std::vector<CellGrid>& templates, const FabricationConfig& cfg);

CorpusSplits MakeSplits(std::size_t num_pairs, std::size_t num_queries, Rng& rng);

// Writes sheets.json, train.json, query.json, splits.json and stats.json.
void StoreCorpus(const FabricatedCorpus& corpus, const CorpusSplits& splits,
                 const std::filesystem::path& dir);
std::string StatsJson(const FabricationStats& stats);

// Bundled template generator covering the corpus categories. Counts default
// to one template per pair of the reference breakdown (307 in total).
struct TemplateCounts {
  std::size_t financial_statements = 126;
  std::size_t sales_records = 28;
  std::size_t inventory = 60;
  std::size_t human_resources = 24;
  std::size_t project_management = 18;
  std::size_t stock_ticks = 24;
  std::size_t financial_business = 18;
  std::size_t global_indices = 6;
  std::size_t movie_reviews = 2;
  std::size_t text_sentiment = 1;
  std::size_t total() const;
};
std::vector<CellGrid> GenerateTemplates(const TemplateCounts& counts, std::uint64_t seed);

// Loads templates from a directory: every CSV directly inside is a one-tab
// workbook named by its stem; every subdirectory is a workbook whose CSVs are
// tabs ("<dir>::<stem>"). Sorted by source name.
std::vector<CellGrid> LoadTemplates(const std::filesystem::path& dir);
void StoreTemplates(const std::vector<CellGrid>& templates, const std::filesystem::path& dir);

}  // namespace sheettoken
