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
#include "sheettoken/fabricate.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>
#include <thread>
#include <unordered_map>

#include "bundled_data.hpp"
#include "json.hpp"
#include "sheettoken/error.hpp"

namespace sheettoken {

namespace {

// Stream indices for corpus-level random decisions.
constexpr std::uint64_t kNegativeStream = 0x4E454741ULL;
constexpr std::uint64_t kQueryStream = 0x51554552ULL;

class KeyboardMap {
 public:
  KeyboardMap() {
    std::string_view data = bundled::QwertyAdjacency();
    while (!data.empty()) {
      const auto nl = data.find('\n');
      std::string_view line = data.substr(0, nl);
      data = nl == std::string_view::npos ? std::string_view{} : data.substr(nl + 1);
      if (line.empty() || line[0] == '#') continue;
      const auto sp = line.find(' ');
      if (sp != 1 || line.size() < 3) continue;
      neighbors_[static_cast<unsigned char>(line[0])] = std::string(line.substr(2));
    }
  }
  std::string_view Get(char c) const { return neighbors_[static_cast<unsigned char>(c)]; }

 private:
  std::string neighbors_[256];
};

const KeyboardMap& Keyboard() {
  static const KeyboardMap map;
  return map;
}

class TranslitTable {
 public:
  TranslitTable() {
    std::string_view data = bundled::Transliteration();
    while (!data.empty()) {
      const auto nl = data.find('\n');
      std::string_view line = data.substr(0, nl);
      data = nl == std::string_view::npos ? std::string_view{} : data.substr(nl + 1);
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string_view::npos) continue;
      std::uint32_t cp = 0;
      std::from_chars(line.data(), line.data() + tab, cp, 16);
      table_.emplace(cp, std::string(line.substr(tab + 1)));
    }
  }
  const std::string* Find(std::uint32_t cp) const {
    auto it = table_.find(cp);
    return it == table_.end() ? nullptr : &it->second;
  }

 private:
  std::unordered_map<std::uint32_t, std::string> table_;
};

const TranslitTable& Translit() {
  static const TranslitTable table;
  return table;
}

// Decodes one UTF-8 scalar at s[i]; malformed bytes decode as U+FFFD.
std::uint32_t DecodeUtf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  int len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
  if (len == 0 || i + len > s.size()) {
    ++i;
    return 0xFFFD;
  }
  std::uint32_t cp = len == 1 ? b0 : len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += len;
  return cp;
}

std::optional<double> ParseNumber(const std::string& s) {
  const std::string t = Trim(s);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::size_t DecimalsOf(const std::string& s) {
  const auto dot = s.find('.');
  return dot == std::string::npos ? 0 : Trim(s).size() - Trim(s).find('.') - 1;
}

std::string FormatNumber(double v, std::size_t decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", static_cast<int>(decimals), v);
  return buf;
}

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> SplitTokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string StripExtension(std::string_view workbook) {
  for (std::string_view ext : {".xlsx", ".xls", ".csv"}) {
    if (workbook.size() > ext.size() && workbook.substr(workbook.size() - ext.size()) == ext)
      return std::string(workbook.substr(0, workbook.size() - ext.size()));
  }
  return std::string(workbook);
}

bool IsYear(std::string_view t) {
  if (t.size() != 4 || !std::all_of(t.begin(), t.end(), ::isdigit)) return false;
  return t.substr(0, 2) == "19" || t.substr(0, 2) == "20";
}

bool IsQuarter(std::string_view t) {
  return t.size() == 2 && (t[0] == 'q' || t[0] == 'Q') && t[1] >= '1' && t[1] <= '4';
}

// First 19xx/20xx year embedded in a string, e.g. "FY2023" or "2023-04-12".
std::optional<std::string> FindYear(std::string_view s) {
  for (std::size_t i = 0; i + 4 <= s.size(); ++i) {
    std::string_view t = s.substr(i, 4);
    const bool left_ok = i == 0 || !std::isdigit(static_cast<unsigned char>(s[i - 1]));
    const bool right_ok = i + 4 == s.size() || !std::isdigit(static_cast<unsigned char>(s[i + 4]));
    if (left_ok && right_ok && IsYear(t)) return std::string(t);
  }
  return std::nullopt;
}

// Category words that lead workbook names without naming a company.
const std::set<std::string>& NonCompanyWords() {
  static const std::set<std::string> words = {
      "indices", "index", "movies", "movie", "sentiment", "sales", "inventory", "hr",
      "projects", "stock", "financials", "business", "prices", "data", "sheet", "report",
  };
  return words;
}

}  // namespace

void ValidateConfig(const FabricationConfig& cfg) {
  Require(cfg.p_string >= 0.0 && cfg.p_string <= 1.0, ErrorCode::kInvalidArgument,
          "p_string must lie in [0, 1]");
  Require(cfg.col_overlap_lo > 0.0 && cfg.col_overlap_lo <= cfg.col_overlap_hi &&
              cfg.col_overlap_hi <= 1.0,
          ErrorCode::kInvalidArgument, "column overlap range must lie in (0, 1]");
  Require(cfg.row_overlap >= 0.0 && cfg.row_overlap <= 1.0, ErrorCode::kInvalidArgument,
          "row_overlap must lie in [0, 1]");
  Require(cfg.eps_lo >= 0.0 && cfg.eps_lo <= cfg.eps_hi && cfg.eps_hi < 1.0,
          ErrorCode::kInvalidArgument, "epsilon range must satisfy 0 <= lo <= hi < 1");
  Require(cfg.neg_ratio >= 1, ErrorCode::kInvalidArgument, "neg_ratio must be at least 1");
  Require(cfg.min_positives >= 1 && cfg.min_positives <= cfg.max_positives,
          ErrorCode::kInvalidArgument, "query positive-set bounds are inconsistent");
}

std::string SchemaNoise(std::string_view header, std::string_view table_name) {
  std::string out(table_name);
  out += '_';
  out += header;
  return out;
}

std::string Transliterate(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (static_cast<unsigned char>(text[i]) < 0x80) {
      out += text[i++];
      continue;
    }
    const std::uint32_t cp = DecodeUtf8(text, i);
    const std::string* rep = Translit().Find(cp);
    out += rep ? *rep : "?";
  }
  return out;
}

std::string_view KeyboardNeighbors(char c) {
  const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return Keyboard().Get(lower);
}

char PerturbChar(char c, std::size_t choice) {
  std::string_view n = KeyboardNeighbors(c);
  if (n.empty()) return c;
  const char pick = n[choice % n.size()];
  return std::isupper(static_cast<unsigned char>(c))
             ? static_cast<char>(std::toupper(static_cast<unsigned char>(pick)))
             : pick;
}

std::string StringNoise(std::string_view text, double p, Rng& rng, NoiseStats* stats) {
  Require(p >= 0.0 && p <= 1.0, ErrorCode::kInvalidArgument, "string noise probability outside [0, 1]");
  std::string out = Transliterate(text);
  for (char& c : out) {
    std::string_view n = KeyboardNeighbors(c);
    if (n.empty()) continue;
    if (stats) ++stats->string_chars;
    if (!rng.Bernoulli(p)) continue;
    c = PerturbChar(c, static_cast<std::size_t>(rng.Below(n.size())));
    if (stats) ++stats->string_replaced;
  }
  return out;
}

double DrawEpsilon(const FabricationConfig& cfg, Rng& rng) {
  const double magnitude = rng.Uniform(cfg.eps_lo, cfg.eps_hi);
  return rng.Bernoulli(0.5) ? -magnitude : magnitude;
}

std::vector<double> NumericNoise(const std::vector<double>& column, const FabricationConfig& cfg,
                                 Rng& rng) {
  Require(!column.empty(), ErrorCode::kInvalidArgument, "numeric noise on an empty column");
  double mean = 0.0;
  for (double v : column) {
    Require(std::isfinite(v), ErrorCode::kInvalidArgument, "numeric noise on a non-finite value");
    mean += v;
  }
  mean /= static_cast<double>(column.size());
  double var = 0.0;
  for (double v : column) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(column.size()));

  const double mu = mean * (1.0 + DrawEpsilon(cfg, rng));
  const double sigma = sd * (1.0 + DrawEpsilon(cfg, rng));
  std::vector<double> out(column.size());
  for (double& v : out) v = std::abs(rng.Normal(mu, sigma));
  return out;
}

std::size_t SharedColumnCount(std::size_t num_cols, double f, double lo, double hi) {
  const double c = static_cast<double>(num_cols);
  auto shared = static_cast<std::size_t>(std::llround(f * c));
  const auto min_ok = static_cast<std::size_t>(std::ceil(lo * c - 1e-9));
  const auto max_ok = static_cast<std::size_t>(std::floor(hi * c + 1e-9));
  if (min_ok <= max_ok) shared = std::clamp(shared, min_ok, max_ok);
  return std::clamp<std::size_t>(shared, 1, num_cols);
}

std::string WorkbookOf(std::string_view source_name) {
  const auto sep = source_name.find("::");
  return std::string(sep == std::string_view::npos ? source_name : source_name.substr(0, sep));
}

std::string TabOf(std::string_view source_name) {
  const auto sep = source_name.find("::");
  return sep == std::string_view::npos ? std::string{} : std::string(source_name.substr(sep + 2));
}

FabricatedPair FabricatePair(const CellGrid& table, const FabricationConfig& cfg, Rng& rng) {
  ValidateGrid(table);
  ValidateConfig(cfg);
  const std::size_t num_cols = table.cols();
  const std::size_t num_rows = table.rows() - 1;
  Require(num_cols >= 4 && num_rows >= 8, ErrorCode::kInvalidArgument,
          "table '" + table.source_name + "' is too small to fabricate (needs >= 4 columns and >= 8 rows)");

  FabricatedPair pair;
  const double f = rng.Uniform(cfg.col_overlap_lo, cfg.col_overlap_hi);
  const std::size_t shared_count = SharedColumnCount(num_cols, f, cfg.col_overlap_lo, cfg.col_overlap_hi);
  const std::vector<std::size_t> shared = rng.Sample(num_cols, shared_count);
  std::vector<std::size_t> rest;
  for (std::size_t j = 0; j < num_cols; ++j)
    if (!std::binary_search(shared.begin(), shared.end(), j)) rest.push_back(j);
  rng.Shuffle(rest);
  std::vector<std::size_t> src_cols = shared, tgt_cols = shared;
  for (std::size_t k = 0; k < rest.size(); ++k) (k % 2 == 0 ? src_cols : tgt_cols).push_back(rest[k]);
  std::sort(src_cols.begin(), src_cols.end());
  std::sort(tgt_cols.begin(), tgt_cols.end());

  const auto shared_row_count = static_cast<std::size_t>(std::llround(cfg.row_overlap * static_cast<double>(num_rows)));
  const std::vector<std::size_t> shared_rows = rng.Sample(num_rows, shared_row_count);
  std::vector<std::size_t> rest_rows;
  for (std::size_t r = 0; r < num_rows; ++r)
    if (!std::binary_search(shared_rows.begin(), shared_rows.end(), r)) rest_rows.push_back(r);
  rng.Shuffle(rest_rows);
  std::vector<std::size_t> src_rows = shared_rows, tgt_rows = shared_rows;
  for (std::size_t k = 0; k < rest_rows.size(); ++k) (k % 2 == 0 ? src_rows : tgt_rows).push_back(rest_rows[k]);
  std::sort(src_rows.begin(), src_rows.end());
  std::sort(tgt_rows.begin(), tgt_rows.end());

  auto slice = [&](const std::vector<std::size_t>& cols, const std::vector<std::size_t>& rows,
                   std::string suffix) {
    CellGrid g;
    g.source_name = table.source_name + suffix;
    std::vector<Cell> header;
    for (std::size_t j : cols) header.push_back(table.cells[0][j]);
    g.cells.push_back(std::move(header));
    for (std::size_t r : rows) {
      std::vector<Cell> row;
      for (std::size_t j : cols) row.push_back(table.cells[r + 1][j]);
      g.cells.push_back(std::move(row));
    }
    return g;
  };
  pair.source = slice(src_cols, src_rows, "_source");
  pair.target = slice(tgt_cols, tgt_rows, "_target");

  std::string table_name = TabOf(table.source_name);
  if (table_name.empty()) table_name = StripExtension(WorkbookOf(table.source_name));

  pair.stats.numeric_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < src_cols.size(); ++k) {
    const std::size_t j = src_cols[k];
    if (!std::binary_search(shared.begin(), shared.end(), j)) continue;
    pair.alignment.emplace_back(k, static_cast<std::size_t>(
                                       std::find(tgt_cols.begin(), tgt_cols.end(), j) - tgt_cols.begin()));
    Cell& header = pair.source.cells[0][k];
    header = SchemaNoise(header.value_or(""), table_name);

    // A column is numeric when every non-null data cell parses as a number.
    std::vector<double> values;
    std::size_t decimals = 0;
    bool numeric = true, any = false;
    for (std::size_t r = 1; r < pair.source.rows(); ++r) {
      const Cell& c = pair.source.cells[r][k];
      if (!c) continue;
      any = true;
      auto v = ParseNumber(*c);
      if (!v) {
        numeric = false;
        break;
      }
      values.push_back(*v);
      decimals = std::max(decimals, DecimalsOf(*c));
    }
    if (!any) continue;
    if (numeric) {
      const std::vector<double> noisy = NumericNoise(values, cfg, rng);
      std::size_t n = 0;
      for (std::size_t r = 1; r < pair.source.rows(); ++r) {
        Cell& c = pair.source.cells[r][k];
        if (!c) continue;
        pair.stats.numeric_min = std::min(pair.stats.numeric_min, noisy[n]);
        c = FormatNumber(noisy[n++], decimals);
      }
      pair.stats.numeric_values += noisy.size();
    } else {
      for (std::size_t r = 1; r < pair.source.rows(); ++r) {
        Cell& c = pair.source.cells[r][k];
        if (c) c = StringNoise(*c, cfg.p_string, rng, &pair.stats);
      }
    }
  }
  if (pair.stats.numeric_values == 0) pair.stats.numeric_min = 0.0;

  pair.source_columns = std::move(src_cols);
  pair.target_columns = std::move(tgt_cols);
  pair.source_rows = std::move(src_rows);
  pair.target_rows = std::move(tgt_rows);
  pair.column_overlap = static_cast<double>(shared_count) / static_cast<double>(num_cols);
  return pair;
}

AttributeMap DeriveAttributes(const CellGrid& grid) {
  AttributeMap attrs;
  const std::string workbook = StripExtension(WorkbookOf(grid.source_name));
  const std::string tab = TabOf(grid.source_name);
  const std::vector<std::string> wb_tokens = SplitTokens(workbook);
  const std::vector<std::string> tab_tokens = SplitTokens(tab);

  if (wb_tokens.size() >= 2 && !NonCompanyWords().count(wb_tokens[0]) &&
      std::all_of(wb_tokens[0].begin(), wb_tokens[0].end(), ::isalpha)) {
    attrs["company"] = wb_tokens[0];
  }
  for (const auto* tokens : {&wb_tokens, &tab_tokens}) {
    for (const std::string& t : *tokens) {
      if (IsYear(t) && !attrs.count("fiscal_year")) attrs["fiscal_year"] = t;
      if (IsQuarter(t) && !attrs.count("quarter")) attrs["quarter"] = Lower(t);
    }
  }
  const bool tab_is_period =
      tab_tokens.empty() || std::all_of(tab_tokens.begin(), tab_tokens.end(), [](const std::string& t) {
        return IsYear(t) || IsQuarter(t);
      });
  if (!tab_is_period) attrs["sub_category"] = Lower(Trim(tab));

  // Period attributes missing from the name come from the first data value of
  // a date-like or quarter column.
  if (grid.rows() >= 2) {
    for (std::size_t j = 0; j < grid.cols(); ++j) {
      const Cell& h = grid.cells[0][j];
      if (!h) continue;
      const std::string header = Lower(*h);
      const Cell* first = nullptr;
      for (std::size_t r = 1; r < grid.rows() && first == nullptr; ++r)
        if (grid.cells[r][j]) first = &grid.cells[r][j];
      if (first == nullptr) continue;
      const bool date_like = header.find("year") != std::string::npos ||
                             header.find("date") != std::string::npos ||
                             header.find("period") != std::string::npos;
      if (date_like && !attrs.count("fiscal_year")) {
        if (auto y = FindYear(**first)) attrs["fiscal_year"] = *y;
      }
      if (header.find("quarter") != std::string::npos && !attrs.count("quarter")) {
        const std::string v = Lower(Trim(**first));
        if (IsQuarter(v)) attrs["quarter"] = v;
      }
    }
  }
  return attrs;
}

std::string QueryTemplate::Render() const {
  std::string out = "retrieve all sheets for";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i > 0) out += " and";
    std::string attr = terms[i].first, value = terms[i].second;
    std::replace(attr.begin(), attr.end(), '_', ' ');
    std::replace(value.begin(), value.end(), '_', ' ');
    out += " " + attr + " " + value;
  }
  return out;
}

bool QueryTemplate::Matches(const AttributeMap& attrs) const {
  for (const auto& [attr, value] : terms) {
    auto it = attrs.find(attr);
    if (it == attrs.end() || it->second != value) return false;
  }
  return !terms.empty();
}

FabricatedCorpus BuildCorpus(const std::vector<CellGrid>& templates, const FabricationConfig& cfg) {
  ValidateConfig(cfg);
  std::set<std::string> workbooks;
  for (const CellGrid& t : templates) workbooks.insert(WorkbookOf(t.source_name));
  Require(workbooks.size() >= 2, ErrorCode::kInvalidArgument,
          "corpus needs templates from at least two distinct workbooks");

  FabricatedCorpus corpus;
  const std::size_t n = templates.size();
  corpus.fabricated.resize(n);
  auto fabricate_one = [&](std::size_t i) {
    Rng rng(DeriveSeed(cfg.seed, i));
    corpus.fabricated[i] = FabricatePair(ApplyPlaceholders(templates[i], cfg.placeholders), cfg, rng);
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fabricate_one(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += threads) fabricate_one(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Catalog: template i yields sheets 2i (source) and 2i+1 (target).
  std::vector<std::string> sheet_workbook;
  std::vector<AttributeMap> sheet_attrs;
  for (std::size_t i = 0; i < n; ++i) {
    const FabricatedPair& p = corpus.fabricated[i];
    const AttributeMap attrs = DeriveAttributes(templates[i]);
    for (const CellGrid* g : {&p.source, &p.target}) {
      const auto id = static_cast<SheetId>(sheet_workbook.size());
      corpus.catalog.Insert(ExtractRecord(*g, id));
      sheet_workbook.push_back(WorkbookOf(templates[i].source_name));
      sheet_attrs.push_back(attrs);
    }
  }
  const std::size_t num_sheets = sheet_workbook.size();

  // Pairwise supervision: every positive followed by its negatives.
  Rng neg_rng(DeriveSeed(cfg.seed, kNegativeStream));
  std::set<std::pair<SheetId, SheetId>> used;
  for (std::size_t i = 0; i < n; ++i) used.emplace(2 * i, 2 * i + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = static_cast<SheetId>(2 * i), tgt = static_cast<SheetId>(2 * i + 1);
    corpus.pairs.push_back({src, tgt, 1});
    std::vector<SheetId> partners;
    for (SheetId s = 0; s < num_sheets; ++s)
      if (sheet_workbook[s] != sheet_workbook[src]) partners.push_back(s);
    Require(partners.size() >= static_cast<std::size_t>(cfg.neg_ratio), ErrorCode::kInvalidArgument,
            "not enough sheets from other workbooks to sample negatives");
    int made = 0;
    std::size_t attempts = 0;
    while (made < cfg.neg_ratio) {
      Require(++attempts < 100000, ErrorCode::kInternal, "negative sampling did not converge");
      const SheetId anchor = (made % 2 == 0) ? src : tgt;
      const SheetId other = partners[neg_rng.Below(partners.size())];
      const auto key = std::minmax(anchor, other);
      if (!used.emplace(key.first, key.second).second) continue;
      corpus.pairs.push_back({anchor, other, 0});
      ++made;
    }
  }

  // Listwise supervision from attribute groups.
  std::set<std::string> attr_names;
  std::map<std::string, std::set<std::string>> values;
  for (const AttributeMap& a : sheet_attrs)
    for (const auto& [k, v] : a) values[k].insert(v);
  std::vector<QueryTemplate> candidates;
  for (const auto& [attr, vals] : values)
    for (const std::string& v : vals) candidates.push_back({{{attr, v}}});
  const std::vector<std::pair<std::string, std::string>> combos = {
      {"company", "fiscal_year"}, {"company", "sub_category"}, {"fiscal_year", "quarter"},
      {"fiscal_year", "sub_category"}, {"company", "quarter"}};
  for (const auto& [a1, a2] : combos) {
    std::set<std::pair<std::string, std::string>> seen;
    for (const AttributeMap& a : sheet_attrs) {
      if (!a.count(a1) || !a.count(a2)) continue;
      if (seen.emplace(a.at(a1), a.at(a2)).second)
        candidates.push_back({{{a1, a.at(a1)}, {a2, a.at(a2)}}});
    }
  }

  struct Eligible {
    QueryTemplate tmpl;
    std::vector<SheetId> positives;
  };
  std::vector<Eligible> eligible;
  for (const QueryTemplate& q : candidates) {
    std::vector<SheetId> pos;
    for (SheetId s = 0; s < num_sheets; ++s)
      if (q.Matches(sheet_attrs[s])) pos.push_back(s);
    if (pos.empty() || pos.size() == num_sheets) {
      corpus.warnings.push_back("skipping query '" + q.Render() + "': matches " +
                                (pos.empty() ? "no" : "every") + " sheet");
      ++corpus.stats.skipped_queries;
      continue;
    }
    if (pos.size() < cfg.min_positives || pos.size() > cfg.max_positives ||
        pos.size() > num_sheets - pos.size()) {
      continue;
    }
    eligible.push_back({q, std::move(pos)});
  }
  Rng query_rng(DeriveSeed(cfg.seed, kQueryStream));
  const std::size_t take = std::min(cfg.num_queries, eligible.size());
  if (take < cfg.num_queries) {
    corpus.warnings.push_back("only " + std::to_string(eligible.size()) +
                              " query templates are eligible; wanted " + std::to_string(cfg.num_queries));
  }
  std::vector<std::size_t> order(eligible.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  query_rng.Shuffle(order);
  order.resize(take);
  for (std::size_t k : order) {
    const Eligible& e = eligible[k];
    QueryInstance qi;
    qi.query = e.tmpl.Render();
    qi.positives = e.positives;
    std::vector<SheetId> rest;
    for (SheetId s = 0; s < num_sheets; ++s)
      if (!std::binary_search(e.positives.begin(), e.positives.end(), s)) rest.push_back(s);
    for (std::size_t idx : query_rng.Sample(rest.size(), e.positives.size()))
      qi.negatives.push_back(rest[idx]);
    corpus.queries.push_back(std::move(qi));
  }

  FabricationStats& st = corpus.stats;
  st.templates = n;
  st.sheets = num_sheets;
  for (const PairExample& p : corpus.pairs) (p.label == 1 ? st.positives : st.negatives)++;
  st.queries = corpus.queries.size();
  double pos_total = 0.0;
  for (const QueryInstance& q : corpus.queries) pos_total += static_cast<double>(q.positives.size());
  st.mean_positives = st.queries ? pos_total / static_cast<double>(st.queries) : 0.0;
  st.min_overlap = 1.0;
  st.numeric_min = std::numeric_limits<double>::infinity();
  double overlap_total = 0.0;
  for (const FabricatedPair& p : corpus.fabricated) {
    st.min_overlap = std::min(st.min_overlap, p.column_overlap);
    st.max_overlap = std::max(st.max_overlap, p.column_overlap);
    overlap_total += p.column_overlap;
    st.string_chars += p.stats.string_chars;
    st.string_replaced += p.stats.string_replaced;
    st.numeric_values += p.stats.numeric_values;
    if (p.stats.numeric_values) st.numeric_min = std::min(st.numeric_min, p.stats.numeric_min);
  }
  st.mean_overlap = n ? overlap_total / static_cast<double>(n) : 0.0;
  st.string_rate = st.string_chars ? static_cast<double>(st.string_replaced) / static_cast<double>(st.string_chars) : 0.0;
  if (st.numeric_values == 0) st.numeric_min = 0.0;
  return corpus;
}

CorpusSplits MakeSplits(std::size_t num_pairs, std::size_t num_queries, Rng& rng) {
  Require(num_pairs >= 2 && num_queries >= 2, ErrorCode::kInvalidArgument,
          "splits need at least two pairs and two queries");
  auto split = [&](std::size_t n, double eval_fraction, std::vector<std::size_t>& train,
                   std::vector<std::size_t>& eval) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.Shuffle(idx);
    auto n_eval = static_cast<std::size_t>(std::llround(eval_fraction * static_cast<double>(n)));
    n_eval = std::clamp<std::size_t>(n_eval, 1, n - 1);
    eval.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_eval));
    train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_eval), idx.end());
    std::sort(eval.begin(), eval.end());
    std::sort(train.begin(), train.end());
  };
  CorpusSplits s;
  split(num_pairs, 0.1, s.pair_train, s.pair_eval);
  split(num_queries, 0.2, s.query_train, s.query_eval);
  return s;
}

std::string StatsJson(const FabricationStats& st) {
  nlohmann::ordered_json j;
  j["templates"] = st.templates;
  j["sheets"] = st.sheets;
  j["positive_pairs"] = st.positives;
  j["negative_pairs"] = st.negatives;
  j["pairs"] = st.positives + st.negatives;
  j["queries"] = st.queries;
  j["skipped_query_templates"] = st.skipped_queries;
  j["mean_positives_per_query"] = st.mean_positives;
  j["column_overlap"] = {{"min", st.min_overlap}, {"max", st.max_overlap}, {"mean", st.mean_overlap}};
  j["string_noise"] = {{"eligible_chars", st.string_chars},
                       {"replaced_chars", st.string_replaced},
                       {"rate", st.string_rate}};
  j["numeric_noise"] = {{"values", st.numeric_values}, {"min", st.numeric_min}};
  return j.dump(2) + "\n";
}

void StoreCorpus(const FabricatedCorpus& corpus, const CorpusSplits& splits,
                 const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  Require(!ec, ErrorCode::kIo, "cannot create " + dir.string());
  CorpusPaths paths{dir};
  StoreCatalog(corpus.catalog, paths.sheets());
  StorePairs(corpus.pairs, paths.pairs());
  StoreQueries(corpus.queries, paths.queries());
  StoreSplits(splits, paths.splits());
  WriteFileBytes(dir / "stats.json", StatsJson(corpus.stats));
}

std::vector<CellGrid> LoadTemplates(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  Require(fs::is_directory(dir), ErrorCode::kIo, "template directory " + dir.string() + " not found");
  std::vector<CellGrid> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      out.push_back(ReadCsv(entry.path()));
    } else if (entry.is_directory()) {
      for (const auto& tab : fs::directory_iterator(entry.path())) {
        if (!tab.is_regular_file() || tab.path().extension() != ".csv") continue;
        CellGrid g = ReadCsv(tab.path());
        g.source_name = entry.path().filename().string() + "::" + tab.path().stem().string();
        out.push_back(std::move(g));
      }
    }
  }
  Require(!out.empty(), ErrorCode::kIo, "no CSV templates in " + dir.string());
  std::sort(out.begin(), out.end(),
            [](const CellGrid& a, const CellGrid& b) { return a.source_name < b.source_name; });
  return out;
}

void StoreTemplates(const std::vector<CellGrid>& templates, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  for (const CellGrid& g : templates) {
    const std::string wb = WorkbookOf(g.source_name);
    const std::string tab = TabOf(g.source_name);
    std::error_code ec;
    if (tab.empty()) {
      fs::create_directories(dir, ec);
      WriteCsv(g, dir / (wb + ".csv"));
    } else {
      fs::create_directories(dir / wb, ec);
      Require(!ec, ErrorCode::kIo, "cannot create " + (dir / wb).string());
      WriteCsv(g, dir / wb / (tab + ".csv"));
    }
  }
}

}  // namespace sheettoken
