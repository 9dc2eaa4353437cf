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
#include "sheettoken/extract.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <set>
#include <unordered_map>

#include "sheettoken/error.hpp"

namespace sheettoken {

namespace {

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool IsNullish(const Cell& c) { return !c.has_value() || Trim(*c).empty(); }

// Prefix for a typed high-cardinality column, or nullopt.
std::optional<std::string> ColumnKind(const CellGrid& grid, std::size_t col,
                                      const PlaceholderPolicy& policy) {
  const Cell& header = grid.cells[0][col];
  if (!header) return std::nullopt;
  const std::string h = Lower(*header);
  for (const auto& [keyword, prefix] : policy.prefixes) {
    if (h.find(Lower(keyword)) != std::string::npos) return prefix;
  }
  return std::nullopt;
}

}  // namespace

std::string Trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

void ValidateGrid(const CellGrid& grid) {
  Require(grid.rows() >= 1, ErrorCode::kInvalidArgument,
          "grid '" + grid.source_name + "' has no rows");
  const std::size_t c = grid.cols();
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    Require(grid.cells[r].size() == c, ErrorCode::kInvalidArgument,
            "grid '" + grid.source_name + "' is not rectangular at row " + std::to_string(r));
  }
}

SheetRecord ExtractRecord(const CellGrid& grid, SheetId sheet_id) {
  ValidateGrid(grid);
  Require(grid.cols() > 0, ErrorCode::kInvalidArgument,
          "grid '" + grid.source_name + "' has zero columns");
  SheetRecord rec;
  rec.sheet_id = sheet_id;
  rec.source_name = Trim(grid.source_name);
  rec.num_rows = static_cast<std::uint32_t>(grid.rows() - 1);
  rec.num_cols = static_cast<std::uint32_t>(grid.cols());
  for (std::size_t j = 0; j < grid.cols(); ++j) {
    ColumnMeta meta;
    const Cell& h = grid.cells[0][j];
    meta.header = IsNullish(h) ? "col_" + std::to_string(j + 1) : Trim(*h);
    for (std::size_t r = 1; r < grid.rows(); ++r) {
      const Cell& c = grid.cells[r][j];
      if (IsNullish(c)) continue;
      meta.example = Utf8Prefix(Trim(*c), kMaxExampleChars);
      break;
    }
    rec.columns.push_back(std::move(meta));
  }
  return rec;
}

std::string PlaceholderName(std::string_view prefix, std::size_t index) {
  char digits[32];
  std::snprintf(digits, sizeof(digits), "%04zu", index);
  return std::string(prefix) + "_" + digits;
}

CellGrid ApplyPlaceholders(const CellGrid& grid, const PlaceholderPolicy& policy) {
  ValidateGrid(grid);
  Require(policy.length_cap > 0, ErrorCode::kInvalidArgument, "placeholder length_cap must be positive");
  Require(policy.cardinality_ratio > 0.0 && policy.cardinality_ratio <= 1.0,
          ErrorCode::kInvalidArgument, "cardinality_ratio must lie in (0, 1]");
  CellGrid out = grid;

  // Typed high-cardinality columns: every distinct value gets a placeholder.
  for (std::size_t j = 0; j < grid.cols(); ++j) {
    auto prefix = ColumnKind(grid, j, policy);
    if (!prefix) continue;
    std::size_t filled = 0;
    std::set<std::string> distinct;
    for (std::size_t r = 1; r < grid.rows(); ++r) {
      if (!grid.cells[r][j]) continue;
      ++filled;
      distinct.insert(*grid.cells[r][j]);
    }
    if (filled < policy.min_rows) continue;
    const double ratio = static_cast<double>(distinct.size()) / static_cast<double>(filled);
    if (ratio <= policy.cardinality_ratio) continue;
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t r = 1; r < grid.rows(); ++r) {
      Cell& c = out.cells[r][j];
      if (!c) continue;
      auto [it, fresh] = index.emplace(*c, index.size() + 1);
      c = PlaceholderName(*prefix, it->second);
    }
  }

  // Long free text anywhere below the header.
  std::unordered_map<std::string, std::size_t> notes;
  for (std::size_t r = 1; r < out.rows(); ++r) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      Cell& c = out.cells[r][j];
      if (!c || Utf8Length(*c) <= policy.length_cap) continue;
      auto [it, fresh] = notes.emplace(*c, notes.size() + 1);
      c = PlaceholderName(policy.long_text_prefix, it->second);
    }
  }
  return out;
}

CellGrid ParseCsv(std::string_view text, std::string source_name) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  CellGrid grid;
  grid.source_name = std::move(source_name);
  std::vector<Cell> row;
  std::string field;
  bool quoted = false;
  bool in_quotes = false;
  bool row_has_content = false;

  auto end_field = [&] {
    if (field.empty()) {
      row.emplace_back(std::nullopt);
    } else {
      row.emplace_back(field);
    }
    field.clear();
    quoted = false;
  };
  auto end_row = [&] {
    end_field();
    grid.cells.push_back(std::move(row));
    row.clear();
    row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        Require(field.empty() && !quoted, ErrorCode::kParse,
                "csv '" + grid.source_name + "': stray quote in row " +
                    std::to_string(grid.cells.size() + 1));
        in_quotes = true;
        quoted = true;
        row_has_content = true;
        break;
      case ',':
        end_field();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !row.empty() || !field.empty()) end_row();
        break;
      default:
        field += c;
        row_has_content = true;
    }
  }
  Require(!in_quotes, ErrorCode::kParse, "csv '" + grid.source_name + "': unterminated quote");
  if (row_has_content || !row.empty() || !field.empty()) end_row();
  Require(!grid.cells.empty(), ErrorCode::kParse, "csv '" + grid.source_name + "' is empty");

  std::size_t width = 0;
  for (const auto& r : grid.cells) width = std::max(width, r.size());
  for (auto& r : grid.cells) r.resize(width);
  return grid;
}

CellGrid ReadCsv(const std::filesystem::path& path, std::optional<std::string> tab) {
  std::string name = path.stem().string();
  if (tab) name += "::" + *tab;
  return ParseCsv(ReadFileBytes(path), std::move(name));
}

std::string FormatCsv(const CellGrid& grid) {
  std::string out;
  for (const auto& row : grid.cells) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) out += ',';
      if (!row[j]) continue;
      const std::string& v = *row[j];
      const bool needs_quotes = v.find_first_of(",\"\r\n") != std::string::npos;
      if (!needs_quotes) {
        out += v;
        continue;
      }
      out += '"';
      for (char c : v) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
    }
    out += '\n';
  }
  return out;
}

void WriteCsv(const CellGrid& grid, const std::filesystem::path& path) {
  WriteFileBytes(path, FormatCsv(grid));
}

}  // namespace sheettoken
