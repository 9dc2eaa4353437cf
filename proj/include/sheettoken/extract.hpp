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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sheettoken/corpus.hpp"

namespace sheettoken {

using Cell = std::optional<std::string>;

// Raw worksheet: row 0 holds the headers, absent cells are std::nullopt.
struct CellGrid {
  std::string source_name;
  std::vector<std::vector<Cell>> cells;

  std::size_t rows() const { return cells.size(); }
  std::size_t cols() const { return cells.empty() ? 0 : cells.front().size(); }
  friend bool operator==(const CellGrid&, const CellGrid&) = default;
};

// Throws unless the grid is rectangular with at least one row.
void ValidateGrid(const CellGrid& grid);

struct PlaceholderPolicy {
  std::size_t length_cap = 120;
  double cardinality_ratio = 0.8;
  // Columns with fewer non-null data cells never trigger the ratio rule.
  std::size_t min_rows = 20;
  // Header keyword (matched case-insensitively as a substring) -> prefix.
  // Only columns whose header matches a keyword are candidates for the
  // cardinality rule; the first matching keyword wins.
  std::vector<std::pair<std::string, std::string>> prefixes = {
      {"movie", "Movie"},   {"title", "Movie"}, {"actor", "Actor"}, {"director", "Director"},
      {"post", "Post"},     {"author", "Author"}, {"user", "User"},   {"review", "Note"},
  };
  std::string long_text_prefix = "Note";
};

SheetRecord ExtractRecord(const CellGrid& grid, SheetId sheet_id);

CellGrid ApplyPlaceholders(const CellGrid& grid, const PlaceholderPolicy& policy = {});

// "<prefix>_NNNN" with at least four digits.
std::string PlaceholderName(std::string_view prefix, std::size_t index);

// Strips leading and trailing ASCII whitespace.
std::string Trim(std::string_view s);

// RFC-4180 style CSV. Empty fields become null cells; short rows are padded
// with nulls. `source_name` is stored as given.
CellGrid ParseCsv(std::string_view text, std::string source_name);
// Source name is the file stem, plus "::<tab>" when a tab is given.
CellGrid ReadCsv(const std::filesystem::path& path, std::optional<std::string> tab = std::nullopt);
std::string FormatCsv(const CellGrid& grid);
void WriteCsv(const CellGrid& grid, const std::filesystem::path& path);

}  // namespace sheettoken
