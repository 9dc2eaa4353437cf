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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sheettoken {

using SheetId = std::uint32_t;

inline constexpr std::size_t kMaxExampleChars = 60;

struct ColumnMeta {
  std::string header;
  std::string example;
  friend bool operator==(const ColumnMeta&, const ColumnMeta&) = default;
};

// Schema-aware metadata of one worksheet.
struct SheetRecord {
  SheetId sheet_id = 0;
  std::string source_name;  // workbook filename + "::" + tab
  std::uint32_t num_rows = 0;
  std::uint32_t num_cols = 0;
  std::vector<ColumnMeta> columns;
  friend bool operator==(const SheetRecord&, const SheetRecord&) = default;
};

// Throws Error(kSchema) naming the sheet when a record invariant is broken.
void ValidateRecord(const SheetRecord& record);

class SheetCatalog {
 public:
  SheetCatalog() = default;

  // Throws on duplicate ids or invalid records.
  void Insert(SheetRecord record);
  const SheetRecord& at(SheetId id) const;
  bool contains(SheetId id) const { return records_.count(id) != 0; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  // Ordered by ascending sheet_id.
  const std::map<SheetId, SheetRecord>& records() const { return records_; }
  std::vector<SheetId> ids() const;

  friend bool operator==(const SheetCatalog&, const SheetCatalog&) = default;

 private:
  std::map<SheetId, SheetRecord> records_;
};

struct PairExample {
  SheetId id1 = 0;
  SheetId id2 = 0;
  int label = 0;
  friend bool operator==(const PairExample&, const PairExample&) = default;
};

struct QueryInstance {
  std::string query;
  std::vector<SheetId> positives;
  std::vector<SheetId> negatives;
  friend bool operator==(const QueryInstance&, const QueryInstance&) = default;
};

// Sheet Tokens keyed by sheet id, each of length `dim` and unit L2 norm.
struct TokenCache {
  std::uint32_t dim = 0;
  std::map<SheetId, std::vector<float>> entries;
  friend bool operator==(const TokenCache&, const TokenCache&) = default;
};

// Id lists of the pair-level and query-level splits, as indices into the
// loaded train.json / query.json arrays.
struct CorpusSplits {
  std::vector<std::size_t> pair_train;
  std::vector<std::size_t> pair_eval;
  std::vector<std::size_t> query_train;
  std::vector<std::size_t> query_eval;
  friend bool operator==(const CorpusSplits&, const CorpusSplits&) = default;
};

// Length in Unicode scalar values of a UTF-8 string.
std::size_t Utf8Length(std::string_view s);
// Longest prefix holding at most `n` scalar values.
std::string Utf8Prefix(std::string_view s, std::size_t n);

SheetCatalog ParseCatalog(std::string_view json_text);
std::string SerializeCatalog(const SheetCatalog& catalog);
SheetCatalog LoadCatalog(const std::filesystem::path& path);
void StoreCatalog(const SheetCatalog& catalog, const std::filesystem::path& path);

std::vector<PairExample> ParsePairs(std::string_view json_text,
                                    const SheetCatalog* catalog = nullptr);
std::string SerializePairs(const std::vector<PairExample>& pairs);
std::vector<PairExample> LoadPairs(const std::filesystem::path& path,
                                   const SheetCatalog* catalog = nullptr);
void StorePairs(const std::vector<PairExample>& pairs, const std::filesystem::path& path);

void ValidateQuery(const QueryInstance& q, const SheetCatalog* catalog, std::size_t index);
std::vector<QueryInstance> ParseQueries(std::string_view json_text,
                                        const SheetCatalog* catalog = nullptr);
std::string SerializeQueries(const std::vector<QueryInstance>& queries);
std::vector<QueryInstance> LoadQueries(const std::filesystem::path& path,
                                       const SheetCatalog* catalog = nullptr);
void StoreQueries(const std::vector<QueryInstance>& queries, const std::filesystem::path& path);

CorpusSplits LoadSplits(const std::filesystem::path& path);
void StoreSplits(const CorpusSplits& splits, const std::filesystem::path& path);

// Binary layout: "STKN" | version u32 | dim u32 | count u32 |
// count x (sheet_id u32, dim x f32), all little-endian.
inline constexpr std::uint32_t kTokenCacheVersion = 1;
void ValidateTokenCache(const TokenCache& cache);
std::string EncodeTokenCache(const TokenCache& cache);
TokenCache DecodeTokenCache(std::string_view bytes);
void WriteTokenCache(const TokenCache& cache, const std::filesystem::path& path);
TokenCache ReadTokenCache(const std::filesystem::path& path);

// File helpers shared by the binary formats.
std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes);

// Conventional file names inside a corpus directory.
struct CorpusPaths {
  std::filesystem::path dir;
  std::filesystem::path sheets() const { return dir / "sheets.json"; }
  std::filesystem::path pairs() const { return dir / "train.json"; }
  std::filesystem::path queries() const { return dir / "query.json"; }
  std::filesystem::path splits() const { return dir / "splits.json"; }
};

}  // namespace sheettoken
