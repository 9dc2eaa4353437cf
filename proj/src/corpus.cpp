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
#include "sheettoken/corpus.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "json.hpp"
#include "sheettoken/error.hpp"

namespace sheettoken {

namespace {

using detail::GetU32;
using detail::PutU32;

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

constexpr char kTokenMagic[4] = {'S', 'T', 'K', 'N'};

Json ParseJson(std::string_view text, const char* what,
               Json::parser_callback_t callback = nullptr) {
  try {
    return Json::parse(text.begin(), text.end(), callback);
  } catch (const Json::exception& e) {
    Fail(ErrorCode::kParse, std::string(what) + ": malformed JSON: " + e.what());
  }
}

template <typename T>
T Field(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  Require(it != obj.end(), ErrorCode::kSchema, where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    Fail(ErrorCode::kSchema, where + ": field '" + key + "' has the wrong type");
  }
}

SheetId ParseId(const Json& v, const std::string& where) {
  Require(v.is_number_integer(), ErrorCode::kSchema, where + ": sheet id must be an integer");
  const auto x = v.get<std::int64_t>();
  Require(x >= 0 && x <= static_cast<std::int64_t>(UINT32_MAX), ErrorCode::kSchema,
          where + ": sheet id out of range");
  return static_cast<SheetId>(x);
}

std::vector<SheetId> ParseIdList(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  Require(it != obj.end() && it->is_array(), ErrorCode::kSchema,
          where + ": field '" + key + "' must be an array");
  std::vector<SheetId> ids;
  for (const Json& v : *it) ids.push_back(ParseId(v, where));
  return ids;
}

}  // namespace

std::size_t Utf8Length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

std::string Utf8Prefix(std::string_view s, std::size_t n) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
      if (seen == n) return std::string(s.substr(0, i));
      ++seen;
    }
  }
  return std::string(s);
}

void ValidateRecord(const SheetRecord& r) {
  const std::string where = "sheet " + std::to_string(r.sheet_id);
  Require(r.num_cols > 0, ErrorCode::kSchema, where + ": num_cols must be positive");
  Require(r.columns.size() == r.num_cols, ErrorCode::kSchema,
          where + ": column count does not match num_cols");
  for (const ColumnMeta& c : r.columns) {
    Require(Utf8Length(c.example) <= kMaxExampleChars, ErrorCode::kSchema,
            where + ": example value longer than 60 characters");
  }
}

void SheetCatalog::Insert(SheetRecord record) {
  ValidateRecord(record);
  const SheetId id = record.sheet_id;
  Require(records_.emplace(id, std::move(record)).second, ErrorCode::kSchema,
          "duplicate sheet_id " + std::to_string(id));
}

const SheetRecord& SheetCatalog::at(SheetId id) const {
  auto it = records_.find(id);
  Require(it != records_.end(), ErrorCode::kSchema, "unknown sheet_id " + std::to_string(id));
  return it->second;
}

std::vector<SheetId> SheetCatalog::ids() const {
  std::vector<SheetId> out;
  out.reserve(records_.size());
  for (const auto& [id, r] : records_) out.push_back(id);
  return out;
}

SheetCatalog ParseCatalog(std::string_view text) {
  // The JSON library keeps the last of duplicate object keys, so duplicates
  // are caught while parsing.
  std::set<std::string> keys;
  std::string duplicate;
  Json doc = ParseJson(text, "sheets.json",
                       [&](int depth, Json::parse_event_t event, Json& parsed) {
                         if (depth == 1 && event == Json::parse_event_t::key) {
                           auto key = parsed.get<std::string>();
                           if (!keys.insert(key).second && duplicate.empty()) duplicate = key;
                         }
                         return true;
                       });
  Require(duplicate.empty(), ErrorCode::kSchema, "duplicate sheet_id " + duplicate);
  Require(doc.is_object(), ErrorCode::kSchema, "sheets.json must be a JSON object");
  Require(!doc.empty(), ErrorCode::kSchema, "empty catalog");

  SheetCatalog catalog;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string& key = it.key();
    std::uint64_t id = 0;
    auto [end, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
    Require(ec == std::errc() && end == key.data() + key.size() && !key.empty() && id <= UINT32_MAX,
            ErrorCode::kSchema, "sheet key '" + key + "' is not a decimal sheet_id");
    const std::string where = "sheet " + key;
    const Json& obj = it.value();
    Require(obj.is_object(), ErrorCode::kSchema, where + ": record must be an object");

    SheetRecord r;
    r.sheet_id = static_cast<SheetId>(id);
    r.source_name = Field<std::string>(obj, "filename", where);
    const auto rows = Field<std::int64_t>(obj, "num_rows", where);
    const auto cols = Field<std::int64_t>(obj, "num_cols", where);
    Require(rows >= 0 && rows <= UINT32_MAX && cols > 0 && cols <= UINT32_MAX, ErrorCode::kSchema,
            where + ": shape out of range");
    r.num_rows = static_cast<std::uint32_t>(rows);
    r.num_cols = static_cast<std::uint32_t>(cols);
    auto columns = obj.find("columns");
    Require(columns != obj.end() && columns->is_array(), ErrorCode::kSchema,
            where + ": field 'columns' must be an array");
    for (const Json& c : *columns) {
      Require(c.is_object(), ErrorCode::kSchema, where + ": column entry must be an object");
      r.columns.push_back(
          {Field<std::string>(c, "header", where), Field<std::string>(c, "example", where)});
    }
    catalog.Insert(std::move(r));
  }
  return catalog;
}

std::string SerializeCatalog(const SheetCatalog& catalog) {
  OrderedJson doc = OrderedJson::object();
  for (const auto& [id, r] : catalog.records()) {
    OrderedJson cols = OrderedJson::array();
    for (const ColumnMeta& c : r.columns) {
      OrderedJson col;
      col["header"] = c.header;
      col["example"] = c.example;
      cols.push_back(std::move(col));
    }
    OrderedJson rec;
    rec["filename"] = r.source_name;
    rec["num_rows"] = r.num_rows;
    rec["num_cols"] = r.num_cols;
    rec["columns"] = std::move(cols);
    doc[std::to_string(id)] = std::move(rec);
  }
  return doc.dump(1, '\t') + "\n";
}

SheetCatalog LoadCatalog(const std::filesystem::path& path) {
  return ParseCatalog(ReadFileBytes(path));
}

void StoreCatalog(const SheetCatalog& catalog, const std::filesystem::path& path) {
  WriteFileBytes(path, SerializeCatalog(catalog));
}

std::vector<PairExample> ParsePairs(std::string_view text, const SheetCatalog* catalog) {
  Json doc = ParseJson(text, "train.json");
  Require(doc.is_array(), ErrorCode::kSchema, "train.json must be a JSON array");
  std::vector<PairExample> pairs;
  pairs.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "train.json entry " + std::to_string(i);
    const Json& t = doc[i];
    Require(t.is_array() && t.size() == 3, ErrorCode::kSchema,
            where + ": expected [sheet_id_1, sheet_id_2, label]");
    PairExample p{ParseId(t[0], where), ParseId(t[1], where), 0};
    Require(t[2].is_number_integer(), ErrorCode::kSchema, where + ": label must be an integer");
    const auto label = t[2].get<std::int64_t>();
    Require(label == 0 || label == 1, ErrorCode::kSchema, where + ": label outside {0,1}");
    p.label = static_cast<int>(label);
    Require(p.id1 != p.id2, ErrorCode::kSchema, where + ": pair joins a sheet with itself");
    if (catalog != nullptr) {
      Require(catalog->contains(p.id1) && catalog->contains(p.id2), ErrorCode::kSchema,
              where + ": unresolvable sheet_id");
    }
    pairs.push_back(p);
  }
  return pairs;
}

std::string SerializePairs(const std::vector<PairExample>& pairs) {
  Json doc = Json::array();
  for (const PairExample& p : pairs) doc.push_back({p.id1, p.id2, p.label});
  return doc.dump() + "\n";
}

std::vector<PairExample> LoadPairs(const std::filesystem::path& path,
                                   const SheetCatalog* catalog) {
  return ParsePairs(ReadFileBytes(path), catalog);
}

void StorePairs(const std::vector<PairExample>& pairs, const std::filesystem::path& path) {
  WriteFileBytes(path, SerializePairs(pairs));
}

void ValidateQuery(const QueryInstance& q, const SheetCatalog* catalog, std::size_t index) {
  const std::string where = "query " + std::to_string(index);
  Require(!q.positives.empty(), ErrorCode::kSchema, where + ": empty positive set");
  Require(!q.negatives.empty(), ErrorCode::kSchema, where + ": empty negative set");
  std::set<SheetId> pos(q.positives.begin(), q.positives.end());
  Require(pos.size() == q.positives.size(), ErrorCode::kSchema, where + ": repeated positive id");
  std::set<SheetId> neg(q.negatives.begin(), q.negatives.end());
  Require(neg.size() == q.negatives.size(), ErrorCode::kSchema, where + ": repeated negative id");
  for (SheetId id : q.negatives) {
    Require(pos.count(id) == 0, ErrorCode::kSchema,
            where + ": sheet_id " + std::to_string(id) + " is both positive and negative");
  }
  if (catalog != nullptr) {
    for (SheetId id : pos)
      Require(catalog->contains(id), ErrorCode::kSchema,
              where + ": unresolvable sheet_id " + std::to_string(id));
    for (SheetId id : neg)
      Require(catalog->contains(id), ErrorCode::kSchema,
              where + ": unresolvable sheet_id " + std::to_string(id));
  }
}

std::vector<QueryInstance> ParseQueries(std::string_view text, const SheetCatalog* catalog) {
  Json doc = ParseJson(text, "query.json");
  Require(doc.is_array(), ErrorCode::kSchema, "query.json must be a JSON array");
  std::vector<QueryInstance> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "query " + std::to_string(i);
    const Json& obj = doc[i];
    Require(obj.is_object(), ErrorCode::kSchema, where + ": must be an object");
    QueryInstance q;
    q.query = Field<std::string>(obj, "query", where);
    q.positives = ParseIdList(obj, "positives", where);
    q.negatives = ParseIdList(obj, "negatives", where);
    ValidateQuery(q, catalog, i);
    out.push_back(std::move(q));
  }
  return out;
}

std::string SerializeQueries(const std::vector<QueryInstance>& queries) {
  OrderedJson doc = OrderedJson::array();
  for (const QueryInstance& q : queries) {
    OrderedJson obj;
    obj["query"] = q.query;
    obj["positives"] = q.positives;
    obj["negatives"] = q.negatives;
    doc.push_back(std::move(obj));
  }
  return doc.dump(1, '\t') + "\n";
}

std::vector<QueryInstance> LoadQueries(const std::filesystem::path& path,
                                       const SheetCatalog* catalog) {
  return ParseQueries(ReadFileBytes(path), catalog);
}

void StoreQueries(const std::vector<QueryInstance>& queries, const std::filesystem::path& path) {
  WriteFileBytes(path, SerializeQueries(queries));
}

CorpusSplits LoadSplits(const std::filesystem::path& path) {
  Json doc = ParseJson(ReadFileBytes(path), "splits.json");
  Require(doc.is_object(), ErrorCode::kSchema, "splits.json must be an object");
  auto list = [&](const char* key) {
    return Field<std::vector<std::size_t>>(doc, key, "splits.json");
  };
  return {list("pair_train"), list("pair_eval"), list("query_train"), list("query_eval")};
}

void StoreSplits(const CorpusSplits& s, const std::filesystem::path& path) {
  OrderedJson doc;
  doc["pair_train"] = s.pair_train;
  doc["pair_eval"] = s.pair_eval;
  doc["query_train"] = s.query_train;
  doc["query_eval"] = s.query_eval;
  WriteFileBytes(path, doc.dump() + "\n");
}

void ValidateTokenCache(const TokenCache& cache) {
  Require(cache.dim > 0, ErrorCode::kFormat, "token cache dim must be positive");
  for (const auto& [id, v] : cache.entries) {
    const std::string where = "token for sheet " + std::to_string(id);
    Require(v.size() == cache.dim, ErrorCode::kFormat, where + ": wrong dimension");
    double sq = 0.0;
    for (float x : v) {
      Require(std::isfinite(x), ErrorCode::kFormat, where + ": non-finite component");
      sq += static_cast<double>(x) * x;
    }
    Require(std::abs(std::sqrt(sq) - 1.0) <= 1e-5, ErrorCode::kFormat, where + ": not unit norm");
  }
}

std::string EncodeTokenCache(const TokenCache& cache) {
  ValidateTokenCache(cache);
  std::string out(kTokenMagic, 4);
  PutU32(out, kTokenCacheVersion);
  PutU32(out, cache.dim);
  PutU32(out, static_cast<std::uint32_t>(cache.entries.size()));
  out.reserve(16 + cache.entries.size() * (4 + 4 * cache.dim));
  for (const auto& [id, v] : cache.entries) {
    PutU32(out, id);
    for (float x : v) PutU32(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

TokenCache DecodeTokenCache(std::string_view bytes) {
  Require(bytes.size() >= 16, ErrorCode::kFormat, "token cache: truncated header");
  Require(bytes.substr(0, 4) == std::string_view(kTokenMagic, 4), ErrorCode::kFormat,
          "token cache: magic mismatch");
  const std::uint32_t version = GetU32(bytes, 4);
  Require(version == kTokenCacheVersion, ErrorCode::kFormat,
          "token cache: unsupported version " + std::to_string(version));
  TokenCache cache;
  cache.dim = GetU32(bytes, 8);
  const std::uint32_t count = GetU32(bytes, 12);
  Require(cache.dim > 0, ErrorCode::kFormat, "token cache: zero dimension");
  const std::uint64_t record = 4 + 4ULL * cache.dim;
  const std::uint64_t expected = 16 + record * count;
  Require(bytes.size() >= expected, ErrorCode::kFormat,
          "token cache: declares " + std::to_string(count) + " entries but the payload is truncated");
  Require(bytes.size() == expected, ErrorCode::kFormat, "token cache: trailing bytes after payload");
  std::size_t off = 16;
  for (std::uint32_t i = 0; i < count; ++i) {
    const SheetId id = GetU32(bytes, off);
    off += 4;
    std::vector<float> v(cache.dim);
    for (std::uint32_t c = 0; c < cache.dim; ++c, off += 4)
      v[c] = std::bit_cast<float>(GetU32(bytes, off));
    Require(cache.entries.emplace(id, std::move(v)).second, ErrorCode::kFormat,
            "token cache: duplicate sheet_id " + std::to_string(id));
  }
  ValidateTokenCache(cache);
  return cache;
}

void WriteTokenCache(const TokenCache& cache, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodeTokenCache(cache));
}

TokenCache ReadTokenCache(const std::filesystem::path& path) {
  return DecodeTokenCache(ReadFileBytes(path));
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  Require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace sheettoken
