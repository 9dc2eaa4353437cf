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
#include "sheettoken/sheettoken.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "sheettoken/error.hpp"
#include "sheettoken/harness.hpp"

struct st_corpus {
  sheettoken::CorpusData data;
};
struct st_encoder {
  sheettoken::EncoderParams params;
};
struct st_tokens {
  sheettoken::TokenCache cache;
};
struct st_retriever {
  sheettoken::RetrieverParams params;
};

namespace {

using namespace sheettoken;

thread_local std::string g_last_error;

st_status ToStatus(ErrorCode code) { return static_cast<st_status>(static_cast<int>(code)); }

template <typename F>
st_status Guard(F&& body) {
  g_last_error.clear();
  try {
    body();
    return ST_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return ToStatus(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ST_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ST_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return ST_ERR_INTERNAL;
  }
}

void NotNull(const void* p, const char* what) {
  Require(p != nullptr, ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void Emit(char** out, const std::string& s) {
  if (out) *out = Dup(s);
}

RunConfig Config(const char* json) { return ParseRunConfig(json ? std::string_view(json) : std::string_view()); }

}  // namespace

extern "C" {

const char* st_version(void) { return "1.0.0"; }

const char* st_status_name(st_status status) {
  switch (status) {
    case ST_OK: return "ok";
    case ST_ERR_INVALID_ARGUMENT: return "invalid argument";
    case ST_ERR_IO: return "i/o error";
    case ST_ERR_PARSE: return "parse error";
    case ST_ERR_SCHEMA: return "schema error";
    case ST_ERR_FORMAT: return "format error";
    case ST_ERR_NUMERIC: return "numeric error";
    case ST_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* st_last_error(void) { return g_last_error.c_str(); }

void st_string_free(char* s) { std::free(s); }

st_status st_config_check(const char* config_json) {
  return Guard([&] { Config(config_json); });
}

st_status st_fabricate(const char* templates_dir, const char* out_dir, uint64_t seed, size_t num_templates,
                       const char* config_json, char** stats_json) {
  return Guard([&] {
    NotNull(out_dir, "out_dir");
    FabricationConfig cfg = Config(config_json).fabricate;
    cfg.seed = seed;
    const FabricationRun run = FabricateCorpus(templates_dir ? templates_dir : "", num_templates, cfg);
    StoreCorpus(run.corpus, run.splits, out_dir);
    Emit(stats_json, StatsJson(run.corpus.stats));
  });
}

st_status st_corpus_load(const char* dir, st_corpus** out) {
  return Guard([&] {
    NotNull(dir, "dir");
    NotNull(out, "out");
    *out = new st_corpus{LoadCorpusData(dir)};
  });
}

void st_corpus_free(st_corpus* corpus) { delete corpus; }
size_t st_corpus_num_sheets(const st_corpus* corpus) { return corpus ? corpus->data.catalog.size() : 0; }
size_t st_corpus_num_pairs(const st_corpus* corpus) { return corpus ? corpus->data.pairs.size() : 0; }
size_t st_corpus_num_queries(const st_corpus* corpus) { return corpus ? corpus->data.queries.size() : 0; }

st_status st_encoder_train(const st_corpus* corpus, const char* config_json, uint64_t seed, st_encoder** out,
                           char** log_csv) {
  return Guard([&] {
    NotNull(corpus, "corpus");
    NotNull(out, "out");
    EncoderConfig cfg = Config(config_json).encoder;
    cfg.seed = seed;
    const CorpusData& d = corpus->data;
    EncoderTrainResult r = TrainEncoder(d.catalog, d.pairs, d.splits.pair_train, d.splits.pair_eval, cfg);
    const std::string log = TrainLogCsv(r.log);
    auto* enc = new st_encoder{std::move(r.params)};
    try {
      Emit(log_csv, log);
    } catch (...) {
      delete enc;
      throw;
    }
    *out = enc;
  });
}

st_status st_encoder_save(const st_encoder* encoder, const char* path) {
  return Guard([&] {
    NotNull(encoder, "encoder");
    NotNull(path, "path");
    SaveEncoder(encoder->params, path);
  });
}

st_status st_encoder_load(const char* path, st_encoder** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new st_encoder{LoadEncoder(path)};
  });
}

void st_encoder_free(st_encoder* encoder) { delete encoder; }
size_t st_encoder_dim(const st_encoder* encoder) { return encoder ? encoder->params.config.dim : 0; }

st_status st_encoder_embed_text(const st_encoder* encoder, const char* text, double* out, size_t len) {
  return Guard([&] {
    NotNull(encoder, "encoder");
    NotNull(text, "text");
    NotNull(out, "out");
    Require(len == encoder->params.config.dim, ErrorCode::kInvalidArgument, "output length differs from dim");
    const std::vector<double> z = EmbedText(text, encoder->params);
    std::copy(z.begin(), z.end(), out);
  });
}

st_status st_tokens_encode(const st_encoder* encoder, const st_corpus* corpus, unsigned threads, st_tokens** out) {
  return Guard([&] {
    NotNull(encoder, "encoder");
    NotNull(corpus, "corpus");
    NotNull(out, "out");
    *out = new st_tokens{EncodeCatalog(corpus->data.catalog, encoder->params, threads ? threads : 1)};
  });
}

st_status st_tokens_import(const char* csv_path, const st_corpus* corpus, st_tokens** out) {
  return Guard([&] {
    NotNull(csv_path, "csv_path");
    NotNull(corpus, "corpus");
    NotNull(out, "out");
    *out = new st_tokens{ImportEmbeddings(csv_path, corpus->data.catalog)};
  });
}

st_status st_tokens_save(const st_tokens* tokens, const char* path) {
  return Guard([&] {
    NotNull(tokens, "tokens");
    NotNull(path, "path");
    WriteTokenCache(tokens->cache, path);
  });
}

st_status st_tokens_load(const char* path, st_tokens** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new st_tokens{ReadTokenCache(path)};
  });
}

void st_tokens_free(st_tokens* tokens) { delete tokens; }
size_t st_tokens_dim(const st_tokens* tokens) { return tokens ? tokens->cache.dim : 0; }
size_t st_tokens_count(const st_tokens* tokens) { return tokens ? tokens->cache.entries.size() : 0; }

st_status st_tokens_get(const st_tokens* tokens, uint32_t sheet_id, float* out, size_t len) {
  return Guard([&] {
    NotNull(tokens, "tokens");
    NotNull(out, "out");
    Require(len == tokens->cache.dim, ErrorCode::kInvalidArgument, "output length differs from dim");
    const auto it = tokens->cache.entries.find(sheet_id);
    Require(it != tokens->cache.entries.end(), ErrorCode::kInvalidArgument,
            "no token for sheet " + std::to_string(sheet_id));
    std::copy(it->second.begin(), it->second.end(), out);
  });
}

st_status st_retriever_train(const st_corpus* corpus, const st_tokens* tokens, const st_encoder* encoder,
                             const char* config_json, st_mode mode, uint64_t seed, st_retriever** out,
                             char** log_csv) {
  return Guard([&] {
    NotNull(corpus, "corpus");
    NotNull(tokens, "tokens");
    NotNull(encoder, "encoder");
    NotNull(out, "out");
    Require(mode == ST_MODE_ENHANCED || mode == ST_MODE_BASELINE, ErrorCode::kInvalidArgument, "unknown mode");
    RetrieverConfig cfg = ConfigForMode(Config(config_json).retriever,
                                        mode == ST_MODE_BASELINE ? RetrieverMode::kBaseline : RetrieverMode::kEnhanced);
    cfg.seed = seed;
    const CorpusData& d = corpus->data;
    RetrieverTrainResult r = TrainRetriever(d.catalog, tokens->cache, encoder->params, d.queries,
                                            d.splits.query_train, d.splits.query_eval, cfg);
    const std::string log = TrainLogCsv(r.log);
    auto* ret = new st_retriever{std::move(r.params)};
    try {
      Emit(log_csv, log);
    } catch (...) {
      delete ret;
      throw;
    }
    *out = ret;
  });
}

st_status st_retriever_save(const st_retriever* retriever, const char* path) {
  return Guard([&] {
    NotNull(retriever, "retriever");
    NotNull(path, "path");
    SaveRetriever(retriever->params, path);
  });
}

st_status st_retriever_load(const char* path, st_retriever** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new st_retriever{LoadRetriever(path)};
  });
}

void st_retriever_free(st_retriever* retriever) { delete retriever; }

st_status st_query(const st_corpus* corpus, const st_tokens* tokens, const st_encoder* encoder,
                   const st_retriever* retriever, const char* text, double threshold, size_t top_k, st_hit** hits,
                   size_t* count) {
  return Guard([&] {
    NotNull(corpus, "corpus");
    NotNull(tokens, "tokens");
    NotNull(encoder, "encoder");
    NotNull(retriever, "retriever");
    NotNull(text, "text");
    NotNull(hits, "hits");
    NotNull(count, "count");
    const std::optional<std::size_t> k = top_k ? std::optional<std::size_t>(top_k) : std::nullopt;
    const RetrievalResult r = Retrieve(text, corpus->data.catalog, tokens->cache, encoder->params,
                                       retriever->params, {}, threshold, k);
    auto* out = static_cast<st_hit*>(std::malloc(sizeof(st_hit) * (r.ranking.empty() ? 1 : r.ranking.size())));
    if (!out) throw std::bad_alloc();
    for (std::size_t i = 0; i < r.ranking.size(); ++i) {
      const std::size_t at = r.ranking[i];
      out[i] = {r.candidates[at], r.scores[at], r.selected[at] ? 1 : 0};
    }
    *hits = out;
    *count = r.ranking.size();
  });
}

void st_hits_free(st_hit* hits) { std::free(hits); }

st_status st_eval_stage1(const st_corpus* corpus, const st_encoder* encoder, char** table) {
  return Guard([&] {
    NotNull(corpus, "corpus");
    NotNull(encoder, "encoder");
    NotNull(table, "table");
    const CorpusData& d = corpus->data;
    const MetricReport rows[] = {EvaluateStage1(d, encoder->params, d.splits.pair_train, "train"),
                                 EvaluateStage1(d, encoder->params, d.splits.pair_eval, "eval")};
    *table = Dup(MetricTable(rows));
  });
}

st_status st_eval_stage2(const st_corpus* corpus, const st_tokens* tokens, const st_encoder* encoder,
                         const st_retriever* retriever, unsigned threads, char** table) {
  return Guard([&] {
    NotNull(corpus, "corpus");
    NotNull(tokens, "tokens");
    NotNull(encoder, "encoder");
    NotNull(retriever, "retriever");
    NotNull(table, "table");
    const CorpusData& d = corpus->data;
    const unsigned t = threads ? threads : 1;
    const ListwiseScore tr =
        EvaluateStage2(d, tokens->cache, encoder->params, retriever->params, d.splits.query_train, t);
    const ListwiseScore ev =
        EvaluateStage2(d, tokens->cache, encoder->params, retriever->params, d.splits.query_eval, t);
    const MetricReport rows[] = {{2, "train", tr.accuracy, tr.entropy, 0}, {2, "eval", ev.accuracy, ev.entropy, 0}};
    char buf[128];
    std::snprintf(buf, sizeof(buf), "exact-set rate: train %.4f, eval %.4f\n", tr.exact_set, ev.exact_set);
    *table = Dup(MetricTable(rows) + buf);
  });
}

st_status st_ablate(const st_corpus* corpus, const uint64_t* seeds, size_t num_seeds, const char* config_json,
                    st_progress_fn progress, void* user, char** csv, char** json, int* passes) {
  return Guard([&] {
    NotNull(corpus, "corpus");
    NotNull(seeds, "seeds");
    const RunConfig rc = Config(config_json);
    const PipelineConfig base{rc.encoder, rc.retriever, RetrieverMode::kEnhanced};
    ProgressFn fn;
    if (progress) fn = [&](const std::string& msg) { progress(msg.c_str(), user); };
    const AblationReport report =
        RunAblations(corpus->data, std::span<const std::uint64_t>(seeds, num_seeds), base, fn);
    const std::string c = AblationCsv(report), j = AblationJson(report);
    char* c_out = csv ? Dup(c) : nullptr;
    char* j_out = nullptr;
    try {
      j_out = json ? Dup(j) : nullptr;
    } catch (...) {
      std::free(c_out);
      throw;
    }
    if (csv) *csv = c_out;
    if (json) *json = j_out;
    if (passes) *passes = report.Passes() ? 1 : 0;
  });
}

st_status st_flops(const st_corpus* corpus, const char* config_json, char** table, char** json) {
  return Guard([&] {
    const RunConfig rc = Config(config_json);
    FlopsConfig fc = rc.flops;
    if (corpus) {
      fc.features_per_text =
          static_cast<std::size_t>(std::llround(MeanFeatureCount(corpus->data.catalog, rc.encoder)));
    }
    const FlopsEstimate est[] = {EstimateEncoderFlops(fc), EstimateRetrieverFlops(fc)};
    const std::string t = FlopsTable(est), j = FlopsJson(est);
    char* t_out = table ? Dup(t) : nullptr;
    char* j_out = nullptr;
    try {
      j_out = json ? Dup(j) : nullptr;
    } catch (...) {
      std::free(t_out);
      throw;
    }
    if (table) *table = t_out;
    if (json) *json = j_out;
  });
}

}  // extern "C"
