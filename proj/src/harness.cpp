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
#include "sheettoken/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

#include "json.hpp"
#include "sheettoken/error.hpp"
#include "sheettoken/matrix.hpp"

namespace sheettoken {

namespace {

using OrderedJson = nlohmann::ordered_json;
using U = std::uint64_t;

class FlopsBuilder {
 public:
  explicit FlopsBuilder(std::string model) { est_.model = std::move(model); }
  void Add(const std::string& part, const std::string& op, U flops) {
    est_.breakdown.push_back({part, op, flops});
    (part == "encoder" ? est_.encoder_flops : est_.graph_flops) += flops;
  }
  FlopsEstimate Done() { return std::move(est_); }

 private:
  FlopsEstimate est_;
};

void AddEncoderTexts(FlopsBuilder& b, const FlopsConfig& cfg, U texts) {
  const U d = cfg.dim, f = cfg.features_per_text;
  const std::string n = " (x" + std::to_string(texts) + ")";
  b.Add("encoder", "feature sum pooling" + n, texts * f * d);
  b.Add("encoder", "projection 1 matmul" + n, texts * MatMulFlops(1, d, d));
  b.Add("encoder", "projection 1 bias+tanh" + n, texts * 2 * d);
  b.Add("encoder", "projection 2 matmul" + n, texts * MatMulFlops(1, d, d));
  b.Add("encoder", "projection 2 bias" + n, texts * d);
  b.Add("encoder", "l2 normalize" + n, texts * 3 * d);
}

void ValidateFlopsConfig(const FlopsConfig& cfg) {
  Require(cfg.dim > 0 && cfg.features_per_text > 0 && cfg.candidates > 0 && cfg.num_stages > 0 &&
              cfg.gcn_layers > 0,
          ErrorCode::kInvalidArgument, "FLOPs configuration entries must be positive");
}

std::string Human(U flops) {
  char buf[64];
  const double x = static_cast<double>(flops);
  if (x >= 1e9) {
    std::snprintf(buf, sizeof(buf), "%.3f GFLOPs", x / 1e9);
  } else if (x >= 1e6) {
    std::snprintf(buf, sizeof(buf), "%.3f MFLOPs", x / 1e6);
  } else {
    std::snprintf(buf, sizeof(buf), "%.3f kFLOPs", x / 1e3);
  }
  return buf;
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<double> ParseCsvNumbers(const std::string& line, std::size_t line_no) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
    Require(used == cell.size() && !cell.empty() && std::isfinite(v), ErrorCode::kParse,
            "embedding line " + std::to_string(line_no) + ": '" + cell + "' is not a number");
    out.push_back(v);
  }
  return out;
}

}  // namespace

U MatMulFlops(U a, U b, U c) { return 2 * a * b * c; }

FlopsEstimate EstimateEncoderFlops(const FlopsConfig& cfg) {
  ValidateFlopsConfig(cfg);
  const U d = cfg.dim;
  FlopsBuilder b("stage 1 sheet encoder (per pair)");
  AddEncoderTexts(b, cfg, 2);
  b.Add("graph", "pair features |u-v|, u*v", 3 * d);
  b.Add("graph", "head layer 1 matmul", MatMulFlops(1, 4 * d, d));
  b.Add("graph", "head layer 1 bias+tanh", 2 * d);
  b.Add("graph", "head layer 2 matmul", MatMulFlops(1, d, 2));
  b.Add("graph", "head layer 2 bias", 2);
  b.Add("graph", "softmax", 2);
  return b.Done();
}

FlopsEstimate EstimateRetrieverFlops(const FlopsConfig& cfg) {
  ValidateFlopsConfig(cfg);
  const U d = cfg.dim, m = cfg.candidates, t = cfg.num_stages;
  FlopsBuilder b("stage 2 graph retriever (per query)");
  AddEncoderTexts(b, cfg, m + 1);
  b.Add("graph", "semantic channel", m * m * (2 * d + 2));
  b.Add("graph", "query channel", m * (2 * d + 1) + m * m);
  b.Add("graph", "schema channel", m * m);
  b.Add("graph", "shape channel", 8 * m * m);
  b.Add("graph", "channel mixing", t * (kNumChannels * 2 * m * m + kNumChannels));
  if (t > 1) b.Add("graph", "stage products", (t - 1) * MatMulFlops(m, m, m));
  b.Add("graph", "adjacency normalization", 4 * m * m + m);
  for (std::size_t l = 1; l <= cfg.gcn_layers; ++l) {
    const std::string tag = "propagation " + std::to_string(l);
    b.Add("graph", tag + " A*H", MatMulFlops(m, m, d));
    b.Add("graph", tag + " H*W", MatMulFlops(m, d, d));
    b.Add("graph", tag + " relu", m * d);
  }
  b.Add("graph", "pooling scores", MatMulFlops(m, d, 1) + m);
  b.Add("graph", "pooling softmax", m);
  b.Add("graph", "pooling sum", MatMulFlops(1, m, d));
  b.Add("graph", "node head layer 1", MatMulFlops(m, 2 * d, d) + 2 * m * d);
  b.Add("graph", "node head layer 2", MatMulFlops(m, d, 1) + m);
  b.Add("graph", "sigmoid", m);
  return b.Done();
}

double MeanFeatureCount(const SheetCatalog& catalog, const EncoderConfig& cfg) {
  Require(!catalog.empty(), ErrorCode::kInvalidArgument, "empty catalog");
  double total = 0.0;
  for (const auto& [id, r] : catalog.records())
    total += static_cast<double>(
        HashedFeatures(SerializeRecord(r, cfg.header_cap, cfg.include_examples), cfg.hash_buckets).size());
  return total / static_cast<double>(catalog.size());
}

std::string FlopsTable(std::span<const FlopsEstimate> estimates) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-38s %22s %22s\n", "model", "encoder cost", "graph/head cost");
  out += buf;
  for (const FlopsEstimate& e : estimates) {
    std::snprintf(buf, sizeof(buf), "%-38s %22s %22s\n", e.model.c_str(), Human(e.encoder_flops).c_str(),
                  Human(e.graph_flops).c_str());
    out += buf;
  }
  out += "\nbreakdown\n";
  for (const FlopsEstimate& e : estimates) {
    out += e.model + "\n";
    for (const FlopsEntry& f : e.breakdown) {
      std::snprintf(buf, sizeof(buf), "  %-8s %-40s %16llu\n", f.part.c_str(), f.op.c_str(),
                    static_cast<unsigned long long>(f.flops));
      out += buf;
    }
    std::snprintf(buf, sizeof(buf), "  %-49s %16llu\n", "total", static_cast<unsigned long long>(e.total()));
    out += buf;
  }
  out +=
      "\nreference figures for a 12-layer transformer backbone: stage 1 ~45.9 GFLOPs encoder / <0.1 GFLOPs head,"
      "\nstage 2 ~235.0 GFLOPs encoder / ~0.1 GFLOPs graph. Different backbone: not comparable with the counts "
      "above.\n";
  return out;
}

std::string FlopsJson(std::span<const FlopsEstimate> estimates) {
  OrderedJson doc = OrderedJson::array();
  for (const FlopsEstimate& e : estimates) {
    OrderedJson item;
    item["model"] = e.model;
    item["encoder_flops"] = e.encoder_flops;
    item["graph_flops"] = e.graph_flops;
    item["total_flops"] = e.total();
    OrderedJson rows = OrderedJson::array();
    for (const FlopsEntry& f : e.breakdown) rows.push_back({{"part", f.part}, {"op", f.op}, {"flops", f.flops}});
    item["breakdown"] = std::move(rows);
    doc.push_back(std::move(item));
  }
  return doc.dump(2) + "\n";
}

namespace {

using Json = nlohmann::json;

template <typename T>
T As(const Json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      Require(v.is_boolean(), ErrorCode::kSchema, "config: " + key + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      Require(v.is_number_integer() && (std::is_signed_v<T> || v.get<std::int64_t>() >= 0), ErrorCode::kSchema,
              "config: " + key + " must be a non-negative integer");
    } else {
      Require(v.is_number(), ErrorCode::kSchema, "config: " + key + " must be a number");
    }
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kSchema, "config: " + key + ": " + e.what());
  }
}

using Setter = std::function<void(const Json&, const std::string&)>;

template <typename T>
Setter Field(T& target) {
  return [&target](const Json& v, const std::string& key) { target = As<T>(v, key); };
}

void ApplySection(const Json& section, const std::string& name, const std::map<std::string, Setter>& fields) {
  Require(section.is_object(), ErrorCode::kSchema, "config: " + name + " must be an object");
  for (const auto& [key, value] : section.items()) {
    const auto it = fields.find(key);
    Require(it != fields.end(), ErrorCode::kSchema, "config: unknown key " + name + "." + key);
    it->second(value, name + "." + key);
  }
}

}  // namespace

RunConfig ParseRunConfig(std::string_view json_text) {
  RunConfig rc;
  if (json_text.find_first_not_of(" \t\r\n") == std::string_view::npos) return rc;
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    Fail(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  Require(root.is_object(), ErrorCode::kSchema, "config: top level must be an object");

  FabricationConfig& f = rc.fabricate;
  EncoderConfig& e = rc.encoder;
  RetrieverConfig& r = rc.retriever;
  FlopsConfig& fl = rc.flops;
  const std::map<std::string, std::map<std::string, Setter>> sections = {
      {"fabricate",
       {{"col_overlap_lo", Field(f.col_overlap_lo)},
        {"col_overlap_hi", Field(f.col_overlap_hi)},
        {"row_overlap", Field(f.row_overlap)},
        {"p_string", Field(f.p_string)},
        {"eps_lo", Field(f.eps_lo)},
        {"eps_hi", Field(f.eps_hi)},
        {"neg_ratio", Field(f.neg_ratio)},
        {"seed", Field(f.seed)},
        {"num_queries", Field(f.num_queries)},
        {"min_positives", Field(f.min_positives)},
        {"max_positives", Field(f.max_positives)},
        {"threads", Field(f.threads)}}},
      {"encoder",
       {{"dim", Field(e.dim)},
        {"header_cap", Field(e.header_cap)},
        {"smoothing", Field(e.smoothing)},
        {"hash_buckets", Field(e.hash_buckets)},
        {"include_examples", Field(e.include_examples)},
        {"symmetric_head", Field(e.symmetric_head)},
        {"learning_rate", Field(e.learning_rate)},
        {"momentum", Field(e.momentum)},
        {"epochs", Field(e.epochs)},
        {"batch_size", Field(e.batch_size)},
        {"seed", Field(e.seed)},
        {"threads", Field(e.threads)}}},
      {"retriever",
       {{"num_stages", Field(r.num_stages)},
        {"gcn_layers", Field(r.gcn_layers)},
        {"tau_pool", Field(r.tau_pool)},
        {"tau_ret", Field(r.tau_ret)},
        {"lambda_align", Field(r.lambda_align)},
        {"lambda_node", Field(r.lambda_node)},
        {"own_negative_set", Field(r.own_negative_set)},
        {"learning_rate", Field(r.learning_rate)},
        {"momentum", Field(r.momentum)},
        {"epochs", Field(r.epochs)},
        {"batch_size", Field(r.batch_size)},
        {"init_noise", Field(r.init_noise)},
        {"seed", Field(r.seed)},
        {"threads", Field(r.threads)}}},
      {"flops",
       {{"dim", Field(fl.dim)},
        {"features_per_text", Field(fl.features_per_text)},
        {"candidates", Field(fl.candidates)},
        {"num_stages", Field(fl.num_stages)},
        {"gcn_layers", Field(fl.gcn_layers)}}},
  };
  for (const auto& [name, value] : root.items()) {
    const auto it = sections.find(name);
    Require(it != sections.end(), ErrorCode::kSchema, "config: unknown section " + name);
    ApplySection(value, name, it->second);
  }
  ValidateConfig(rc.fabricate);
  ValidateEncoderConfig(rc.encoder);
  ValidateRetrieverConfig(rc.retriever);
  return rc;
}

TemplateCounts ScaleTemplateCounts(std::size_t total) {
  Require(total > 0, ErrorCode::kInvalidArgument, "template total must be positive");
  TemplateCounts counts;
  std::size_t* slots[] = {&counts.financial_statements, &counts.sales_records,     &counts.inventory,
                          &counts.human_resources,      &counts.project_management, &counts.stock_ticks,
                          &counts.financial_business,   &counts.global_indices,     &counts.movie_reviews,
                          &counts.text_sentiment};
  const double ref = static_cast<double>(TemplateCounts{}.total());
  std::vector<std::pair<double, std::size_t>> rest;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < std::size(slots); ++i) {
    const double exact = static_cast<double>(*slots[i]) * static_cast<double>(total) / ref;
    *slots[i] = static_cast<std::size_t>(exact);
    assigned += *slots[i];
    rest.emplace_back(-(exact - std::floor(exact)), i);
  }
  std::sort(rest.begin(), rest.end());
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++*slots[rest[k % rest.size()].second];
  return counts;
}

FabricationRun FabricateCorpus(const std::filesystem::path& templates_dir, std::size_t num_templates,
                               const FabricationConfig& cfg) {
  ValidateConfig(cfg);
  std::vector<CellGrid> templates;
  if (templates_dir.empty()) {
    templates = GenerateTemplates(num_templates ? ScaleTemplateCounts(num_templates) : TemplateCounts{}, cfg.seed);
  } else {
    templates = LoadTemplates(templates_dir);
    if (num_templates && num_templates < templates.size()) {
      Rng rng(DeriveSeed(cfg.seed, 0x7e3d));
      rng.Shuffle(templates);
      templates.resize(num_templates);
      std::sort(templates.begin(), templates.end(),
                [](const CellGrid& a, const CellGrid& b) { return a.source_name < b.source_name; });
    }
  }
  FabricationRun run;
  run.corpus = BuildCorpus(templates, cfg);
  Rng split_rng(cfg.seed);
  run.splits = MakeSplits(run.corpus.pairs.size(), run.corpus.queries.size(), split_rng);
  return run;
}

CorpusData ToCorpusData(const FabricationRun& run) {
  return {run.corpus.catalog, run.corpus.pairs, run.corpus.queries, run.splits};
}

CorpusData ReferenceCorpus(std::uint64_t seed) {
  FabricationConfig cfg;
  cfg.seed = seed;
  return ToCorpusData(FabricateCorpus({}, 0, cfg));
}

CorpusData LoadCorpusData(const std::filesystem::path& dir) {
  const CorpusPaths paths{dir};
  CorpusData data;
  data.catalog = LoadCatalog(paths.sheets());
  data.pairs = LoadPairs(paths.pairs(), &data.catalog);
  data.queries = LoadQueries(paths.queries(), &data.catalog);
  data.splits = LoadSplits(paths.splits());
  for (std::size_t i : data.splits.pair_train)
    Require(i < data.pairs.size(), ErrorCode::kSchema, "splits.json: pair index out of range");
  for (std::size_t i : data.splits.pair_eval)
    Require(i < data.pairs.size(), ErrorCode::kSchema, "splits.json: pair index out of range");
  for (std::size_t i : data.splits.query_train)
    Require(i < data.queries.size(), ErrorCode::kSchema, "splits.json: query index out of range");
  for (std::size_t i : data.splits.query_eval)
    Require(i < data.queries.size(), ErrorCode::kSchema, "splits.json: query index out of range");
  return data;
}

PipelineResult RunPipeline(const CorpusData& data, const PipelineConfig& cfg) {
  PipelineResult r;
  r.encoder = TrainEncoder(data.catalog, data.pairs, data.splits.pair_train, data.splits.pair_eval, cfg.encoder);
  r.tokens = EncodeCatalog(data.catalog, r.encoder.params, cfg.encoder.threads);
  r.retriever = TrainRetriever(data.catalog, r.tokens, r.encoder.params, data.queries, data.splits.query_train,
                               data.splits.query_eval, ConfigForMode(cfg.retriever, cfg.mode));
  return r;
}

MetricReport EvaluateStage1(const CorpusData& data, const EncoderParams& encoder, std::span<const std::size_t> split,
                            const std::string& split_name) {
  const PairEvaluation ev = EvaluatePairs(data.catalog, data.pairs, split, encoder);
  return {1, split_name, ev.accuracy, ev.entropy, 0};
}

ListwiseScore EvaluateStage2(const CorpusData& data, const TokenCache& tokens, const EncoderParams& encoder,
                             const RetrieverParams& retriever, std::span<const std::size_t> split, unsigned threads) {
  Require(!split.empty(), ErrorCode::kInvalidArgument, "empty query split");
  Require(tokens.dim == encoder.config.dim && tokens.dim == retriever.dim, ErrorCode::kInvalidArgument,
          "token, encoder and retriever dimensions differ");
  std::vector<Workspace> ws;
  std::vector<QueryInstance> qs;
  for (std::size_t i : split) {
    Require(i < data.queries.size(), ErrorCode::kInvalidArgument, "query index out of range");
    ws.push_back(MakeWorkspace(data.queries[i], EmbedText(data.queries[i].query, encoder), data.catalog, tokens));
    qs.push_back(data.queries[i]);
  }
  return EvaluateQueries(ws, qs, retriever, threads);
}

std::string MetricTable(std::span<const MetricReport> rows) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-6s %-6s %-6s %-9s %-9s\n", "stage", "split", "epoch", "accuracy", "entropy");
  out += buf;
  for (const MetricReport& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-6d %-6s %-6d %-9.4f %-9.4f\n", r.stage, r.split.c_str(), r.epoch, r.accuracy,
                  r.entropy);
    out += buf;
  }
  return out;
}

TokenCache ImportEmbeddings(const std::filesystem::path& csv, const SheetCatalog& catalog) {
  std::stringstream in(ReadFileBytes(csv));
  TokenCache cache;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> v = ParseCsvNumbers(line, line_no);
    Require(v.size() >= 2, ErrorCode::kParse, "embedding line " + std::to_string(line_no) + " has no vector");
    const double raw_id = v.front();
    Require(raw_id >= 0 && raw_id == std::floor(raw_id) && raw_id <= 4294967295.0, ErrorCode::kParse,
            "embedding line " + std::to_string(line_no) + ": invalid sheet id");
    const auto id = static_cast<SheetId>(raw_id);
    v.erase(v.begin());
    if (cache.dim == 0) cache.dim = static_cast<std::uint32_t>(v.size());
    Require(v.size() == cache.dim, ErrorCode::kSchema,
            "embedding line " + std::to_string(line_no) + " has " + std::to_string(v.size()) +
                " components, expected " + std::to_string(cache.dim));
    Require(catalog.contains(id), ErrorCode::kSchema, "embedding for unknown sheet " + std::to_string(id));
    const double n = Norm(v);
    Require(n > 0.0, ErrorCode::kNumeric, "embedding of sheet " + std::to_string(id) + " is zero");
    std::vector<float> f(v.size());
    for (std::size_t c = 0; c < v.size(); ++c) f[c] = static_cast<float>(v[c] / n);
    Require(cache.entries.emplace(id, std::move(f)).second, ErrorCode::kSchema,
            "duplicate embedding for sheet " + std::to_string(id));
  }
  for (SheetId id : catalog.ids())
    Require(cache.entries.count(id) != 0, ErrorCode::kSchema, "no embedding for sheet " + std::to_string(id));
  ValidateTokenCache(cache);
  return cache;
}

std::string VariantName(AblationVariant v) {
  switch (v) {
    case AblationVariant::kFull:
      return "full";
    case AblationVariant::kShallow:
      return "shallow";
    case AblationVariant::kNoExamples:
      return "no_examples";
  }
  Fail(ErrorCode::kInternal, "unknown ablation variant");
}

double AblationReport::Accuracy(AblationVariant v, std::uint64_t seed) const {
  for (const AblationRow& r : rows)
    if (r.variant == v && r.seed == seed) return r.accuracy;
  Fail(ErrorCode::kInvalidArgument, "no ablation row for " + VariantName(v) + " seed " + std::to_string(seed));
}

double AblationReport::MeanAccuracy(AblationVariant v) const {
  std::vector<double> xs;
  for (const AblationRow& r : rows)
    if (r.variant == v) xs.push_back(r.accuracy);
  return Mean(xs);
}

double AblationReport::MeanEntropy(AblationVariant v) const {
  std::vector<double> xs;
  for (const AblationRow& r : rows)
    if (r.variant == v) xs.push_back(r.entropy);
  return Mean(xs);
}

std::size_t AblationReport::OrderedSeeds() const {
  std::size_t n = 0;
  for (std::uint64_t s : seeds) {
    const double full = Accuracy(AblationVariant::kFull, s);
    const double shallow = Accuracy(AblationVariant::kShallow, s);
    const double plain = Accuracy(AblationVariant::kNoExamples, s);
    n += full >= shallow && shallow >= plain;
  }
  return n;
}

bool AblationReport::MeanOrdered() const {
  return MeanAccuracy(AblationVariant::kFull) >= MeanAccuracy(AblationVariant::kShallow) &&
         MeanAccuracy(AblationVariant::kShallow) >= MeanAccuracy(AblationVariant::kNoExamples);
}

bool AblationReport::Passes() const {
  return !seeds.empty() && MeanOrdered() && 5 * OrderedSeeds() >= 4 * seeds.size();
}

AblationReport RunAblations(const CorpusData& data, std::span<const std::uint64_t> seeds, const PipelineConfig& base,
                            const ProgressFn& progress) {
  Require(!seeds.empty(), ErrorCode::kInvalidArgument, "ablation needs at least one seed");
  AblationReport report;
  report.seeds.assign(seeds.begin(), seeds.end());
  auto note = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  auto retriever_row = [&](AblationVariant v, std::uint64_t seed, const EncoderParams& enc, const TokenCache& tokens,
                           RetrieverMode mode) {
    RetrieverConfig rc = ConfigForMode(base.retriever, mode);
    rc.seed = seed;
    const RetrieverTrainResult r =
        TrainRetriever(data.catalog, tokens, enc, data.queries, data.splits.query_train, data.splits.query_eval, rc);
    const ListwiseScore s = EvaluateStage2(data, tokens, enc, r.params, data.splits.query_eval, rc.threads);
    report.rows.push_back({v, seed, s.accuracy, s.entropy, s.exact_set});
    char buf[160];
    std::snprintf(buf, sizeof(buf), "seed %llu %s: accuracy %.4f entropy %.4f",
                  static_cast<unsigned long long>(seed), VariantName(v).c_str(), s.accuracy, s.entropy);
    note(buf);
  };
  for (std::uint64_t seed : seeds) {
    EncoderConfig with = base.encoder;
    with.seed = seed;
    with.include_examples = true;
    const EncoderTrainResult enc =
        TrainEncoder(data.catalog, data.pairs, data.splits.pair_train, data.splits.pair_eval, with);
    const TokenCache tokens = EncodeCatalog(data.catalog, enc.params, with.threads);
    retriever_row(AblationVariant::kFull, seed, enc.params, tokens, RetrieverMode::kEnhanced);
    retriever_row(AblationVariant::kShallow, seed, enc.params, tokens, RetrieverMode::kBaseline);

    EncoderConfig without = with;
    without.include_examples = false;
    const EncoderTrainResult plain =
        TrainEncoder(data.catalog, data.pairs, data.splits.pair_train, data.splits.pair_eval, without);
    const TokenCache plain_tokens = EncodeCatalog(data.catalog, plain.params, without.threads);
    retriever_row(AblationVariant::kNoExamples, seed, plain.params, plain_tokens, RetrieverMode::kEnhanced);
  }
  return report;
}

std::string AblationCsv(const AblationReport& report) {
  std::string out = "variant,seed,accuracy,entropy,exact_set\n";
  char buf[160];
  for (const AblationRow& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%llu,%.6f,%.6f,%.6f\n", VariantName(r.variant).c_str(),
                  static_cast<unsigned long long>(r.seed), r.accuracy, r.entropy, r.exact_set);
    out += buf;
  }
  for (AblationVariant v : kAblationVariants) {
    std::snprintf(buf, sizeof(buf), "%s,mean,%.6f,%.6f,\n", VariantName(v).c_str(), report.MeanAccuracy(v),
                  report.MeanEntropy(v));
    out += buf;
  }
  return out;
}

std::string AblationJson(const AblationReport& report) {
  OrderedJson doc;
  doc["seeds"] = report.seeds;
  OrderedJson variants = OrderedJson::array();
  for (AblationVariant v : kAblationVariants) {
    OrderedJson item;
    item["variant"] = VariantName(v);
    OrderedJson runs = OrderedJson::array();
    for (const AblationRow& r : report.rows)
      if (r.variant == v)
        runs.push_back({{"seed", r.seed}, {"accuracy", r.accuracy}, {"entropy", r.entropy}, {"exact_set", r.exact_set}});
    item["runs"] = std::move(runs);
    item["mean_accuracy"] = report.MeanAccuracy(v);
    item["mean_entropy"] = report.MeanEntropy(v);
    variants.push_back(std::move(item));
  }
  doc["variants"] = std::move(variants);
  doc["ordered_seeds"] = report.OrderedSeeds();
  doc["mean_ordered"] = report.MeanOrdered();
  doc["passes"] = report.Passes();
  return doc.dump(2) + "\n";
}

}  // namespace sheettoken
