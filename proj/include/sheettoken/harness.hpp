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
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sheettoken/corpus.hpp"
#include "sheettoken/encoder.hpp"
#include "sheettoken/fabricate.hpp"
#include "sheettoken/metrics.hpp"
#include "sheettoken/retriever.hpp"

namespace sheettoken {

// ---- FLOPs accounting ------------------------------------------------------

struct FlopsConfig {
  std::size_t dim = 128;
  // Mean number of distinct hashed features per serialized text.
  std::size_t features_per_text = 256;
  std::size_t candidates = 25;
  std::size_t num_stages = 3;
  std::size_t gcn_layers = 2;
};

struct FlopsEntry {
  std::string part;  // "encoder" or "graph"
  std::string op;
  std::uint64_t flops = 0;
};

struct FlopsEstimate {
  std::string model;
  std::uint64_t encoder_flops = 0;
  std::uint64_t graph_flops = 0;
  std::vector<FlopsEntry> breakdown;
  std::uint64_t total() const { return encoder_flops + graph_flops; }
};

// (a x b) times (b x c).
std::uint64_t MatMulFlops(std::uint64_t a, std::uint64_t b, std::uint64_t c);

// One pairwise sample: two texts through the encoder plus the pair head.
FlopsEstimate EstimateEncoderFlops(const FlopsConfig& cfg);
// One query instance: query and candidate texts through the encoder, then
// channels, composition, propagation, pooling and node scoring.
FlopsEstimate EstimateRetrieverFlops(const FlopsConfig& cfg);
double MeanFeatureCount(const SheetCatalog& catalog, const EncoderConfig& cfg);
std::string FlopsTable(std::span<const FlopsEstimate> estimates);
std::string FlopsJson(std::span<const FlopsEstimate> estimates);

// ---- Run configuration -----------------------------------------------------

struct RunConfig {
  FabricationConfig fabricate;
  EncoderConfig encoder;
  RetrieverConfig retriever;
  FlopsConfig flops;
};

// JSON object with optional "fabricate", "encoder", "retriever" and "flops"
// sections of scalar overrides. Unknown keys are rejected. Empty text gives
// the defaults.
RunConfig ParseRunConfig(std::string_view json_text);

// ---- Fabrication -----------------------------------------------------------

// Reference category counts scaled to `total` templates (largest remainder).
TemplateCounts ScaleTemplateCounts(std::size_t total);

struct FabricationRun {
  FabricatedCorpus corpus;
  CorpusSplits splits;
};

// Templates come from `templates_dir`, or from the bundled generator when it
// is empty. A nonzero `num_templates` limits the positive pairs to that many.
FabricationRun FabricateCorpus(const std::filesystem::path& templates_dir, std::size_t num_templates,
                               const FabricationConfig& cfg);

// ---- Corpus and pipeline ---------------------------------------------------

struct CorpusData {
  SheetCatalog catalog;
  std::vector<PairExample> pairs;
  std::vector<QueryInstance> queries;
  CorpusSplits splits;
};

// sheets.json, train.json, query.json and splits.json of a corpus directory.
CorpusData LoadCorpusData(const std::filesystem::path& dir);
CorpusData ToCorpusData(const FabricationRun& run);
// Bundled templates fabricated with default settings.
CorpusData ReferenceCorpus(std::uint64_t seed = 42);

struct PipelineConfig {
  EncoderConfig encoder;
  RetrieverConfig retriever;
  RetrieverMode mode = RetrieverMode::kEnhanced;
};

struct PipelineResult {
  EncoderTrainResult encoder;
  TokenCache tokens;
  RetrieverTrainResult retriever;
};

PipelineResult RunPipeline(const CorpusData& data, const PipelineConfig& cfg);

// Stage 1 metrics of a pair split.
MetricReport EvaluateStage1(const CorpusData& data, const EncoderParams& encoder, std::span<const std::size_t> split,
                            const std::string& split_name);
// Stage 2 metrics of a query split.
ListwiseScore EvaluateStage2(const CorpusData& data, const TokenCache& tokens, const EncoderParams& encoder,
                             const RetrieverParams& retriever, std::span<const std::size_t> split,
                             unsigned threads = 1);
// Fixed-width table of metric rows.
std::string MetricTable(std::span<const MetricReport> rows);

// Externally computed embeddings: one "sheet_id,v_1,...,v_d" line per sheet.
// Vectors are L2-normalized on import.
TokenCache ImportEmbeddings(const std::filesystem::path& csv, const SheetCatalog& catalog);

// ---- Ablations -------------------------------------------------------------

enum class AblationVariant { kFull, kShallow, kNoExamples };
inline constexpr AblationVariant kAblationVariants[] = {AblationVariant::kFull, AblationVariant::kShallow,
                                                        AblationVariant::kNoExamples};
std::string VariantName(AblationVariant v);

struct AblationRow {
  AblationVariant variant = AblationVariant::kFull;
  std::uint64_t seed = 0;
  double accuracy = 0.0;  // final-epoch held-out listwise accuracy
  double entropy = 0.0;
  double exact_set = 0.0;
};

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;  // seed-major, variants in declaration order

  double MeanAccuracy(AblationVariant v) const;
  double MeanEntropy(AblationVariant v) const;
  double Accuracy(AblationVariant v, std::uint64_t seed) const;
  // Seeds on which full >= shallow >= w/o examples.
  std::size_t OrderedSeeds() const;
  bool MeanOrdered() const;
  // Mean ordering holds and per-seed ordering holds on at least 4/5 of seeds.
  bool Passes() const;
};

using ProgressFn = std::function<void(const std::string&)>;

AblationReport RunAblations(const CorpusData& data, std::span<const std::uint64_t> seeds, const PipelineConfig& base,
                            const ProgressFn& progress = {});
std::string AblationCsv(const AblationReport& report);
std::string AblationJson(const AblationReport& report);

}  // namespace sheettoken
