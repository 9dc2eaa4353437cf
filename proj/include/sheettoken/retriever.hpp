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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sheettoken/corpus.hpp"
#include "sheettoken/encoder.hpp"
#include "sheettoken/metrics.hpp"
#include "sheettoken/tape.hpp"

namespace sheettoken {

inline constexpr std::size_t kNumChannels = 4;
enum Channel : std::size_t { kSemantic = 0, kQuery = 1, kSchema = 2, kShape = 3 };

enum class RetrieverMode { kEnhanced, kBaseline };

struct RetrieverConfig {
  std::size_t num_stages = 3;  // forced to 2 in baseline mode
  std::size_t gcn_layers = 2;
  double tau_pool = 1.0;
  double tau_ret = 0.1;
  double lambda_align = 0.5;
  double lambda_node = 1.0;
  // Include each query's own negative-set pooling among its contrastive
  // negatives, next to the in-batch positives of the other queries.
  bool own_negative_set = true;

  double learning_rate = 0.1;
  double momentum = 0.9;
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  double init_noise = 0.01;
  std::uint64_t seed = 42;
  unsigned threads = 1;
};

void ValidateRetrieverConfig(const RetrieverConfig& cfg);
// The config with the stage count the mode implies.
RetrieverConfig ConfigForMode(RetrieverConfig cfg, RetrieverMode mode);

struct Workspace {
  std::vector<double> query;          // z_q, unit norm
  Matrix nodes;                       // H^(0), m x d, unit-norm rows
  std::vector<SheetId> ids;           // candidate sheet ids, row order of `nodes`
  std::vector<SheetRecord> records;   // for the schema and shape channels
  std::vector<int> labels;            // optional, 1 = positive
  std::size_t size() const { return ids.size(); }
};

void ValidateWorkspace(const Workspace& ws);
// Same workspace with rows reordered: row i of the result is row perm[i].
Workspace PermuteWorkspace(const Workspace& ws, std::span<const std::size_t> perm);

using AdjacencyChannels = std::vector<Matrix>;  // [semantic, query, schema, shape]

AdjacencyChannels BuildChannels(const Workspace& ws);
// Lowercased alphanumeric tokens of all headers of a record.
std::vector<std::string> HeaderTokens(const SheetRecord& record);
double Jaccard(std::span<const std::string> a, std::span<const std::string> b);
double ShapeAffinity(std::size_t rows_a, std::size_t cols_a, std::size_t rows_b, std::size_t cols_b);

struct RetrieverParams {
  RetrieverConfig config;
  std::size_t dim = 0;
  Parameter stage_logits;       // T x K
  std::vector<Parameter> gcn;   // L_g matrices, d x d
  Parameter head_w1, head_b1;   // 2d x d, 1 x d
  Parameter head_w2, head_b2;   // d x 1, 1 x 1

  RetrieverParams() = default;
  RetrieverParams(const RetrieverParams&) = delete;
  RetrieverParams& operator=(const RetrieverParams&) = delete;
  RetrieverParams(RetrieverParams&&) = default;
  RetrieverParams& operator=(RetrieverParams&&) = default;

  std::vector<Parameter*> All();
  std::vector<const Parameter*> All() const;
  std::size_t num_stages() const { return stage_logits.value.rows(); }
};

RetrieverParams InitRetriever(const RetrieverConfig& cfg, std::size_t dim, std::uint64_t seed);
void ValidateRetrieverParams(const RetrieverParams& params);

// Product over stages of the softmax-mixed channels.
Matrix ComposeAdjacency(const AdjacencyChannels& channels, const Matrix& stage_logits);
// row_normalize(row_normalize(A_comp) + I).
Matrix NormalizedAdjacency(const Matrix& composed);
// H^(L) from H^(0) with ReLU graph convolutions.
Matrix Propagate(const Matrix& normalized, const Matrix& nodes, std::span<const Matrix> weights);

struct Pooling {
  std::vector<double> beta;
  std::vector<double> set_vector;
};
Pooling Pool(std::span<const double> query, const Matrix& refined, double tau_pool);

// Loss terms on plain values.
double RetrievalLoss(std::span<const double> query, std::span<const std::vector<double>> sets,
                     std::size_t positive, double tau_ret);
double AlignmentLoss(std::span<const double> query, const Matrix& refined, std::span<const std::size_t> positives,
                     std::span<const std::size_t> negatives);
double NodeLoss(std::span<const double> probabilities, std::span<const int> labels);
double TotalLoss(double retrieval, double alignment, double node, const RetrieverConfig& cfg);

// Differentiable forward pass over one workspace.
struct ForwardVars {
  Var composed;    // A_comp
  Var normalized;  // A_bar
  Var refined;     // H^(L)
  Var beta;        // 1 x m
  Var set_vector;  // 1 x d
  Var node_probs;  // m x 1
};
ForwardVars ForwardVar(Tape& tape, const Workspace& ws, const AdjacencyChannels& channels, RetrieverParams& params);
// Pooled set vector over a subset of rows of `refined`.
Var PoolSubsetVar(Var query, Var refined, std::span<const std::size_t> rows, double tau_pool);
Var RetrievalLossVar(Var query, std::span<const Var> sets, std::size_t positive, double tau_ret);
Var AlignmentLossVar(Var query, Var refined, std::span<const std::size_t> positives,
                     std::span<const std::size_t> negatives);
Var NodeLossVar(Var node_probs, std::span<const int> labels);

struct BatchLoss {
  double total = 0.0, retrieval = 0.0, alignment = 0.0, node = 0.0;
};
// Mean composite loss over a batch of labelled workspaces; records on `tape`
// and returns the scalar loss node.
Var BatchLossVar(Tape& tape, std::span<const Workspace* const> batch,
                 std::span<const AdjacencyChannels* const> channels, RetrieverParams& params,
                 BatchLoss* parts = nullptr);

// Scores every candidate of a workspace. Ranking is by descending score with
// ties broken by ascending sheet id; `selected` marks y_hat >= threshold, or
// the first top_k of the ranking when top_k is set.
RetrievalResult ScoreWorkspace(const Workspace& ws, const RetrieverParams& params, double threshold = 0.5,
                               std::optional<std::size_t> top_k = std::nullopt);

// Workspace of a labelled query: candidates are positives and negatives in
// ascending sheet-id order.
Workspace MakeWorkspace(const QueryInstance& query, std::span<const double> query_vec, const SheetCatalog& catalog,
                        const TokenCache& tokens);
// Unlabelled workspace over the given candidates (all catalog sheets when
// empty).
Workspace MakeWorkspace(std::span<const double> query_vec, const SheetCatalog& catalog, const TokenCache& tokens,
                        std::span<const SheetId> candidates = {});

struct RetrieverTrainResult {
  RetrieverParams params;
  std::vector<MetricReport> log;  // stage 2, train and eval rows per epoch
  std::vector<double> epoch_loss;
};

ListwiseScore EvaluateQueries(std::span<const Workspace> workspaces, std::span<const QueryInstance> queries,
                              const RetrieverParams& params, unsigned threads = 1);

// Query vectors come from the frozen encoder; tokens are never updated.
RetrieverTrainResult TrainRetriever(const SheetCatalog& catalog, const TokenCache& tokens,
                                    const EncoderParams& encoder, std::span<const QueryInstance> queries,
                                    std::span<const std::size_t> train, std::span<const std::size_t> eval,
                                    const RetrieverConfig& cfg);

RetrievalResult Retrieve(std::string_view query_text, const SheetCatalog& catalog, const TokenCache& tokens,
                         const EncoderParams& encoder, const RetrieverParams& params,
                         std::span<const SheetId> candidates = {}, double threshold = 0.5,
                         std::optional<std::size_t> top_k = std::nullopt);

// Versioned binary model ("STRT"), f32 little-endian like the token cache.
std::string EncodeRetrieverModel(const RetrieverParams& params);
RetrieverParams DecodeRetrieverModel(std::string_view bytes);
void SaveRetriever(const RetrieverParams& params, const std::filesystem::path& path);
RetrieverParams LoadRetriever(const std::filesystem::path& path);

}  // namespace sheettoken
