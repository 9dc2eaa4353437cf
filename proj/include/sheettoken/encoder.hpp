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
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sheettoken/corpus.hpp"
#include "sheettoken/metrics.hpp"
#include "sheettoken/tape.hpp"

namespace sheettoken {

struct EncoderConfig {
  std::size_t dim = 128;
  std::size_t header_cap = 12;
  double smoothing = 0.1;
  std::uint32_t hash_buckets = 1u << 16;
  bool include_examples = true;
  // Average the pair head over both input orders.
  bool symmetric_head = false;

  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  unsigned threads = 1;
};

void ValidateEncoderConfig(const EncoderConfig& cfg);

// "source: <name>; shape: <R>x<C>; headers: h_1 (e_1) | ... | h_k (e_k)".
// Strings are trimmed; a header with an empty example is written bare.
std::string SerializeRecord(const SheetRecord& record, std::size_t header_cap, bool include_examples);

// Lowercased word unigrams and "#word#" character trigrams of `text`.
std::vector<std::string> TokenizeFeatures(std::string_view text);
std::uint32_t HashFeature(std::string_view feature);
// (bucket, count) pairs sorted by bucket.
using FeatureBag = std::vector<std::pair<std::uint32_t, double>>;
FeatureBag HashedFeatures(std::string_view text, std::uint32_t buckets);

struct EncoderParams {
  EncoderConfig config;
  Parameter embedding;  // buckets x d, row-sparse
  Parameter w1, b1, w2, b2;
  Parameter head_w1, head_b1, head_w2, head_b2;

  EncoderParams() = default;
  EncoderParams(const EncoderParams&) = delete;
  EncoderParams& operator=(const EncoderParams&) = delete;
  EncoderParams(EncoderParams&&) = default;
  EncoderParams& operator=(EncoderParams&&) = default;

  std::vector<Parameter*> All();
  std::vector<const Parameter*> All() const;
};

EncoderParams InitEncoder(const EncoderConfig& cfg, std::uint64_t seed);
void ValidateEncoderParams(const EncoderParams& params);

// Sheet Token of a feature bag: L2-normalized projection of the summed
// bucket embeddings.
std::vector<double> EmbedFeatures(const FeatureBag& features, const EncoderParams& params);
std::vector<double> EmbedRecord(const SheetRecord& record, const EncoderParams& params);
// Raw text (no template), used for queries.
std::vector<double> EmbedText(std::string_view text, const EncoderParams& params);

// Logits [non-match, match] for two tokens.
std::vector<double> PairLogits(std::span<const double> z1, std::span<const double> z2,
                               const EncoderParams& params);
// Label-smoothed cross-entropy over two classes, probabilities clamped at 1e-12.
double SmoothedCrossEntropy(std::span<const double> logits, int label, double alpha);

// Differentiable counterparts. Tokens are rows of an n x d node.
Var EmbedFeaturesVar(Tape& tape, std::span<const FeatureBag* const> bags, EncoderParams& params);
Var PairLogitsVar(Var z1, Var z2, EncoderParams& params);
// Mean smoothed cross-entropy of an n x 2 logit node against n labels.
Var SmoothedCrossEntropyVar(Var logits, std::span<const int> labels, double alpha);

struct EncoderTrainResult {
  EncoderParams params;
  std::vector<MetricReport> log;  // stage 1, train and eval rows per epoch
  std::vector<double> epoch_loss;
};

struct PairEvaluation {
  double accuracy = 0.0;
  double entropy = 0.0;
  double loss = 0.0;
};

PairEvaluation EvaluatePairs(const SheetCatalog& catalog, std::span<const PairExample> pairs,
                             std::span<const std::size_t> indices, const EncoderParams& params);

EncoderTrainResult TrainEncoder(const SheetCatalog& catalog, std::span<const PairExample> pairs,
                                std::span<const std::size_t> train, std::span<const std::size_t> eval,
                                const EncoderConfig& cfg);

// One token per catalog sheet, in sheet_id order. Output does not depend on
// `threads`.
TokenCache EncodeCatalog(const SheetCatalog& catalog, const EncoderParams& params, unsigned threads = 1);

// Versioned binary model ("STEN"), parameters packed as f32 little-endian.
std::string EncodeEncoderModel(const EncoderParams& params);
EncoderParams DecodeEncoderModel(std::string_view bytes);
void SaveEncoder(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams LoadEncoder(const std::filesystem::path& path);

}  // namespace sheettoken
