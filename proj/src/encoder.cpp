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
#include "sheettoken/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "binary_io.hpp"
#include "sheettoken/error.hpp"
#include "sheettoken/extract.hpp"
#include "sheettoken/optim.hpp"
#include "sheettoken/rng.hpp"

namespace sheettoken {

namespace {

constexpr char kModelMagic[4] = {'S', 'T', 'E', 'N'};
constexpr std::uint32_t kModelVersion = 1;
constexpr double kNormFloor = 1e-12;
constexpr double kProbFloor = 1e-12;

bool IsWordByte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

Matrix Gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.Normal(0.0, stddev);
  return m;
}

void AddBias(Matrix& m, const Matrix& bias) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) += bias[c];
}

std::vector<double> ProbabilitiesOf(std::span<const double> logits) { return Softmax(logits, 1.0); }

std::vector<double> HeadLogits(std::span<const double> a, std::span<const double> b, const EncoderParams& p) {
  const std::size_t d = a.size();
  Matrix f(1, 4 * d);
  for (std::size_t i = 0; i < d; ++i) {
    f[i] = a[i];
    f[d + i] = b[i];
    f[2 * d + i] = std::abs(a[i] - b[i]);
    f[3 * d + i] = a[i] * b[i];
  }
  Matrix h = MatMul(f, p.head_w1.value);
  AddBias(h, p.head_b1.value);
  for (double& x : h.data()) x = std::tanh(x);
  Matrix out = MatMul(h, p.head_w2.value);
  AddBias(out, p.head_b2.value);
  return {out[0], out[1]};
}

Var HeadLogitsVar(Var a, Var b, EncoderParams& p) {
  Tape& t = *a.tape();
  const Var parts[] = {a, b, Abs(Sub(a, b)), Mul(a, b)};
  Var h = Tanh(AddRow(MatMul(ConcatCols(parts), t.Param(p.head_w1)), t.Param(p.head_b1)));
  return AddRow(MatMul(h, t.Param(p.head_w2)), t.Param(p.head_b2));
}

// Hashed features of every catalog sheet under the config's serialization.
std::unordered_map<SheetId, FeatureBag> CatalogFeatures(const SheetCatalog& catalog, const EncoderConfig& cfg) {
  std::unordered_map<SheetId, FeatureBag> out;
  for (const auto& [id, r] : catalog.records())
    out.emplace(id, HashedFeatures(SerializeRecord(r, cfg.header_cap, cfg.include_examples), cfg.hash_buckets));
  return out;
}

}  // namespace

void ValidateEncoderConfig(const EncoderConfig& cfg) {
  Require(cfg.dim > 0, ErrorCode::kInvalidArgument, "encoder dim must be positive");
  Require(cfg.header_cap >= 1, ErrorCode::kInvalidArgument, "header cap must be at least 1");
  Require(cfg.smoothing >= 0.0 && cfg.smoothing < 1.0, ErrorCode::kInvalidArgument,
          "label smoothing must lie in [0, 1)");
  Require(cfg.hash_buckets > 0 && (cfg.hash_buckets & (cfg.hash_buckets - 1)) == 0, ErrorCode::kInvalidArgument,
          "hash_buckets must be a power of two");
  Require(cfg.learning_rate > 0.0 && std::isfinite(cfg.learning_rate), ErrorCode::kInvalidArgument,
          "learning rate must be positive");
  Require(cfg.momentum >= 0.0 && cfg.momentum < 1.0, ErrorCode::kInvalidArgument, "momentum must lie in [0, 1)");
  Require(cfg.batch_size >= 1, ErrorCode::kInvalidArgument, "batch size must be at least 1");
}

std::string SerializeRecord(const SheetRecord& record, std::size_t header_cap, bool include_examples) {
  Require(header_cap >= 1, ErrorCode::kInvalidArgument, "header cap must be at least 1");
  std::string out = "source: " + Trim(record.source_name) + "; shape: " + std::to_string(record.num_rows) + "x" +
                    std::to_string(record.num_cols) + "; headers: ";
  const std::size_t k = std::min(header_cap, record.columns.size());
  for (std::size_t j = 0; j < k; ++j) {
    if (j > 0) out += " | ";
    out += Trim(record.columns[j].header);
    const std::string example = Trim(record.columns[j].example);
    if (include_examples && !example.empty()) out += " (" + example + ")";
  }
  return out;
}

std::vector<std::string> TokenizeFeatures(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (IsWordByte(c)) {
      cur += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));

  std::vector<std::string> features;
  for (const std::string& w : words) {
    features.push_back("w:" + w);
    const std::string padded = "#" + w + "#";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) features.push_back("c:" + padded.substr(i, 3));
  }
  return features;
}

std::uint32_t HashFeature(std::string_view feature) {
  std::uint32_t h = 2166136261u;
  for (char c : feature) {
    h ^= static_cast<unsigned char>(c);
    h *= 16777619u;
  }
  return h;
}

FeatureBag HashedFeatures(std::string_view text, std::uint32_t buckets) {
  std::map<std::uint32_t, double> counts;
  for (const std::string& f : TokenizeFeatures(text)) counts[HashFeature(f) & (buckets - 1)] += 1.0;
  return FeatureBag(counts.begin(), counts.end());
}

std::vector<Parameter*> EncoderParams::All() {
  return {&embedding, &w1, &b1, &w2, &b2, &head_w1, &head_b1, &head_w2, &head_b2};
}

std::vector<const Parameter*> EncoderParams::All() const {
  return {&embedding, &w1, &b1, &w2, &b2, &head_w1, &head_b1, &head_w2, &head_b2};
}

EncoderParams InitEncoder(const EncoderConfig& cfg, std::uint64_t seed) {
  ValidateEncoderConfig(cfg);
  Rng rng(seed);
  const std::size_t d = cfg.dim;
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  EncoderParams p;
  p.config = cfg;
  p.embedding = Parameter("embedding", Gaussian(cfg.hash_buckets, d, 0.01, rng), true);
  p.w1 = Parameter("proj_w1", Gaussian(d, d, inv, rng));
  p.b1 = Parameter("proj_b1", Matrix(1, d));
  p.w2 = Parameter("proj_w2", Gaussian(d, d, inv, rng));
  p.b2 = Parameter("proj_b2", Matrix(1, d));
  p.head_w1 = Parameter("head_w1", Gaussian(4 * d, d, 0.5 * inv, rng));
  p.head_b1 = Parameter("head_b1", Matrix(1, d));
  p.head_w2 = Parameter("head_w2", Gaussian(d, 2, inv, rng));
  p.head_b2 = Parameter("head_b2", Matrix(1, 2));
  return p;
}

void ValidateEncoderParams(const EncoderParams& p) {
  ValidateEncoderConfig(p.config);
  const std::size_t d = p.config.dim;
  auto check = [](const Parameter& param, std::size_t rows, std::size_t cols) {
    Require(param.value.rows() == rows && param.value.cols() == cols, ErrorCode::kSchema,
            "encoder parameter '" + param.name + "' has shape " + std::to_string(param.value.rows()) + "x" +
                std::to_string(param.value.cols()) + ", expected " + std::to_string(rows) + "x" +
                std::to_string(cols));
    Require(param.value.AllFinite(), ErrorCode::kNumeric, "encoder parameter '" + param.name + "' is not finite");
  };
  check(p.embedding, p.config.hash_buckets, d);
  check(p.w1, d, d);
  check(p.b1, 1, d);
  check(p.w2, d, d);
  check(p.b2, 1, d);
  check(p.head_w1, 4 * d, d);
  check(p.head_b1, 1, d);
  check(p.head_w2, d, 2);
  check(p.head_b2, 1, 2);
}

std::vector<double> EmbedFeatures(const FeatureBag& features, const EncoderParams& p) {
  const std::size_t d = p.config.dim;
  Matrix x(1, d);
  for (const auto& [row, count] : features) {
    Require(row < p.embedding.value.rows(), ErrorCode::kInvalidArgument, "feature bucket out of range");
    auto src = p.embedding.value.row(row);
    for (std::size_t c = 0; c < d; ++c) x[c] += count * src[c];
  }
  Matrix h = MatMul(x, p.w1.value);
  AddBias(h, p.b1.value);
  for (double& v : h.data()) v = std::tanh(v);
  Matrix y = MatMul(h, p.w2.value);
  AddBias(y, p.b2.value);
  const double n = std::max(Norm(y.row(0)), kNormFloor);
  std::vector<double> z(d);
  for (std::size_t c = 0; c < d; ++c) z[c] = y[c] / n;
  return z;
}

std::vector<double> EmbedRecord(const SheetRecord& record, const EncoderParams& p) {
  const std::string text = SerializeRecord(record, p.config.header_cap, p.config.include_examples);
  return EmbedFeatures(HashedFeatures(text, p.config.hash_buckets), p);
}

std::vector<double> EmbedText(std::string_view text, const EncoderParams& p) {
  return EmbedFeatures(HashedFeatures(text, p.config.hash_buckets), p);
}

std::vector<double> PairLogits(std::span<const double> z1, std::span<const double> z2, const EncoderParams& p) {
  Require(z1.size() == p.config.dim && z2.size() == p.config.dim, ErrorCode::kInvalidArgument,
          "pair logits: token dimension mismatch");
  std::vector<double> out = HeadLogits(z1, z2, p);
  if (p.config.symmetric_head) {
    const std::vector<double> swapped = HeadLogits(z2, z1, p);
    for (std::size_t c = 0; c < 2; ++c) out[c] = 0.5 * (out[c] + swapped[c]);
  }
  return out;
}

double SmoothedCrossEntropy(std::span<const double> logits, int label, double alpha) {
  Require(logits.size() == 2, ErrorCode::kInvalidArgument, "smoothed cross-entropy expects two logits");
  Require(label == 0 || label == 1, ErrorCode::kInvalidArgument, "label outside {0,1}");
  Require(alpha >= 0.0 && alpha < 1.0, ErrorCode::kInvalidArgument, "label smoothing must lie in [0, 1)");
  const std::vector<double> prob = ProbabilitiesOf(logits);
  double loss = 0.0;
  for (int c = 0; c < 2; ++c) {
    const double target = (c == label ? 1.0 - alpha : 0.0) + alpha / 2.0;
    loss -= target * std::log(std::clamp(prob[static_cast<std::size_t>(c)], kProbFloor, 1.0));
  }
  return loss;
}

Var EmbedFeaturesVar(Tape& tape, std::span<const FeatureBag* const> bags, EncoderParams& p) {
  Require(!bags.empty(), ErrorCode::kInvalidArgument, "embed: no inputs");
  std::vector<Var> rows;
  rows.reserve(bags.size());
  for (const FeatureBag* bag : bags) rows.push_back(EmbeddingSum(tape, p.embedding, *bag));
  Var x = rows.size() == 1 ? rows[0] : ConcatRows(rows);
  Var h = Tanh(AddRow(MatMul(x, tape.Param(p.w1)), tape.Param(p.b1)));
  return L2NormalizeRows(AddRow(MatMul(h, tape.Param(p.w2)), tape.Param(p.b2)));
}

Var PairLogitsVar(Var z1, Var z2, EncoderParams& p) {
  Require(z1.cols() == p.config.dim && z2.cols() == p.config.dim && z1.rows() == z2.rows(),
          ErrorCode::kInvalidArgument, "pair logits: token shape mismatch");
  Var out = HeadLogitsVar(z1, z2, p);
  if (p.config.symmetric_head) out = Scale(Add(out, HeadLogitsVar(z2, z1, p)), 0.5);
  return out;
}

Var SmoothedCrossEntropyVar(Var logits, std::span<const int> labels, double alpha) {
  Require(logits.cols() == 2 && logits.rows() == labels.size(), ErrorCode::kInvalidArgument,
          "smoothed cross-entropy: logits must be n x 2 for n labels");
  Require(alpha >= 0.0 && alpha < 1.0, ErrorCode::kInvalidArgument, "label smoothing must lie in [0, 1)");
  Matrix target(labels.size(), 2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Require(labels[i] == 0 || labels[i] == 1, ErrorCode::kInvalidArgument, "label outside {0,1}");
    for (int c = 0; c < 2; ++c) target(i, c) = (c == labels[i] ? 1.0 - alpha : 0.0) + alpha / 2.0;
  }
  Var logp = Log(Clamp(SoftmaxRows(logits), kProbFloor, 1.0));
  Var weighted = Mul(logp, logits.tape()->Constant(std::move(target)));
  return Scale(Sum(weighted), -1.0 / static_cast<double>(labels.size()));
}

PairEvaluation EvaluatePairs(const SheetCatalog& catalog, std::span<const PairExample> pairs,
                             std::span<const std::size_t> indices, const EncoderParams& params) {
  Require(!indices.empty(), ErrorCode::kInvalidArgument, "pair evaluation: empty split");
  std::unordered_map<SheetId, std::vector<double>> tokens;
  auto token = [&](SheetId id) -> const std::vector<double>& {
    auto it = tokens.find(id);
    if (it == tokens.end()) it = tokens.emplace(id, EmbedRecord(catalog.at(id), params)).first;
    return it->second;
  };
  std::vector<int> predictions, labels;
  std::vector<double> confidence;
  double loss = 0.0;
  for (std::size_t i : indices) {
    Require(i < pairs.size(), ErrorCode::kInvalidArgument, "pair index out of range");
    const PairExample& p = pairs[i];
    const std::vector<double> logits = PairLogits(token(p.id1), token(p.id2), params);
    const std::vector<double> prob = ProbabilitiesOf(logits);
    predictions.push_back(prob[1] > prob[0] ? 1 : 0);
    labels.push_back(p.label);
    confidence.push_back(std::max(prob[0], prob[1]));
    loss += SmoothedCrossEntropy(logits, p.label, params.config.smoothing);
  }
  PairEvaluation ev;
  ev.accuracy = PairwiseAccuracy(predictions, labels);
  ev.entropy = NormalizedEntropy(confidence);
  ev.loss = loss / static_cast<double>(indices.size());
  return ev;
}

EncoderTrainResult TrainEncoder(const SheetCatalog& catalog, std::span<const PairExample> pairs,
                                std::span<const std::size_t> train, std::span<const std::size_t> eval,
                                const EncoderConfig& cfg) {
  ValidateEncoderConfig(cfg);
  Require(!train.empty() && !eval.empty(), ErrorCode::kInvalidArgument, "encoder training needs non-empty splits");
  for (std::size_t i : train) {
    Require(i < pairs.size(), ErrorCode::kInvalidArgument, "train index out of range");
    Require(catalog.contains(pairs[i].id1) && catalog.contains(pairs[i].id2), ErrorCode::kInvalidArgument,
            "train pair " + std::to_string(i) + " references an unknown sheet");
  }

  EncoderTrainResult result{InitEncoder(cfg, DeriveSeed(cfg.seed, 0)), {}, {}};
  EncoderParams& params = result.params;
  const std::unordered_map<SheetId, FeatureBag> features = CatalogFeatures(catalog, cfg);
  Rng order_rng(DeriveSeed(cfg.seed, 1));
  SgdMomentum optimizer(cfg.momentum);
  std::vector<Parameter*> all = params.All();

  std::vector<std::size_t> order(train.begin(), train.end());
  const std::size_t batches_per_epoch = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches_per_epoch * cfg.epochs;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.Shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      // Embed each distinct sheet of the batch once.
      std::vector<const FeatureBag*> bags;
      std::unordered_map<SheetId, std::size_t> slot;
      std::vector<std::size_t> left, right;
      std::vector<int> labels;
      auto slot_of = [&](SheetId id) {
        auto [it, fresh] = slot.emplace(id, bags.size());
        if (fresh) bags.push_back(&features.at(id));
        return it->second;
      };
      for (std::size_t k = start; k < end; ++k) {
        const PairExample& p = pairs[order[k]];
        left.push_back(slot_of(p.id1));
        right.push_back(slot_of(p.id2));
        labels.push_back(p.label);
      }
      Tape tape;
      Var z = EmbedFeaturesVar(tape, bags, params);
      Var logits = PairLogitsVar(SelectRows(z, left), SelectRows(z, right), params);
      Var loss = SmoothedCrossEntropyVar(logits, labels, cfg.smoothing);
      const double value = loss.scalar();
      Require(std::isfinite(value), ErrorCode::kNumeric,
              "encoder training diverged (non-finite loss) at epoch " + std::to_string(epoch) + ", step " +
                  std::to_string(step));
      tape.Backward(loss);
      tape.ExportGradients();
      optimizer.Step(all, LinearDecay(cfg.learning_rate, step, total_steps));
      ++step;
      epoch_loss += value * static_cast<double>(end - start);
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));

    const PairEvaluation tr = EvaluatePairs(catalog, pairs, train, params);
    const PairEvaluation ev = EvaluatePairs(catalog, pairs, eval, params);
    const int e = static_cast<int>(epoch);
    result.log.push_back({1, "train", tr.accuracy, tr.entropy, e});
    result.log.push_back({1, "eval", ev.accuracy, ev.entropy, e});
  }
  return result;
}

TokenCache EncodeCatalog(const SheetCatalog& catalog, const EncoderParams& params, unsigned threads) {
  ValidateEncoderParams(params);
  const std::vector<SheetId> ids = catalog.ids();
  std::vector<std::vector<double>> tokens(ids.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < ids.size(); i += stride) tokens[i] = EmbedRecord(catalog.at(ids[i]), params);
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(ids.size())));
  if (n == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(work, w, n);
    for (auto& t : pool) t.join();
  }
  TokenCache cache;
  cache.dim = static_cast<std::uint32_t>(params.config.dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<float> v(tokens[i].begin(), tokens[i].end());
    // Renormalize after rounding so the cached token stays unit length.
    double norm = 0.0;
    for (float x : v) norm += static_cast<double>(x) * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (float& x : v) x = static_cast<float>(x / norm);
    cache.entries.emplace(ids[i], std::move(v));
  }
  return cache;
}

std::string EncodeEncoderModel(const EncoderParams& params) {
  ValidateEncoderParams(params);
  const EncoderConfig& c = params.config;
  std::string out(kModelMagic, 4);
  detail::PutU32(out, kModelVersion);
  detail::PutU32(out, static_cast<std::uint32_t>(c.dim));
  detail::PutU32(out, c.hash_buckets);
  detail::PutU32(out, static_cast<std::uint32_t>(c.header_cap));
  detail::PutU32(out, (c.include_examples ? 1u : 0u) | (c.symmetric_head ? 2u : 0u));
  detail::PutF32(out, c.smoothing);
  for (const Parameter* p : params.All()) {
    detail::PutU32(out, static_cast<std::uint32_t>(p->value.rows()));
    detail::PutU32(out, static_cast<std::uint32_t>(p->value.cols()));
    for (double x : p->value.data()) detail::PutF32(out, x);
  }
  return out;
}

EncoderParams DecodeEncoderModel(std::string_view bytes) {
  detail::ByteReader in(bytes, "encoder model");
  Require(in.Raw(4) == std::string_view(kModelMagic, 4), ErrorCode::kFormat, "encoder model: magic mismatch");
  const std::uint32_t version = in.U32();
  Require(version == kModelVersion, ErrorCode::kFormat,
          "encoder model: unsupported version " + std::to_string(version));
  EncoderParams p;
  p.config.dim = in.U32();
  p.config.hash_buckets = in.U32();
  p.config.header_cap = in.U32();
  const std::uint32_t flags = in.U32();
  p.config.include_examples = (flags & 1u) != 0;
  p.config.symmetric_head = (flags & 2u) != 0;
  p.config.smoothing = in.F32();
  ValidateEncoderConfig(p.config);
  const char* names[] = {"embedding", "proj_w1", "proj_b1", "proj_w2", "proj_b2",
                         "head_w1",   "head_b1", "head_w2", "head_b2"};
  std::vector<Parameter*> all = p.All();
  for (std::size_t k = 0; k < all.size(); ++k) {
    const std::uint32_t rows = in.U32(), cols = in.U32();
    Require(static_cast<std::uint64_t>(rows) * cols * 4 <= in.remaining(), ErrorCode::kFormat,
            "encoder model: payload is truncated");
    Matrix m(rows, cols);
    for (double& x : m.data()) x = in.F32();
    *all[k] = Parameter(names[k], std::move(m), k == 0);
  }
  Require(in.done(), ErrorCode::kFormat, "encoder model: trailing bytes");
  ValidateEncoderParams(p);
  return p;
}

void SaveEncoder(const EncoderParams& params, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodeEncoderModel(params));
}

EncoderParams LoadEncoder(const std::filesystem::path& path) { return DecodeEncoderModel(ReadFileBytes(path)); }

}  // namespace sheettoken
