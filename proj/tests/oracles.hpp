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

// Random workspaces and independent reference evaluations shared by the unit
// tests and the acceptance runner. Nothing here calls the code under test
// except where a function name says so.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "sheettoken/encoder.hpp"
#include "sheettoken/matrix.hpp"
#include "sheettoken/retriever.hpp"
#include "sheettoken/rng.hpp"

namespace sheettoken::testing {

inline std::vector<double> RandomUnit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double n = 0.0;
  for (double& x : v) {
    x = rng.Normal();
    n += x * x;
  }
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

// m candidates in dimension d. Positives and negatives alternate so both
// sets are non-empty whenever m >= 2.
inline Workspace RandomWorkspace(Rng& rng, std::size_t m, std::size_t d) {
  static const char* kWords[] = {"date", "amount", "region", "total", "qty", "price", "name", "code"};
  Workspace ws;
  ws.query = RandomUnit(rng, d);
  ws.nodes = Matrix(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    const auto z = RandomUnit(rng, d);
    std::copy(z.begin(), z.end(), ws.nodes.row(i).begin());
    ws.ids.push_back(static_cast<SheetId>(10 * i + rng.Below(10)));
    SheetRecord r;
    r.sheet_id = ws.ids.back();
    r.source_name = "book" + std::to_string(i) + ".xlsx::s";
    r.num_rows = static_cast<std::uint32_t>(1 + rng.Below(200));
    r.num_cols = static_cast<std::uint32_t>(1 + rng.Below(9));
    for (std::uint32_t c = 0; c < r.num_cols; ++c) r.columns.push_back({kWords[rng.Below(8)], ""});
    ws.records.push_back(std::move(r));
    ws.labels.push_back(static_cast<int>(i % 2 == 0));
  }
  return ws;
}

inline Matrix RandomMatrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& x : m.data()) x = scale * rng.Normal();
  return m;
}

// Channel entries in [0,1] with unit diagonals.
inline AdjacencyChannels RandomChannels(Rng& rng, std::size_t m) {
  AdjacencyChannels ch(kNumChannels, Matrix(m, m));
  for (Matrix& a : ch)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) a(i, j) = i == j ? 1.0 : rng.Uniform();
  return ch;
}

// Direct evaluation of prod_t sum_k pi_k^(t) A^(k) with explicit loops.
inline Matrix BruteForceCompose(const AdjacencyChannels& ch, const Matrix& logits) {
  const std::size_t m = ch[0].rows();
  std::vector<std::vector<double>> acc(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) acc[i][i] = 1.0;
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    double top = -INFINITY;
    for (std::size_t k = 0; k < logits.cols(); ++k) top = std::max(top, logits(t, k));
    std::vector<double> pi(logits.cols());
    double z = 0.0;
    for (std::size_t k = 0; k < logits.cols(); ++k) z += pi[k] = std::exp(logits(t, k) - top);
    for (double& p : pi) p /= z;
    std::vector<std::vector<double>> mix(m, std::vector<double>(m, 0.0));
    for (std::size_t k = 0; k < ch.size(); ++k)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) mix[i][j] += pi[k] * ch[k](i, j);
    std::vector<std::vector<double>> next(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t l = 0; l < m; ++l) next[i][j] += acc[i][l] * mix[l][j];
    acc = std::move(next);
  }
  Matrix out(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = acc[i][j];
  return out;
}

// Retriever parameters with every leaf randomized, so no gradient is
// structurally zero.
inline RetrieverParams RandomRetriever(Rng& rng, std::size_t d, std::size_t stages) {
  RetrieverConfig cfg;
  cfg.num_stages = stages;
  cfg.init_noise = 0.3;
  RetrieverParams p = InitRetriever(cfg, d, rng.NextU64());
  p.stage_logits.value = RandomMatrix(rng, stages, kNumChannels);
  p.head_b1.value = RandomMatrix(rng, 1, d, 0.3);
  p.head_b2.value = RandomMatrix(rng, 1, 1, 0.3);
  return p;
}

// Worst relative error between the tape gradient of the composite loss and
// central differences, over all leaves, for a batch of two 6-node workspaces.
inline GradCheckResult RetrieverGradientCheck(std::uint64_t seed, double step = 1e-5) {
  Rng rng(seed);
  const std::size_t d = 4;
  RetrieverParams p = RandomRetriever(rng, d, 1 + seed % 3);
  const Workspace a = RandomWorkspace(rng, 6, d);
  const Workspace b = RandomWorkspace(rng, 6, d);
  const AdjacencyChannels ca = BuildChannels(a), cb = BuildChannels(b);
  const Workspace* batch[] = {&a, &b};
  const AdjacencyChannels* chans[] = {&ca, &cb};
  auto loss = [&](Tape& t) { return BatchLossVar(t, batch, chans, p); };
  Tape tape;
  Var l = loss(tape);
  tape.Backward(l);
  tape.ExportGradients();
  std::vector<std::vector<double>> analytic;
  for (Parameter* q : p.All()) analytic.push_back(GradientOf(*q));
  return CompareWithFiniteDifferences(
      p.All(), analytic,
      [&] {
        Tape t;
        return loss(t).scalar();
      },
      step);
}

// Same check for the pair encoder: two pairs through the tape, smoothed
// cross-entropy, every leaf. Even seeds use the symmetric head.
inline GradCheckResult EncoderGradientCheck(std::uint64_t seed, double step = 1e-5) {
  EncoderConfig cfg;
  cfg.dim = 5;
  cfg.hash_buckets = 64;
  cfg.header_cap = 4;
  cfg.symmetric_head = seed % 2 == 0;
  EncoderParams p = InitEncoder(cfg, seed);
  // Larger embeddings keep the tanh layer away from its linear regime.
  Rng rng(seed + 100);
  for (double& x : p.embedding.value.data()) x = rng.Normal(0.0, 0.5);
  const std::vector<FeatureBag> bags = {HashedFeatures("revenue fy2023 acme", cfg.hash_buckets),
                                        HashedFeatures("acme revenue", cfg.hash_buckets),
                                        HashedFeatures("movie review text", cfg.hash_buckets),
                                        HashedFeatures("close open index", cfg.hash_buckets)};
  const std::vector<int> labels = {1, 0};
  auto build = [&](Tape& t) {
    const FeatureBag* left[] = {&bags[0], &bags[2]};
    const FeatureBag* right[] = {&bags[1], &bags[3]};
    Var z1 = EmbedFeaturesVar(t, left, p);
    Var z2 = EmbedFeaturesVar(t, right, p);
    return SmoothedCrossEntropyVar(PairLogitsVar(z1, z2, p), labels, 0.1);
  };
  Tape tape;
  Var loss = build(tape);
  tape.Backward(loss);
  tape.ExportGradients();
  std::vector<std::vector<double>> analytic;
  for (Parameter* q : p.All()) analytic.push_back(GradientOf(*q));
  return CompareWithFiniteDifferences(
      p.All(), analytic,
      [&] {
        Tape t;
        return build(t).scalar();
      },
      step);
}

inline std::vector<std::size_t> RandomPermutation(Rng& rng, std::size_t m) {
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.Shuffle(perm);
  return perm;
}

struct PermutationGap {
  double loss = 0.0;    // largest change of any loss term
  double output = 0.0;  // largest mismatch of permuted y_hat or beta
};

// One random workspace scored before and after shuffling its candidates,
// batched next to a second fixed workspace.
inline PermutationGap PermutationTrial(Rng& rng) {
  const std::size_t m = 2 + rng.Below(7);
  RetrieverParams p = RandomRetriever(rng, 4, 1 + rng.Below(3));
  const Workspace a = RandomWorkspace(rng, m, 4);
  const Workspace b = RandomWorkspace(rng, 2 + rng.Below(5), 4);
  const auto perm = RandomPermutation(rng, m);
  const Workspace pa = PermuteWorkspace(a, perm);
  auto parts_of = [&](const Workspace& x) {
    const AdjacencyChannels cx = BuildChannels(x), cb = BuildChannels(b);
    const Workspace* batch[] = {&x, &b};
    const AdjacencyChannels* chans[] = {&cx, &cb};
    Tape t;
    BatchLoss parts;
    BatchLossVar(t, batch, chans, p, &parts);
    return parts;
  };
  const BatchLoss l0 = parts_of(a), l1 = parts_of(pa);
  PermutationGap gap;
  gap.loss = std::max({std::abs(l0.retrieval - l1.retrieval), std::abs(l0.alignment - l1.alignment),
                       std::abs(l0.node - l1.node), std::abs(l0.total - l1.total)});
  const RetrievalResult r0 = ScoreWorkspace(a, p), r1 = ScoreWorkspace(pa, p);
  for (std::size_t i = 0; i < m; ++i) {
    gap.output = std::max(gap.output, std::abs(r1.scores[i] - r0.scores[perm[i]]));
    gap.output = std::max(gap.output, std::abs(r1.beta[i] - r0.beta[perm[i]]));
  }
  return gap;
}

}  // namespace sheettoken::testing
