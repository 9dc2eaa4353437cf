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
#include <span>
#include <string>
#include <vector>

#include "sheettoken/corpus.hpp"

namespace sheettoken {

struct MetricReport {
  int stage = 1;
  std::string split;  // "train" or "eval"
  double accuracy = 0.0;
  double entropy = 0.0;
  int epoch = 0;
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

double PairwiseAccuracy(std::span<const int> predictions, std::span<const int> labels);

// Binary entropy H(p) / ln 2 with p clamped to [1e-12, 1 - 1e-12].
double BinaryEntropy(double p);
double NormalizedEntropy(std::span<const double> probabilities);

// Scored candidates of one query. `scores` are the node probabilities y_hat,
// aligned with `candidates`.
struct RetrievalResult {
  std::vector<SheetId> candidates;
  std::vector<double> scores;
  std::vector<double> beta;        // pooling weights, aligned with candidates
  std::vector<double> set_vector;  // z_set
  // Candidate positions by descending score, ties by ascending sheet_id.
  std::vector<std::size_t> ranking;
  std::vector<bool> selected;
};

struct ListwiseScore {
  double accuracy = 0.0;    // over all candidate decisions
  double exact_set = 0.0;   // fraction of queries partitioned perfectly
  double entropy = 0.0;
  std::size_t decisions = 0;
};

ListwiseScore ListwiseAccuracy(std::span<const RetrievalResult> results,
                               std::span<const QueryInstance> instances, double threshold = 0.5);

// "epoch,split,accuracy,entropy" rows.
std::string TrainLogCsv(std::span<const MetricReport> rows);

}  // namespace sheettoken
