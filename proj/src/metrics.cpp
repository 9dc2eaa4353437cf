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
#include "sheettoken/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "sheettoken/error.hpp"

namespace sheettoken {

double PairwiseAccuracy(std::span<const int> predictions, std::span<const int> labels) {
  Require(predictions.size() == labels.size(), ErrorCode::kInvalidArgument,
          "pairwise accuracy: prediction and label counts differ");
  Require(!labels.empty(), ErrorCode::kInvalidArgument, "pairwise accuracy: no predictions");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double BinaryEntropy(double p) {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return (-p * std::log(p) - (1.0 - p) * std::log(1.0 - p)) / std::log(2.0);
}

double NormalizedEntropy(std::span<const double> probabilities) {
  if (probabilities.empty()) return 0.0;
  double total = 0.0;
  for (double p : probabilities) total += BinaryEntropy(p);
  return total / static_cast<double>(probabilities.size());
}

ListwiseScore ListwiseAccuracy(std::span<const RetrievalResult> results,
                               std::span<const QueryInstance> instances, double threshold) {
  Require(results.size() == instances.size(), ErrorCode::kInvalidArgument,
          "listwise accuracy: result and query counts differ");
  Require(!instances.empty(), ErrorCode::kInvalidArgument, "listwise accuracy: no queries");
  ListwiseScore s;
  std::size_t hit = 0, exact = 0;
  double entropy = 0.0;
  for (std::size_t q = 0; q < instances.size(); ++q) {
    const RetrievalResult& r = results[q];
    const QueryInstance& inst = instances[q];
    Require(r.candidates.size() == r.scores.size(), ErrorCode::kInvalidArgument,
            "listwise accuracy: candidate and score counts differ");
    const std::set<SheetId> pos(inst.positives.begin(), inst.positives.end());
    std::set<SheetId> expected(pos);
    expected.insert(inst.negatives.begin(), inst.negatives.end());
    const std::set<SheetId> got(r.candidates.begin(), r.candidates.end());
    Require(got == expected && got.size() == r.candidates.size(), ErrorCode::kInvalidArgument,
            "listwise accuracy: candidates of query " + std::to_string(q) + " do not match its workspace");
    bool all = true;
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
      const bool ok = (r.scores[i] >= threshold) == (pos.count(r.candidates[i]) > 0);
      hit += ok;
      all = all && ok;
      entropy += BinaryEntropy(r.scores[i]);
    }
    exact += all;
    s.decisions += r.candidates.size();
  }
  s.accuracy = static_cast<double>(hit) / static_cast<double>(s.decisions);
  s.exact_set = static_cast<double>(exact) / static_cast<double>(instances.size());
  s.entropy = entropy / static_cast<double>(s.decisions);
  return s;
}

std::string TrainLogCsv(std::span<const MetricReport> rows) {
  std::string out = "epoch,split,accuracy,entropy\n";
  char buf[128];
  for (const MetricReport& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f\n", r.epoch, r.split.c_str(), r.accuracy, r.entropy);
    out += buf;
  }
  return out;
}

}  // namespace sheettoken
