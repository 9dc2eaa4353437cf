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

#include <span>
#include <unordered_map>

#include "sheettoken/tape.hpp"

namespace sheettoken {

// SGD with heavy-ball momentum. Row-sparse parameters keep per-row velocity
// that only advances on steps where the row received a gradient.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}

  // Applies one update from Parameter::grad / sparse_grad, then clears them.
  void Step(std::span<Parameter* const> params, double learning_rate);

 private:
  double momentum_;
  std::unordered_map<const Parameter*, Matrix> velocity_;
};

// Linear decay from `base` at step 0 to zero after `total` steps.
double LinearDecay(double base, std::size_t step, std::size_t total);

}  // namespace sheettoken
