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
#include "sheettoken/optim.hpp"

#include <algorithm>

#include "sheettoken/error.hpp"

namespace sheettoken {

void SgdMomentum::Step(std::span<Parameter* const> params, double learning_rate) {
  for (Parameter* p : params) {
    Matrix& v = velocity_[p];
    if (v.empty()) v = Matrix(p->value.rows(), p->value.cols());
    if (p->row_sparse) {
      for (auto& [row, g] : p->sparse_grad) {
        auto vel = v.row(row);
        auto val = p->value.row(row);
        for (std::size_t c = 0; c < g.size(); ++c) {
          vel[c] = momentum_ * vel[c] + g[c];
          val[c] -= learning_rate * vel[c];
        }
      }
      p->sparse_grad.clear();
      continue;
    }
    if (p->grad.empty()) continue;
    Require(p->grad.rows() == p->value.rows() && p->grad.cols() == p->value.cols(), ErrorCode::kInternal,
            "gradient shape mismatch for '" + p->name + "'");
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = momentum_ * v[i] + p->grad[i];
      p->value[i] -= learning_rate * v[i];
    }
    p->grad = Matrix();
  }
}

double LinearDecay(double base, std::size_t step, std::size_t total) {
  if (total == 0) return base;
  const double frac = static_cast<double>(step) / static_cast<double>(total);
  return base * (1.0 - std::min(frac, 1.0));
}

}  // namespace sheettoken
