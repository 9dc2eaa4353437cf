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

// Central finite-difference oracle used by the gradient tests. It only ever
// evaluates the forward value of the loss.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sheettoken/tape.hpp"

namespace sheettoken::testing {

struct GradCheckResult {
  double worst_rel_err = 0.0;
  std::string worst_param;
};

inline double RelErr(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
}

// `loss` must rebuild the computation from the current parameter values and
// return the scalar loss. `analytic` holds the gradient per parameter, in the
// same order as `params`, flattened row-major.
inline GradCheckResult CompareWithFiniteDifferences(
    const std::vector<Parameter*>& params, const std::vector<std::vector<double>>& analytic,
    const std::function<double()>& loss, double step = 1e-5) {
  GradCheckResult res;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& v = params[p]->value;
    std::vector<double> numeric(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + step;
      const double up = loss();
      v[i] = keep - step;
      const double down = loss();
      v[i] = keep;
      numeric[i] = (up - down) / (2.0 * step);
    }
    const double err = RelErr(analytic[p], numeric);
    if (err > res.worst_rel_err) {
      res.worst_rel_err = err;
      res.worst_param = params[p]->name;
    }
  }
  return res;
}

inline std::vector<double> Flatten(const Matrix& m) {
  return std::vector<double>(m.data().begin(), m.data().end());
}

// Dense view of a parameter's gradient, including row-sparse tables.
inline std::vector<double> GradientOf(const Parameter& p) {
  if (!p.row_sparse) return Flatten(p.grad);
  std::vector<double> g(p.value.size(), 0.0);
  for (const auto& [row, vals] : p.sparse_grad)
    for (std::size_t c = 0; c < vals.size(); ++c) g[row * p.value.cols() + c] = vals[c];
  return g;
}

}  // namespace sheettoken::testing
