// Copyright (c) 2026 The dfmamba Authors. All Rights Reserved.
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

#include "dfm/grad_check.h"

#include <algorithm>
#include <cmath>

#include "dfm/error.h"
#include "dfm/tape.h"

namespace dfm {

namespace {

double evaluate(const std::function<Tensor()>& f, const std::string& op_name) {
  NoGrad no_grad;
  Tensor y = f();
  DFM_CHECK(y.numel() == 1, "grad_check: ", op_name, " must return a scalar");
  const double v = y.item();
  if (!std::isfinite(v))
    throw NumericError("grad_check: " + op_name + " is not finite at a probe point");
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f,
                           std::span<const NamedTensor> params, double eps,
                           const std::string& op_name) {
  DFM_CHECK(eps > 0.0, "grad_check: eps must be positive");
  std::vector<Tensor> theta;
  std::vector<bool> previously_required;
  for (const auto& p : params) {
    theta.push_back(p.tensor);
    previously_required.push_back(p.tensor.requires_grad());
    theta.back().set_requires_grad(true);
    theta.back().zero_grad();
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor y = f();
    DFM_CHECK(y.numel() == 1, "grad_check: ", op_name, " must return a scalar");
    if (!std::isfinite(y.item()))
      throw NumericError("grad_check: " + op_name + " is not finite at theta");
    tape.backward(y);
  }
  for (auto& t : theta) {
    auto g = t.grad_tensor();
    analytic.emplace_back(g.data().begin(), g.data().end());
    t.zero_grad();
  }

  GradCheckResult result;
  for (std::size_t p = 0; p < theta.size(); ++p) {
    auto values = theta[p].data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = evaluate(f, op_name);
      values[i] = saved - eps;
      const double down = evaluate(f, op_name);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p][i];
      const double rel = std::fabs(a - numeric) /
                         std::max({1.0, std::fabs(a), std::fabs(numeric)});
      ++result.coordinates;
      if (rel > result.max_rel_error || result.worst_index < 0) {
        result.max_rel_error = rel;
        result.worst_param = params[p].name;
        result.worst_index = static_cast<std::int64_t>(i);
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
    theta[p].set_requires_grad(previously_required[p]);
  }
  return result;
}

double grad_check(const std::function<Tensor()>& f, Tensor theta, double eps,
                  const std::string& op_name) {
  NamedTensor p{"theta", theta};
  return grad_check(f, std::span<const NamedTensor>(&p, 1), eps, op_name).max_rel_error;
}

}  // namespace dfm
