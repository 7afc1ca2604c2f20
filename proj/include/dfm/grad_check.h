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

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dfm/tensor.h"

namespace dfm {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::int64_t coordinates = 0;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Compares the tape gradient of the scalar `f` against central differences
// for every coordinate of every tensor in `params`:
//   max |analytic - numeric| / max(1, |analytic|, |numeric|).
// `f` must rebuild its graph from the current parameter values on each call.
// Throws NumericError naming `op_name` if f is non-finite at any probe.
GradCheckResult grad_check(const std::function<Tensor()>& f,
                           std::span<const NamedTensor> params, double eps = 1e-5,
                           const std::string& op_name = "f");

// Single-tensor form; returns the maximum relative error.
double grad_check(const std::function<Tensor()>& f, Tensor theta, double eps = 1e-5,
                  const std::string& op_name = "f");

}  // namespace dfm
