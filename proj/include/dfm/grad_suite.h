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

// Finite-difference suite over every differentiable primitive and block.
// Each case reduces its output to a scalar with a fixed random projection
// and checks the tape gradient of every input and parameter.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfm/backbone.h"
#include "dfm/grad_check.h"

namespace dfm {

struct GradSuiteEntry {
  std::string name;
  GradCheckResult result;
};

// Primitive operations (elementwise, reductions, convolution, resize,
// normalization, softmax, scan, sampling).
std::vector<GradSuiteEntry> run_op_grad_suite(std::uint64_t seed, double eps = 1e-5);

// Blocks: stem, conv, gated, ssm and dssm mixers (every anchor variant,
// selective and static), FFN, downsample, heatmap head and the training
// loss. Block widths come from `spec` (capped for speed); only mixer kinds
// are varied, so every kind is checked whatever the stage string.
std::vector<GradSuiteEntry> run_block_grad_suite(const ArchSpec& spec, std::uint64_t seed,
                                                 double eps = 1e-5);

}  // namespace dfm
