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

#include "dfm/tape.h"

#include <algorithm>

#include "dfm/error.h"

namespace dfm {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

NoGrad::NoGrad() : saved_(g_active_tape) { g_active_tape = nullptr; }

NoGrad::~NoGrad() { g_active_tape = saved_; }

Tape* Tape::recording(std::initializer_list<const Tensor*> inputs) {
  if (!g_active_tape) return nullptr;
  for (const Tensor* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return g_active_tape;
  }
  return nullptr;
}

void Tape::record(const char* op, Tensor output, BackwardFn backward) {
  output.set_requires_grad(true);
  records_.push_back(Record{op, std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& root) {
  DFM_CHECK(root.numel() == 1, "backward() without seed needs a scalar root, got ",
            shape_str(root.shape()));
  Tensor r = root;
  r.mutable_grad()[0] += 1.0;
  replay();
}

void Tape::backward(const Tensor& root, const Tensor& seed) {
  DFM_CHECK(root.shape() == seed.shape(), "seed shape ", shape_str(seed.shape()),
            " does not match root ", shape_str(root.shape()));
  Tensor r = root;
  auto g = r.mutable_grad();
  auto s = seed.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i];
  replay();
}

void Tape::replay() {
  visited_.clear();
  for (std::size_t i = records_.size(); i-- > 0;) {
    auto& rec = records_[i];
    if (!rec.output.has_grad()) continue;  // no path to the root
    rec.backward();
    visited_.push_back(i);
  }
}

}  // namespace dfm
