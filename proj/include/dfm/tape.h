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
#include <initializer_list>
#include <string>
#include <vector>

#include "dfm/tensor.h"

namespace dfm {

// Reverse-mode differentiation tape.
//
// Constructing a Tape makes it the active tape of the calling thread until
// it is destroyed (tapes nest like a stack). While a tape is active, every
// primitive whose inputs require gradients appends one record holding the
// inputs it needs for backward. Records are appended in execution order,
// which is a topological order of the computation, so backward() replays
// them in reverse and touches each record once.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Active tape of this thread if any input requires grad, else nullptr.
  static Tape* recording(std::initializer_list<const Tensor*> inputs);
  static Tape* active();

  // `output` is marked as requiring grad. `backward` reads output's grad and
  // accumulates into the grads of whichever inputs require them.
  void record(const char* op, Tensor output, BackwardFn backward);

  // Seeds d(root)/d(root) = 1 (root must be a scalar) and replays.
  void backward(const Tensor& root);
  // Seeds root's grad with `seed` (same shape) and replays.
  void backward(const Tensor& root, const Tensor& seed);

  std::size_t size() const { return records_.size(); }
  // Records executed by the last backward, in execution order.
  const std::vector<std::size_t>& last_visit_order() const { return visited_; }
  const char* op_name(std::size_t i) const { return records_[i].op; }

 private:
  struct Record {
    const char* op;
    Tensor output;
    BackwardFn backward;
  };
  void replay();

  std::vector<Record> records_;
  std::vector<std::size_t> visited_;
  Tape* previous_;
};

// Suspends recording on this thread for the guard's lifetime.
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  Tape* saved_;
};

}  // namespace dfm
