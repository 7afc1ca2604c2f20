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

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dfm {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles with an optional gradient buffer.
//
// A Tensor is a handle: copies share the same storage, as with framework
// tensors. Use clone() for a deep copy. Operations never mutate their
// inputs' values, so a tensor recorded on a Tape stays valid for backward.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
  static Tensor scalar(double v) { return Tensor(Shape{}, v); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(int axis) const;
  int ndim() const;
  std::int64_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  double* ptr() { return data().data(); }
  const double* ptr() const { return data().data(); }

  double& operator[](std::int64_t i) { return data()[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const {
    return data()[static_cast<std::size_t>(i)];
  }
  double& at(std::initializer_list<std::int64_t> index);
  double at(std::initializer_list<std::int64_t> index) const;
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);

  // Gradient access. grad() is empty until backward wrote something or
  // mutable_grad() allocated it.
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;  // handle semantics: storage is shared
  Tensor grad_tensor() const;
  void zero_grad() const;

  Tensor clone() const;
  // Same storage, new shape; numel must match. Not recorded on the tape.
  Tensor reshaped(Shape shape) const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  bool all_finite() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
  Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
};

}  // namespace dfm
