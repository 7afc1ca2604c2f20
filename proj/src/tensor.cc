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

#include "dfm/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dfm/error.h"

namespace dfm {

// Storage is shared between a tensor and its reshaped views, gradient
// buffer included, so a view needs no tape record to route gradients.
struct Storage {
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
};

struct Tensor::Impl {
  Shape shape;
  std::shared_ptr<Storage> storage;
};

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) {
    DFM_CHECK(e >= 0, "negative extent in shape ", shape_str(shape));
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, double fill) {
  auto n = shape_numel(shape);
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->storage = std::make_shared<Storage>();
  impl_->storage->values.assign(static_cast<std::size_t>(n), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  auto n = shape_numel(shape);
  DFM_CHECK(static_cast<std::int64_t>(values.size()) == n, "tensor of shape ",
            shape_str(shape), " needs ", n, " values, got ", values.size());
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->storage = std::make_shared<Storage>();
  impl_->storage->values = std::move(values);
}

const Shape& Tensor::shape() const {
  DFM_CHECK(impl_, "use of undefined tensor");
  return impl_->shape;
}

std::int64_t Tensor::dim(int axis) const {
  const auto& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  DFM_CHECK(axis >= 0 && axis < static_cast<int>(s.size()), "axis ", axis,
            " out of range for shape ", shape_str(s));
  return s[static_cast<std::size_t>(axis)];
}

int Tensor::ndim() const { return static_cast<int>(shape().size()); }

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(impl_ ? impl_->storage->values.size() : 0);
}

std::span<double> Tensor::data() {
  DFM_CHECK(impl_, "use of undefined tensor");
  return impl_->storage->values;
}

std::span<const double> Tensor::data() const {
  DFM_CHECK(impl_, "use of undefined tensor");
  return impl_->storage->values;
}

namespace {

std::int64_t flat_index(const Shape& shape,
                        std::initializer_list<std::int64_t> index) {
  DFM_CHECK(index.size() == shape.size(), "index rank ", index.size(),
            " does not match tensor rank ", shape.size());
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    DFM_CHECK(i >= 0 && i < shape[axis], "index ", i, " out of range on axis ",
              axis, " of ", shape_str(shape));
    flat = flat * shape[axis] + i;
    ++axis;
  }
  return flat;
}

}  // namespace

double& Tensor::at(std::initializer_list<std::int64_t> index) {
  return data()[static_cast<std::size_t>(flat_index(shape(), index))];
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
  return data()[static_cast<std::size_t>(flat_index(shape(), index))];
}

double Tensor::item() const {
  DFM_CHECK(numel() == 1, "item() on tensor of shape ", shape_str(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const {
  return impl_ && impl_->storage->requires_grad;
}

Tensor& Tensor::set_requires_grad(bool flag) {
  DFM_CHECK(impl_, "use of undefined tensor");
  impl_->storage->requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const {
  return impl_ && !impl_->storage->grad.empty();
}

std::span<const double> Tensor::grad() const {
  DFM_CHECK(impl_, "use of undefined tensor");
  return impl_->storage->grad;
}

std::span<double> Tensor::mutable_grad() const {
  DFM_CHECK(impl_, "use of undefined tensor");
  auto& s = *impl_->storage;
  if (s.grad.empty()) s.grad.assign(s.values.size(), 0.0);
  return s.grad;
}

Tensor Tensor::grad_tensor() const {
  Tensor g(shape(), 0.0);
  if (has_grad()) std::copy(grad().begin(), grad().end(), g.data().begin());
  return g;
}

void Tensor::zero_grad() const {
  if (impl_) impl_->storage->grad.clear();
}

Tensor Tensor::clone() const {
  DFM_CHECK(impl_, "use of undefined tensor");
  return Tensor(shape(), impl_->storage->values);
}

Tensor Tensor::reshaped(Shape new_shape) const {
  DFM_CHECK(shape_numel(new_shape) == numel(), "cannot reshape ",
            shape_str(shape()), " to ", shape_str(new_shape));
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(new_shape);
  impl->storage = impl_->storage;
  return Tensor(std::move(impl));
}

bool Tensor::all_finite() const {
  auto v = data();
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace dfm
