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

#include <cmath>
#include <numbers>

#include "dfm/error.h"
#include "dfm/ops.h"
#include "dfm/tape.h"

namespace dfm::ops {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  DFM_CHECK(a.shape() == b.shape(), op, ": shape mismatch ",
            shape_str(a.shape()), " vs ", shape_str(b.shape()));
}

// y = f(x) elementwise; dy/dx = df(x, y).
template <typename F, typename DF>
Tensor unary(const char* name, const Tensor& x, F f, DF df) {
  Tensor y(x.shape());
  auto xv = x.data();
  auto yv = y.data();
  for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = f(xv[i]);
  if (auto* tape = Tape::recording({&x})) {
    tape->record(name, y, [x, y, df]() mutable {
      auto gy = y.grad();
      auto gx = x.mutable_grad();
      auto xv = x.data();
      auto yv = y.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * df(xv[i], yv[i]);
    });
  }
  return y;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor y(a.shape());
  auto av = a.data(), bv = b.data();
  auto yv = y.data();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] + bv[i];
  if (auto* tape = Tape::recording({&a, &b})) {
    tape->record("add", y, [a, b, y]() mutable {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto g = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto g = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      }
    });
  }
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor y(a.shape());
  auto av = a.data(), bv = b.data();
  auto yv = y.data();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] - bv[i];
  if (auto* tape = Tape::recording({&a, &b})) {
    tape->record("sub", y, [a, b, y]() mutable {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto g = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto g = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= gy[i];
      }
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor y(a.shape());
  auto av = a.data(), bv = b.data();
  auto yv = y.data();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] * bv[i];
  if (auto* tape = Tape::recording({&a, &b})) {
    tape->record("mul", y, [a, b, y]() mutable {
      auto gy = y.grad();
      auto av = a.data(), bv = b.data();
      if (a.requires_grad()) {
        auto g = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto g = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * av[i];
      }
    });
  }
  return y;
}

Tensor scale(const Tensor& a, double s) {
  return unary(
      "scale", a, [s](double x) { return s * x; },
      [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      "add_scalar", a, [s](double x) { return x + s; },
      [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      "gelu", x,
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v, double) {
        return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
               v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      });
}

namespace {
double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  double e = std::exp(v);
  return e / (1.0 + e);
}
}  // namespace

Tensor silu(const Tensor& x) {
  return unary(
      "silu", x, [](double v) { return v * sigmoid(v); },
      [](double v, double) {
        double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor softplus(const Tensor& x) {
  return unary(
      "softplus", x,
      [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) { return sigmoid(v); });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor y = Tensor::scalar(acc);
  if (auto* tape = Tape::recording({&x})) {
    tape->record("sum", y, [x, y]() mutable {
      double g = y.grad()[0];
      for (auto& gx : x.mutable_grad()) gx += g;
    });
  }
  return y;
}

Tensor mean(const Tensor& x) {
  DFM_CHECK(x.numel() > 0, "mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor dot_const(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot_const");
  double acc = 0.0;
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  Tensor y = Tensor::scalar(acc);
  if (auto* tape = Tape::recording({&a})) {
    tape->record("dot_const", y, [a, b, y]() mutable {
      double g = y.grad()[0];
      auto ga = a.mutable_grad();
      auto bv = b.data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
    });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  DFM_CHECK(shape_numel(shape) == x.numel(), "reshape: cannot view ",
            shape_str(x.shape()), " as ", shape_str(shape));
  Tensor y(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (auto* tape = Tape::recording({&x})) {
    tape->record("reshape", y, [x, y]() mutable {
      auto gy = y.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    });
  }
  return y;
}

Tensor concat_flat(std::span<const Tensor> xs) {
  DFM_CHECK(!xs.empty(), "concat_flat: no inputs");
  const auto n = xs[0].dim(0);
  std::vector<std::int64_t> per_sample;
  std::int64_t total = 0;
  for (const auto& x : xs) {
    DFM_CHECK(x.dim(0) == n, "concat_flat: batch mismatch");
    per_sample.push_back(x.numel() / n);
    total += per_sample.back();
  }
  Tensor y(Shape{n, total});
  auto yv = y.data();
  std::int64_t col = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    auto xv = xs[k].data();
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t i = 0; i < per_sample[k]; ++i)
        yv[b * total + col + i] = xv[b * per_sample[k] + i];
    col += per_sample[k];
  }
  bool any = false;
  for (const auto& x : xs) any = any || x.requires_grad();
  if (Tape::active() && any) {
    std::vector<Tensor> inputs(xs.begin(), xs.end());
    Tape::active()->record("concat_flat", y, [inputs, per_sample, total, n, y]() mutable {
      auto gy = y.grad();
      std::int64_t col = 0;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (inputs[k].requires_grad()) {
          auto gx = inputs[k].mutable_grad();
          for (std::int64_t b = 0; b < n; ++b)
            for (std::int64_t i = 0; i < per_sample[k]; ++i)
              gx[b * per_sample[k] + i] += gy[b * total + col + i];
        }
        col += per_sample[k];
      }
    });
  }
  return y;
}

Tensor slice_channels(const Tensor& x, std::int64_t begin, std::int64_t end) {
  DFM_CHECK(x.ndim() >= 2, "slice_channels needs [N, C, ...]");
  const auto n = x.dim(0), c = x.dim(1);
  DFM_CHECK(0 <= begin && begin < end && end <= c, "slice_channels: bad range [",
            begin, ", ", end, ") for ", c, " channels");
  const auto inner = x.numel() / (n * c);
  Shape shape = x.shape();
  shape[1] = end - begin;
  Tensor y(shape);
  auto xv = x.data();
  auto yv = y.data();
  const auto w = end - begin;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t ch = 0; ch < w; ++ch)
      for (std::int64_t i = 0; i < inner; ++i)
        yv[(b * w + ch) * inner + i] = xv[(b * c + begin + ch) * inner + i];
  if (auto* tape = Tape::recording({&x})) {
    tape->record("slice_channels", y, [x, y, n, c, w, begin, inner]() mutable {
      auto gy = y.grad();
      auto gx = x.mutable_grad();
      for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t ch = 0; ch < w; ++ch)
          for (std::int64_t i = 0; i < inner; ++i)
            gx[(b * c + begin + ch) * inner + i] += gy[(b * w + ch) * inner + i];
    });
  }
  return y;
}

}  // namespace dfm::ops
