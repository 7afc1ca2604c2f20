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

#include <gtest/gtest.h>

#include <cmath>

#include "dfm/error.h"
#include "dfm/grad_check.h"
#include "dfm/grad_suite.h"
#include "dfm/ops.h"
#include "dfm/rng.h"
#include "dfm/tape.h"

namespace dfm {
namespace {

TEST(Tensor, HandleSharesStorageAndCloneCopies) {
  Tensor a({2, 3}, 1.5);
  Tensor b = a;
  b[4] = 7.0;
  EXPECT_EQ(a[4], 7.0);
  Tensor c = a.clone();
  c[4] = 0.0;
  EXPECT_EQ(a[4], 7.0);
  EXPECT_TRUE(a.same_storage(b));
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Tensor, ReshapedAliasesValuesAndGrad) {
  Tensor a({2, 3});
  Tensor v = a.reshaped({3, 2});
  v.at({2, 1}) = 5.0;
  EXPECT_EQ(a.at({1, 2}), 5.0);
  v.mutable_grad()[0] = 2.0;
  EXPECT_EQ(a.grad()[0], 2.0);
  EXPECT_THROW(a.reshaped({4, 2}), ContractViolation);
}

TEST(Tensor, AtChecksRank) {
  Tensor a({2, 2});
  EXPECT_THROW(a.at({0}), ContractViolation);
  EXPECT_THROW(a.at({2, 0}), ContractViolation);
}

TEST(Tape, BackwardOfSquareSum) {
  Tensor x({3}, std::vector<double>{1.0, -2.0, 3.0});
  x.set_requires_grad(true);
  Tape tape;
  Tensor y = ops::sum(ops::square(x));
  tape.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -4.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 6.0);
}

TEST(Tape, ReplaysInReverseExecutionOrderOnce) {
  Tensor x({2}, 1.0);
  x.set_requires_grad(true);
  Tape tape;
  Tensor a = ops::exp(x);
  Tensor b = ops::mul(a, a);  // a used twice
  Tensor c = ops::sum(b);
  tape.backward(c);
  const auto& order = tape.last_visit_order();
  ASSERT_EQ(order.size(), 3u);
  EXPECT_EQ(order[0], 2u);
  EXPECT_EQ(order[1], 1u);
  EXPECT_EQ(order[2], 0u);
  // d/dx sum(exp(x)^2) = 2 exp(2x)
  EXPECT_NEAR(x.grad()[0], 2.0 * std::exp(2.0), 1e-12);
}

TEST(Tape, SkipsRecordsOffThePathToTheRoot) {
  Tensor x({2}, 1.0);
  x.set_requires_grad(true);
  Tape tape;
  Tensor unused = ops::exp(x);
  Tensor y = ops::sum(ops::scale(x, 3.0));
  tape.backward(y);
  EXPECT_EQ(tape.size(), 3u);
  EXPECT_EQ(tape.last_visit_order().size(), 2u);
  EXPECT_FALSE(unused.has_grad());
  EXPECT_DOUBLE_EQ(x.grad()[1], 3.0);
}

TEST(Tape, NoGradSuspendsRecording) {
  Tensor x({2}, 1.0);
  x.set_requires_grad(true);
  Tape tape;
  {
    NoGrad guard;
    ops::exp(x);
  }
  EXPECT_EQ(tape.size(), 0u);
  ops::exp(x);
  EXPECT_EQ(tape.size(), 1u);
}

TEST(Tape, ConstantsAreNotRecorded) {
  Tape tape;
  Tensor x({2}, 1.0);
  ops::exp(x);
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Tape, NonScalarRootNeedsSeed) {
  Tensor x({2}, 1.0);
  x.set_requires_grad(true);
  Tape tape;
  Tensor y = ops::scale(x, 2.0);
  EXPECT_THROW(tape.backward(y), ContractViolation);
  tape.backward(y, Tensor({2}, std::vector<double>{1.0, 10.0}));
  EXPECT_DOUBLE_EQ(x.grad()[1], 20.0);
}

TEST(Ops, ElementwiseValues) {
  Tensor x({4}, std::vector<double>{-2.0, -0.5, 0.5, 2.0});
  const auto r = ops::relu(x), s = ops::softplus(x), g = ops::gelu(x), si = ops::silu(x);
  for (int i = 0; i < 4; ++i) {
    const double v = x[i];
    EXPECT_DOUBLE_EQ(r[i], std::max(v, 0.0));
    EXPECT_NEAR(s[i], std::log1p(std::exp(v)), 1e-15);
    EXPECT_NEAR(g[i], 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))), 1e-15);
    EXPECT_NEAR(si[i], v / (1.0 + std::exp(-v)), 1e-15);
  }
  EXPECT_THROW(ops::add(x, Tensor({3})), ContractViolation);
}

TEST(Ops, SoftplusIsStableForLargeInputs) {
  Tensor x({2}, std::vector<double>{800.0, -800.0});
  const auto s = ops::softplus(x);
  EXPECT_DOUBLE_EQ(s[0], 800.0);
  EXPECT_TRUE(s.all_finite());
  EXPECT_GE(s[1], 0.0);
}

// Direct 7-loop cross-correlation.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const auto co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const auto oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  Tensor y({n, co, oh, ow});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t o = 0; o < co; ++o)
      for (std::int64_t r = 0; r < oh; ++r)
        for (std::int64_t q = 0; q < ow; ++q) {
          double acc = b.defined() ? b[o] : 0.0;
          for (std::int64_t ci = 0; ci < c; ++ci)
            for (std::int64_t u = 0; u < kh; ++u)
              for (std::int64_t v = 0; v < kw; ++v) {
                const auto yy = r * stride - pad + u, xx = q * stride - pad + v;
                if (yy < 0 || yy >= h || xx < 0 || xx >= wd) continue;
                acc += w.at({o, ci, u, v}) * x.at({i, ci, yy, xx});
              }
          y.at({i, o, r, q}) = acc;
        }
  return y;
}

TEST(Ops, Conv2dMatchesDirectLoop) {
  Rng rng(3);
  for (int stride : {1, 2}) {
    Tensor x = rng.uniform_tensor({2, 3, 7, 6}, -1, 1);
    Tensor w = rng.uniform_tensor({4, 3, 3, 3}, -1, 1);
    Tensor b = rng.uniform_tensor({4}, -1, 1);
    const auto got = ops::conv2d(x, w, b, stride, 1);
    const auto want = naive_conv(x, w, b, stride, 1);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::int64_t i = 0; i < got.numel(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Ops, DepthwiseCausalConvOnlySeesThePast) {
  Rng rng(4);
  Tensor x = rng.uniform_tensor({1, 2, 2, 3}, -1, 1);
  Tensor w = rng.uniform_tensor({2, 4}, -1, 1), b = rng.uniform_tensor({2}, -1, 1);
  const auto y = ops::depthwise_causal_conv1d(x, w, b);
  for (std::int64_t c = 0; c < 2; ++c)
    for (std::int64_t t = 0; t < 6; ++t) {
      double acc = b[c];
      for (std::int64_t j = 0; j < 4; ++j) {
        const auto src = t - 3 + j;
        if (src >= 0) acc += w.at({c, j}) * x[c * 6 + src];
      }
      EXPECT_NEAR(y[c * 6 + t], acc, 1e-14);
    }
}

TEST(Ops, ResizeBilinearHalfPixelCenters) {
  // 1x2 -> 1x4: output centers at input coordinates -0.25, 0.25, 0.75, 1.25
  // (clamped): values 0, 0.25, 0.75, 1 for inputs (0, 1).
  Tensor x({1, 1, 1, 2}, std::vector<double>{0.0, 1.0});
  const auto y = ops::resize_bilinear(x, 1, 4);
  EXPECT_DOUBLE_EQ(y[0], 0.0);
  EXPECT_DOUBLE_EQ(y[1], 0.25);
  EXPECT_DOUBLE_EQ(y[2], 0.75);
  EXPECT_DOUBLE_EQ(y[3], 1.0);
  // Identity at equal size.
  Rng rng(5);
  Tensor z = rng.uniform_tensor({1, 2, 3, 4}, -1, 1);
  const auto same = ops::resize_bilinear(z, 3, 4);
  for (std::int64_t i = 0; i < z.numel(); ++i) EXPECT_DOUBLE_EQ(same[i], z[i]);
}

TEST(Ops, LayerNormNormalizesEverySite) {
  Rng rng(6);
  Tensor x = rng.uniform_tensor({2, 5, 3, 3}, -2, 2);
  const auto y = ops::layer_norm_channels(x, Tensor::ones({5}), Tensor::zeros({5}));
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t s = 0; s < 9; ++s) {
      double mean = 0.0, sq = 0.0;
      for (std::int64_t c = 0; c < 5; ++c) mean += y[(n * 5 + c) * 9 + s] / 5.0;
      for (std::int64_t c = 0; c < 5; ++c) sq += std::pow(y[(n * 5 + c) * 9 + s] - mean, 2) / 5.0;
      EXPECT_NEAR(mean, 0.0, 1e-12);
      EXPECT_NEAR(sq, 1.0, 1e-4);
    }
}

TEST(Ops, BatchNormTrainUpdatesRunningStats) {
  Tensor x({2, 1, 1, 2}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  ops::BatchNormState st{Tensor::zeros({1}), Tensor::ones({1})};
  const auto y = ops::batch_norm2d(x, Tensor::ones({1}), Tensor::zeros({1}), st, true);
  // mean 2.5, biased var 1.25, unbiased var 5/3
  EXPECT_NEAR(y[0], (1.0 - 2.5) / std::sqrt(1.25 + 1e-5), 1e-12);
  EXPECT_NEAR(st.running_mean[0], 0.25, 1e-15);
  EXPECT_NEAR(st.running_var[0], 0.9 + 0.1 * 5.0 / 3.0, 1e-15);
  const auto e = ops::batch_norm2d(x, Tensor::ones({1}), Tensor::zeros({1}), st, false);
  EXPECT_NEAR(e[0], (1.0 - 0.25) / std::sqrt(st.running_var[0] + 1e-5), 1e-12);
}

TEST(Ops, LogSoftmaxNormalizesEachMap) {
  Rng rng(7);
  Tensor x = rng.uniform_tensor({2, 3, 4, 4}, -5, 5);
  const auto y = ops::log_softmax_spatial(x);
  for (std::int64_t m = 0; m < 6; ++m) {
    double total = 0.0;
    for (std::int64_t s = 0; s < 16; ++s) total += std::exp(y[m * 16 + s]);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Ops, BilinearSampleGridPointsAndPadding) {
  Tensor map({1, 2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  // 1-based (column, row).
  EXPECT_DOUBLE_EQ(ops::bilinear_sample(map, 2.0, 1.0)[0], 2.0);
  EXPECT_DOUBLE_EQ(ops::bilinear_sample(map, 3.0, 2.0)[0], 6.0);
  EXPECT_DOUBLE_EQ(ops::bilinear_sample(map, 1.5, 1.5)[0], 3.0);
  // Half a cell outside: one neighbour is zero padding.
  EXPECT_DOUBLE_EQ(ops::bilinear_sample(map, 0.5, 1.0)[0], 0.5);
  EXPECT_DOUBLE_EQ(ops::bilinear_sample(map, 10.0, 1.0)[0], 0.0);
}

TEST(GradCheck, DetectsAWrongGradient) {
  // A function whose tape gradient is deliberately inconsistent: the
  // numeric derivative of sum(x^2) is compared against that of sum(x).
  Tensor x({3}, std::vector<double>{0.5, 1.0, 2.0});
  int calls = 0;
  auto f = [&] {
    ++calls;
    return Tape::active() ? ops::sum(x) : ops::sum(ops::square(x));
  };
  const double err = grad_check(f, x, 1e-5, "inconsistent");
  EXPECT_GT(err, 0.1);
  EXPECT_GT(calls, 1);
}

TEST(GradCheck, ThrowsNamedNumericErrorForNonFinite) {
  Tensor x({1}, 1000.0);
  try {
    grad_check([&] { return ops::sum(ops::exp(x)); }, x, 1e-5, "exp_overflow");
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("exp_overflow"), std::string::npos);
  }
}

TEST(GradCheck, EveryPrimitivePasses) {
  for (const auto& e : run_op_grad_suite(11)) {
    EXPECT_LT(e.result.max_rel_error, 1e-4) << e.name << " worst " << e.result.worst_param;
    EXPECT_GT(e.result.coordinates, 0) << e.name;
  }
}

}  // namespace
}  // namespace dfm
