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
#include <vector>

#include "dfm/error.h"
#include "dfm/ops.h"
#include "dfm/rng.h"
#include "dfm/ssm.h"
#include "dfm/tape.h"

namespace dfm {
namespace {

// Reference recurrence written from scratch with plain vectors. a, b are
// per-(t, c, n) discretized values; c_out per-(t, c, n) readout.
struct Oracle {
  std::int64_t d, n, s;
  std::vector<double> a, b, c;  // index (t * d + ch) * n + k
  std::vector<double> D;

  std::vector<double> run(const std::vector<double>& x) const {  // x[ch * s + t]
    std::vector<double> y(static_cast<std::size_t>(d * s));
    for (std::int64_t ch = 0; ch < d; ++ch) {
      std::vector<double> h(static_cast<std::size_t>(n), 0.0);
      for (std::int64_t t = 0; t < s; ++t) {
        double out = D[ch] * x[ch * s + t];
        for (std::int64_t k = 0; k < n; ++k) {
          const auto i = (t * d + ch) * n + k;
          h[k] = a[i] * h[k] + b[i] * x[ch * s + t];
          out += c[i] * h[k];
        }
        y[ch * s + t] = out;
      }
    }
    return y;
  }
};

Oracle static_oracle(const SsmParams& p, std::int64_t s) {
  Oracle o{p.channels(), p.state_size(), s, {}, {}, {}, {}};
  for (std::int64_t t = 0; t < s; ++t)
    for (std::int64_t ch = 0; ch < o.d; ++ch)
      for (std::int64_t k = 0; k < o.n; ++k) {
        const double dt = p.delta[ch], A = p.A.at({ch, k});
        o.a.push_back(std::exp(dt * A));
        o.b.push_back((std::exp(dt * A) - 1.0) / A * p.B.at({k, ch}));
        o.c.push_back(p.C.at({ch, k}));
      }
  for (std::int64_t ch = 0; ch < o.d; ++ch) o.D.push_back(p.D[ch]);
  return o;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

TEST(Zoh, InputGainLimitAndSeriesContinuity) {
  EXPECT_DOUBLE_EQ(zoh_input_gain(0.0), 1.0);
  for (double x : {1e-9, -1e-9, 2e-8, -2e-8, 1e-3, -0.7, -5.0})
    EXPECT_NEAR(zoh_input_gain(x), x == 0 ? 1.0 : std::expm1(x) / x, 1e-14) << x;
  // Both branches around the series cutoff agree with the exact value.
  for (double x : {kZohSeriesThreshold * 0.999, kZohSeriesThreshold * 1.001,
                   -kZohSeriesThreshold * 0.999, -kZohSeriesThreshold * 1.001})
    EXPECT_NEAR(zoh_input_gain(x), std::expm1(x) / x, 1e-15) << x;
}

TEST(Zoh, InputGainDerivativeMatchesFiniteDifference) {
  EXPECT_NEAR(zoh_input_gain_derivative(0.0), 0.5, 1e-12);
  for (double x : {-3.0, -0.4, -1e-4, 0.2}) {
    const double h = 1e-6;
    const double fd = (zoh_input_gain(x + h) - zoh_input_gain(x - h)) / (2 * h);
    EXPECT_NEAR(zoh_input_gain_derivative(x), fd, 1e-7) << x;
  }
}

TEST(Zoh, DiscretizationMatchesClosedForm) {
  Rng rng(1);
  auto p = SsmParams::init(3, 4, rng);
  const auto disc = discretize_zoh(p);
  EXPECT_FALSE(disc.time_varying);
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t k = 0; k < 4; ++k) {
      const double x = p.delta[c] * p.A.at({c, k});
      EXPECT_NEAR(disc.a_bar.at({c, k}), std::exp(x), 1e-15);
      EXPECT_NEAR(disc.b_bar.at({k, c}), (std::exp(x) - 1) / p.A.at({c, k}) * p.B.at({k, c}),
                  1e-14);
      // Stable continuous system gives a contraction.
      EXPECT_GT(disc.a_bar.at({c, k}), 0.0);
      EXPECT_LT(disc.a_bar.at({c, k}), 1.0);
    }
}

TEST(Zoh, RejectsNonPositiveTimescale) {
  Rng rng(2);
  auto p = SsmParams::init(2, 2, rng);
  p.delta[1] = 0.0;
  EXPECT_THROW(discretize_zoh(p), ContractViolation);
  p.delta[1] = 0.1;
  p.B = Tensor({3, 2});
  EXPECT_THROW(discretize_zoh(p), ContractViolation);
}

TEST(Scan, StaticMatchesReferenceRecurrence) {
  Rng rng(3);
  auto p = SsmParams::init(3, 5, rng);
  for (auto& v : p.delta.data()) v = rng.uniform(0.05, 0.8);
  p.D = rng.uniform_tensor({3}, -1, 1);
  Tensor x = rng.uniform_tensor({3, 11}, -1, 1);
  const auto y = ssm_scan(discretize_zoh(p), p.C, p.D, x);
  const auto want = static_oracle(p, 11).run(values(x));
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-12);
}

TEST(Scan, KernelFormEqualsRecurrence) {
  Rng rng(4);
  for (std::int64_t s : {1, 2, 17, 64}) {
    auto p = SsmParams::init(4, 6, rng);
    p.D = rng.uniform_tensor({4}, -1, 1);
    Tensor x = rng.uniform_tensor({4, s}, -2, 2);
    const auto disc = discretize_zoh(p);
    const auto rec = ssm_scan(disc, p.C, p.D, x);
    const auto kernel = ssm_kernel(disc, p.C, s);
    const auto conv = causal_conv_form(kernel, p.D, x);
    for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(rec[i], conv[i], 1e-11) << s;
  }
}

TEST(Scan, KernelEntriesAreCABPowers) {
  Rng rng(5);
  auto p = SsmParams::init(2, 3, rng);
  const auto disc = discretize_zoh(p);
  const auto K = ssm_kernel(disc, p.C, 5);
  for (std::int64_t c = 0; c < 2; ++c)
    for (std::int64_t t = 0; t < 5; ++t) {
      double want = 0.0;
      for (std::int64_t k = 0; k < 3; ++k)
        want += p.C.at({c, k}) * std::pow(disc.a_bar.at({c, k}), static_cast<double>(t)) *
                disc.b_bar.at({k, c});
      EXPECT_NEAR(K.at({c, t}), want, 1e-14);
    }
}

TEST(Scan, ImpulseResponseIsTheKernel) {
  Rng rng(6);
  auto p = SsmParams::init(2, 4, rng);
  p.D = Tensor::zeros({2});
  Tensor x({2, 8});
  x.at({0, 0}) = 1.0;
  x.at({1, 0}) = 1.0;
  const auto disc = discretize_zoh(p);
  const auto y = ssm_scan(disc, p.C, p.D, x);
  const auto K = ssm_kernel(disc, p.C, 8);
  for (std::int64_t i = 0; i < 16; ++i) EXPECT_NEAR(y[i], K[i], 1e-14);
}

TEST(Scan, LinearInInputAndZeroForZero) {
  Rng rng(7);
  auto p = SsmParams::init(3, 4, rng);
  const auto disc = discretize_zoh(p);
  Tensor a = rng.uniform_tensor({3, 9}, -1, 1), b = rng.uniform_tensor({3, 9}, -1, 1);
  const auto ya = ssm_scan(disc, p.C, p.D, a), yb = ssm_scan(disc, p.C, p.D, b);
  const auto yab = ssm_scan(disc, p.C, p.D, ops::add(ops::scale(a, 2.0), b));
  for (std::int64_t i = 0; i < 27; ++i) EXPECT_NEAR(yab[i], 2 * ya[i] + yb[i], 1e-12);
  const auto z = ssm_scan(disc, p.C, p.D, Tensor::zeros({3, 9}));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Scan, CausalOutputIgnoresFutureTokens) {
  Rng rng(8);
  auto p = SsmParams::init(2, 3, rng);
  const auto disc = discretize_zoh(p);
  Tensor x = rng.uniform_tensor({2, 10}, -1, 1);
  Tensor x2 = x.clone();
  for (std::int64_t t = 6; t < 10; ++t) x2.at({1, t}) = 5.0;
  const auto y = ssm_scan(disc, p.C, p.D, x), y2 = ssm_scan(disc, p.C, p.D, x2);
  for (std::int64_t t = 0; t < 6; ++t) EXPECT_DOUBLE_EQ(y.at({1, t}), y2.at({1, t}));
}

TEST(Scan, TimeVaryingKernelIsUnsupported) {
  Rng rng(9);
  Tensor A = Tensor({2, 3}, -1.0);
  const auto disc = discretize_zoh_selective(A, rng.uniform_tensor({3, 4}, -1, 1),
                                             Tensor({2, 4}, 0.1));
  EXPECT_TRUE(disc.time_varying);
  EXPECT_THROW(ssm_kernel(disc, Tensor({2, 3}), 4), UnsupportedMode);
}

TEST(Scan, SelectiveMatchesReferenceRecurrence) {
  Rng rng(10);
  const std::int64_t d = 3, n = 4, s = 7;
  Tensor A({d, n});
  for (auto& v : A.data()) v = -rng.uniform(0.5, 3.0);
  Tensor B = rng.uniform_tensor({n, s}, -1, 1), C = rng.uniform_tensor({n, s}, -1, 1);
  Tensor delta = rng.uniform_tensor({d, s}, 0.01, 0.5), D = rng.uniform_tensor({d}, -1, 1);
  Tensor x = rng.uniform_tensor({d, s}, -1, 1);
  const auto y = ssm_scan(discretize_zoh_selective(A, B, delta), C, D, x);
  Oracle o{d, n, s, {}, {}, {}, values(D)};
  for (std::int64_t t = 0; t < s; ++t)
    for (std::int64_t ch = 0; ch < d; ++ch)
      for (std::int64_t k = 0; k < n; ++k) {
        const double dt = delta.at({ch, t}), a = A.at({ch, k});
        o.a.push_back(std::exp(dt * a));
        o.b.push_back(std::expm1(dt * a) / a * B.at({k, t}));
        o.c.push_back(C.at({k, t}));
      }
  const auto want = o.run(values(x));
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-12);
}

TEST(Scan, SelectiveWithConstantParametersReducesToStatic) {
  Rng rng(11);
  auto p = SsmParams::init(2, 3, rng);
  const std::int64_t s = 6;
  Tensor Bt({3, s}), Ct({3, s}), dt({2, s});
  for (std::int64_t t = 0; t < s; ++t) {
    for (std::int64_t k = 0; k < 3; ++k) {
      Bt.at({k, t}) = p.B.at({k, 0});
      Ct.at({k, t}) = p.C.at({0, k});
    }
    for (std::int64_t c = 0; c < 2; ++c) dt.at({c, t}) = p.delta[0];
  }
  // Use channel 0's values for every channel in the static system too.
  for (std::int64_t c = 0; c < 2; ++c) {
    p.delta[c] = p.delta[0];
    for (std::int64_t k = 0; k < 3; ++k) {
      p.B.at({k, c}) = p.B.at({k, 0});
      p.C.at({c, k}) = p.C.at({0, k});
    }
  }
  Tensor x = rng.uniform_tensor({2, s}, -1, 1);
  const auto a = ssm_scan(discretize_zoh(p), p.C, p.D, x);
  const auto b = ssm_scan(discretize_zoh_selective(p.A, Bt, dt), Ct, p.D, x);
  for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(ApplySsm, StaticEqualsScanOfSweepSerialization) {
  Rng rng(12);
  auto p = SsmParams::init(3, 4, rng);
  Tensor x = rng.uniform_tensor({2, 3, 3, 4}, -1, 1);
  const auto y = apply_ssm(x, p, false);
  const auto disc = discretize_zoh(p);
  for (std::int64_t b = 0; b < 2; ++b) {
    Tensor xb({3, 12});
    for (std::int64_t i = 0; i < 36; ++i) xb[i] = x[b * 36 + i];
    const auto yb = ssm_scan(disc, p.C, p.D, xb);
    for (std::int64_t i = 0; i < 36; ++i) EXPECT_NEAR(y[b * 36 + i], yb[i], 1e-13);
  }
}

TEST(ApplySsm, SelectiveUsesPredictedParameters) {
  Rng rng(13);
  auto p = SsmParams::init(3, 2, rng, true);
  for (auto* t : {&p.selective->delta_weight, &p.selective->b_weight, &p.selective->c_weight})
    for (auto& v : t->data()) v = rng.normal(0.0, 0.5);
  Tensor x = rng.uniform_tensor({1, 3, 2, 3}, -1, 1);
  const auto y = apply_ssm(x, p, true);
  const auto sel = selective_params(x, *p.selective);
  // Oracle: per-token predicted values computed by hand.
  const std::int64_t s = 6, d = 3, n = 2;
  for (std::int64_t t = 0; t < s; ++t) {
    for (std::int64_t k = 0; k < n; ++k) {
      double bt = p.selective->b_bias[k];
      for (std::int64_t c = 0; c < d; ++c) bt += p.selective->b_weight.at({k, c}) * x[c * s + t];
      EXPECT_NEAR(sel.B[k * s + t], bt, 1e-14);
    }
    for (std::int64_t c = 0; c < d; ++c) {
      double z = p.selective->delta_bias[c];
      for (std::int64_t j = 0; j < d; ++j) z += p.selective->delta_weight.at({c, j}) * x[j * s + t];
      EXPECT_NEAR(sel.delta[c * s + t], std::log1p(std::exp(z)), 1e-14);
    }
  }
  const auto want = ssm_scan(
      discretize_zoh_selective(p.A, sel.B.reshaped({n, s}), sel.delta.reshaped({d, s})),
      sel.C.reshaped({n, s}), p.D, x.reshaped({d, s}));
  for (std::int64_t i = 0; i < d * s; ++i) EXPECT_NEAR(y[i], want[i], 1e-12);
}

TEST(ApplySsm, StateInputOnlyFeedsTheRecurrence) {
  Rng rng(14);
  auto p = SsmParams::init(2, 3, rng);
  Tensor x = rng.uniform_tensor({1, 2, 1, 5}, -1, 1);
  const auto y = apply_ssm(x, p, false, Tensor::zeros(x.shape()));
  // With a zero state input only the D skip remains.
  for (std::int64_t c = 0; c < 2; ++c)
    for (std::int64_t t = 0; t < 5; ++t)
      EXPECT_DOUBLE_EQ(y[c * 5 + t], p.D[c] * x[c * 5 + t]);
  EXPECT_THROW(apply_ssm(x, p, true), ContractViolation);
}

TEST(ApplySsm, GradientsMatchFiniteDifferences) {
  Rng rng(15);
  auto p = SsmParams::init(2, 3, rng, true);
  for (auto& v : p.selective->delta_weight.data()) v = rng.normal(0.0, 0.3);
  Tensor x = rng.uniform_tensor({1, 2, 2, 2}, -1, 1);
  Tensor proj = rng.uniform_tensor({1, 2, 2, 2}, -1, 1);
  for (bool selective : {false, true}) {
    std::vector<NamedTensor> params = {{"x", x}, {"A", p.A}, {"D", p.D}};
    if (selective) {
      for (auto& nt : p.selective->named("sel.")) params.push_back(nt);
    } else {
      params.push_back({"B", p.B});
      params.push_back({"C", p.C});
      params.push_back({"delta", p.delta});
    }
    const auto r = grad_check([&] { return ops::dot_const(apply_ssm(x, p, selective), proj); },
                              params, 1e-6, "apply_ssm");
    EXPECT_LT(r.max_rel_error, 1e-6) << selective << " " << r.worst_param;
  }
}

TEST(Sweep, MatchesBruteForceTable) {
  // 2 x 3 grid, row-major: (1,1) (2,1) (3,1) (1,2) (2,2) (3,2).
  const auto order = sweep_positions(2, 3);
  const std::vector<GridPos> want = {{1, 1}, {2, 1}, {3, 1}, {1, 2}, {2, 2}, {3, 2}};
  EXPECT_EQ(order.positions, want);
}

TEST(Sweep, IsABijectionWithInverse) {
  for (auto [h, w] : {std::pair<std::int64_t, std::int64_t>{1, 1}, {1, 7}, {5, 1}, {4, 6}}) {
    const auto order = sweep_positions(h, w);
    ASSERT_EQ(static_cast<std::int64_t>(order.positions.size()), h * w);
    std::vector<int> hits(static_cast<std::size_t>(h * w), 0);
    for (std::int64_t t = 1; t <= h * w; ++t) {
      const auto p = order.positions[static_cast<std::size_t>(t - 1)];
      ASSERT_GE(p.x, 1);
      ASSERT_LE(p.x, w);
      ASSERT_GE(p.y, 1);
      ASSERT_LE(p.y, h);
      ++hits[static_cast<std::size_t>((p.y - 1) * w + p.x - 1)];
      EXPECT_EQ(order.index_of(p), t);
    }
    for (int c : hits) EXPECT_EQ(c, 1);
  }
  EXPECT_THROW(sweep_positions(0, 3), ContractViolation);
  EXPECT_THROW(sweep_positions(2, 2).index_of({3, 1}), ContractViolation);
}

TEST(Sweep, RowWrapMovesToNextRowStart) {
  const auto order = sweep_positions(3, 4);
  EXPECT_EQ(order.positions[3], (GridPos{4, 1}));
  EXPECT_EQ(order.positions[4], (GridPos{1, 2}));
  EXPECT_EQ(order.positions.back(), (GridPos{4, 3}));
}

}  // namespace
}  // namespace dfm
