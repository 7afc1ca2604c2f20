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

#include "dfm/ssm.h"

#include <cmath>

#include "dfm/error.h"
#include "dfm/ops.h"
#include "dfm/rng.h"

namespace dfm {

namespace {

// softplus^{-1}(y) = log(exp(y) - 1)
double inverse_softplus(double y) { return std::log(std::expm1(y)); }

Tensor log_uniform_timescales(std::int64_t channels, Rng& rng) {
  Tensor t(Shape{channels});
  for (auto& v : t.data())
    v = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
  return t;
}

}  // namespace

SelectivePredictors SelectivePredictors::init(std::int64_t channels, std::int64_t state,
                                              Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(channels));
  SelectivePredictors p;
  p.b_weight = rng.normal_tensor({state, channels}, s);
  p.b_bias = Tensor::zeros({state});
  p.c_weight = rng.normal_tensor({state, channels}, s);
  p.c_bias = Tensor::zeros({state});
  p.delta_weight = rng.normal_tensor({channels, channels}, 0.1 * s);
  p.delta_bias = log_uniform_timescales(channels, rng);
  for (auto& v : p.delta_bias.data()) v = inverse_softplus(v);
  return p;
}

std::vector<NamedTensor> SelectivePredictors::named(const std::string& prefix) const {
  return {{prefix + "b_weight", b_weight},         {prefix + "b_bias", b_bias},
          {prefix + "c_weight", c_weight},         {prefix + "c_bias", c_bias},
          {prefix + "delta_weight", delta_weight}, {prefix + "delta_bias", delta_bias}};
}

SsmParams SsmParams::init(std::int64_t channels, std::int64_t state, Rng& rng,
                          bool with_selective) {
  SsmParams p;
  p.A = Tensor({channels, state});
  for (std::int64_t c = 0; c < channels; ++c)
    for (std::int64_t n = 0; n < state; ++n) p.A.at({c, n}) = -static_cast<double>(n + 1);
  const double s = 1.0 / std::sqrt(static_cast<double>(state));
  p.B = rng.normal_tensor({state, channels}, s);
  p.C = rng.normal_tensor({channels, state}, s);
  p.D = Tensor::ones({channels});
  p.delta = log_uniform_timescales(channels, rng);
  if (with_selective) p.selective = SelectivePredictors::init(channels, state, rng);
  return p;
}

void SsmParams::validate() const {
  DFM_CHECK(A.ndim() == 2, "SsmParams: A must be [d, N], got ", shape_str(A.shape()));
  const auto d = channels(), n = state_size();
  DFM_CHECK(B.shape() == (Shape{n, d}), "SsmParams: B must be ", shape_str({n, d}),
            ", got ", shape_str(B.shape()));
  DFM_CHECK(C.shape() == (Shape{d, n}), "SsmParams: C must be ", shape_str({d, n}),
            ", got ", shape_str(C.shape()));
  DFM_CHECK(D.numel() == d, "SsmParams: D must have ", d, " entries");
  DFM_CHECK(delta.numel() == d, "SsmParams: delta must have ", d, " entries");
  for (double v : delta.data())
    DFM_CHECK(v > 0.0, "SsmParams: timescale delta must be positive, got ", v);
}

std::int64_t DiscreteSsm::channels() const {
  return time_varying ? a_bar.dim(1) : a_bar.dim(0);
}

std::int64_t DiscreteSsm::state_size() const {
  return time_varying ? a_bar.dim(2) : a_bar.dim(1);
}

DiscreteSsm discretize_zoh(const SsmParams& params) {
  params.validate();
  const auto d = params.channels(), n = params.state_size();
  DiscreteSsm out;
  out.a_bar = Tensor({d, n});
  out.b_bar = Tensor({n, d});
  for (std::int64_t c = 0; c < d; ++c) {
    const double dt = params.delta[c];
    for (std::int64_t k = 0; k < n; ++k) {
      const double x = dt * params.A.at({c, k});
      out.a_bar.at({c, k}) = std::exp(x);
      out.b_bar.at({k, c}) = dt * zoh_input_gain(x) * params.B.at({k, c});
    }
  }
  return out;
}

DiscreteSsm discretize_zoh_selective(const Tensor& A, const Tensor& b_tokens,
                                     const Tensor& delta_tokens) {
  DFM_CHECK(A.ndim() == 2, "discretize_zoh_selective: A must be [d, N]");
  const auto d = A.dim(0), n = A.dim(1);
  DFM_CHECK(b_tokens.ndim() == 2 && b_tokens.dim(0) == n,
            "discretize_zoh_selective: B_t must be [N, s], got ",
            shape_str(b_tokens.shape()));
  const auto s = b_tokens.dim(1);
  DFM_CHECK(delta_tokens.shape() == (Shape{d, s}),
            "discretize_zoh_selective: delta_t must be ", shape_str({d, s}));
  DiscreteSsm out;
  out.time_varying = true;
  out.a_bar = Tensor({s, d, n});
  out.b_bar = Tensor({s, n, d});
  for (std::int64_t t = 0; t < s; ++t)
    for (std::int64_t c = 0; c < d; ++c) {
      const double dt = delta_tokens.at({c, t});
      DFM_CHECK(dt > 0.0, "discretize_zoh_selective: nonpositive timescale ", dt);
      for (std::int64_t k = 0; k < n; ++k) {
        const double x = dt * A.at({c, k});
        out.a_bar.at({t, c, k}) = std::exp(x);
        out.b_bar.at({t, k, c}) = dt * zoh_input_gain(x) * b_tokens.at({k, t});
      }
    }
  return out;
}

Tensor ssm_scan(const DiscreteSsm& disc, const Tensor& C, const Tensor& D,
                const Tensor& x) {
  DFM_CHECK(x.ndim() == 2 && x.dim(1) >= 1, "ssm_scan: x must be [d, s] with s >= 1");
  const auto d = disc.channels(), n = disc.state_size(), s = x.dim(1);
  DFM_CHECK(x.dim(0) == d, "ssm_scan: x has ", x.dim(0), " channels, system has ", d);
  DFM_CHECK(D.numel() == d, "ssm_scan: D must have ", d, " entries");
  if (disc.time_varying) {
    DFM_CHECK(disc.a_bar.dim(0) == s, "ssm_scan: system has ", disc.a_bar.dim(0),
              " steps, input has ", s);
    DFM_CHECK(C.shape() == (Shape{n, s}), "ssm_scan: per-token C must be ",
              shape_str({n, s}));
  } else {
    DFM_CHECK(C.shape() == (Shape{d, n}), "ssm_scan: C must be ", shape_str({d, n}),
              ", got ", shape_str(C.shape()));
  }
  Tensor y({d, s});
  std::vector<double> h(static_cast<std::size_t>(n));
  for (std::int64_t c = 0; c < d; ++c) {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::int64_t t = 0; t < s; ++t) {
      const double xt = x.at({c, t});
      double acc = 0.0;
      for (std::int64_t k = 0; k < n; ++k) {
        auto& hk = h[static_cast<std::size_t>(k)];
        if (disc.time_varying) {
          hk = disc.a_bar.at({t, c, k}) * hk + disc.b_bar.at({t, k, c}) * xt;
          acc += C.at({k, t}) * hk;
        } else {
          hk = disc.a_bar.at({c, k}) * hk + disc.b_bar.at({k, c}) * xt;
          acc += C.at({c, k}) * hk;
        }
      }
      y.at({c, t}) = acc + D[c] * xt;
    }
  }
  return y;
}

Tensor ssm_kernel(const DiscreteSsm& disc, const Tensor& C, std::int64_t length) {
  if (disc.time_varying)
    throw UnsupportedMode("ssm_kernel: the convolution form needs time-invariant "
                          "parameters; selective systems must use ssm_scan");
  DFM_CHECK(length >= 1, "ssm_kernel: length must be positive");
  const auto d = disc.channels(), n = disc.state_size();
  DFM_CHECK(C.shape() == (Shape{d, n}), "ssm_kernel: C must be ", shape_str({d, n}));
  Tensor kernel({d, length});
  for (std::int64_t c = 0; c < d; ++c)
    for (std::int64_t k = 0; k < n; ++k) {
      const double a = disc.a_bar.at({c, k});
      double term = C.at({c, k}) * disc.b_bar.at({k, c});
      for (std::int64_t t = 0; t < length; ++t) {
        kernel.at({c, t}) += term;
        term *= a;
      }
    }
  return kernel;
}

Tensor causal_conv_form(const Tensor& kernel, const Tensor& D, const Tensor& x) {
  DFM_CHECK(x.ndim() == 2 && kernel.ndim() == 2 && kernel.dim(0) == x.dim(0) &&
                kernel.dim(1) >= x.dim(1),
            "causal_conv_form: kernel ", shape_str(kernel.shape()),
            " does not cover input ", shape_str(x.shape()));
  DFM_CHECK(D.numel() == x.dim(0), "causal_conv_form: D size mismatch");
  const auto d = x.dim(0), s = x.dim(1);
  Tensor y({d, s});
  for (std::int64_t c = 0; c < d; ++c)
    for (std::int64_t t = 0; t < s; ++t) {
      double acc = D[c] * x.at({c, t});
      for (std::int64_t j = 0; j <= t; ++j) acc += kernel.at({c, j}) * x.at({c, t - j});
      y.at({c, t}) = acc;
    }
  return y;
}

SelectiveParams selective_params(const Tensor& x, const SelectivePredictors& predictors) {
  SelectiveParams out;
  out.B = ops::linear_channels(x, predictors.b_weight, predictors.b_bias);
  out.C = ops::linear_channels(x, predictors.c_weight, predictors.c_bias);
  out.delta = ops::softplus(
      ops::linear_channels(x, predictors.delta_weight, predictors.delta_bias));
  return out;
}

Tensor apply_ssm(const Tensor& x, const SsmParams& params, bool selective,
                 const Tensor& state_input) {
  DFM_CHECK(x.ndim() >= 2, "apply_ssm: input needs [N, d, ...]");
  const auto batch = x.dim(0), d = x.dim(1);
  const auto length = x.numel() / (batch * d);
  DFM_CHECK(params.A.ndim() == 2 && params.A.dim(0) == d, "apply_ssm: A must be [",
            d, ", N], got ", shape_str(params.A.shape()));
  const auto n = params.A.dim(1);

  ops::ScanOperands in;
  in.u_skip = x;
  in.u_state = state_input.defined() ? state_input : x;
  DFM_CHECK(in.u_state.shape() == x.shape(), "apply_ssm: state input shape ",
            shape_str(in.u_state.shape()), " differs from ", shape_str(x.shape()));
  in.A = params.A;
  in.D = params.D;
  if (selective) {
    DFM_CHECK(params.selective.has_value(),
              "apply_ssm: selective mode requested without predictors");
    auto sel = selective_params(x, *params.selective);
    in.B = sel.B;
    in.C = sel.C;
    in.delta = sel.delta;
    in.b_strides = {n * length, 0, length, 1};
    in.c_strides = {n * length, 0, length, 1};
    in.delta_strides = {d * length, length, 0, 1};
  } else {
    DFM_CHECK(params.B.shape() == (Shape{n, d}) && params.C.shape() == (Shape{d, n}) &&
                  params.delta.numel() == d,
              "apply_ssm: static B/C/delta shapes do not match d=", d, " N=", n);
    in.B = params.B;
    in.C = params.C;
    in.delta = params.delta;
    in.b_strides = {0, 1, d, 0};
    in.c_strides = {0, n, 1, 0};
    in.delta_strides = {0, 1, 0, 0};
  }
  return ops::state_space_scan(in, batch, d, length, n);
}

std::int64_t ScanOrder::index_of(GridPos pos) const {
  DFM_CHECK(pos.x >= 1 && pos.x <= width && pos.y >= 1 && pos.y <= height,
            "ScanOrder::index_of: position (", pos.x, ", ", pos.y, ") off the ",
            height, "x", width, " grid");
  return (pos.y - 1) * width + pos.x;
}

ScanOrder sweep_positions(std::int64_t height, std::int64_t width) {
  DFM_CHECK(height >= 1 && width >= 1, "sweep_positions: grid must be non-empty");
  ScanOrder order;
  order.height = height;
  order.width = width;
  order.positions.reserve(static_cast<std::size_t>(height * width));
  for (std::int64_t t = 1; t <= height * width; ++t)
    order.positions.push_back({(t - 1) % width + 1, (t - 1) / width + 1});
  return order;
}

}  // namespace dfm
