// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Clustered wideband MIMO channel generation and frequency/delay transforms.
//
// Each cluster c contributes a rank-N_ray,c term at integer tap tau_c:
//
//   H_k = sqrt(N_r N_t / N_ray) * sum_c sum_j alpha_cj a_r(theta_r) a_t(theta_t)^H
//                               * exp(-j 2 pi k tau_c / K),
//
// with unit-norm ULA steering vectors (half-wavelength spacing), N_ray the
// total ray count over all clusters and alpha_cj ~ CN(0, p_c N_ray / N_ray,c).
// This gives E|[H_k]_ij|^2 = sum_c p_c = 1 and E|[X_tau_c]_ij|^2 = K p_c.

#include "ddsp/core.hpp"
#include "ddsp/dft.hpp"
#include "ddsp/rng.hpp"
#include "ddsp/types.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>

namespace ddsp {

struct ChannelParams {
  Index n_tx = 4;
  Index n_rx = 4;
  Index n_subcarriers = 256;
  Index max_delay_spread = 18;           // D, taps
  std::vector<Index> cluster_delays;     // tau_c < D
  std::vector<double> cluster_powers;    // sum to 1
  std::vector<Index> rays_per_cluster;   // N_ray,c >= 1
  std::vector<double> angle_spread;      // radians, per cluster

  Index n_clusters() const noexcept { return static_cast<Index>(cluster_delays.size()); }

  Index total_rays() const {
    return std::accumulate(rays_per_cluster.begin(), rays_per_cluster.end(), Index{0});
  }

  void validate() const {
    constexpr const char* kStage = "channel";
    require(n_tx >= 1 && n_rx >= 1, kStage, "antenna counts must be >= 1");
    require(n_subcarriers >= 1, kStage, "n_subcarriers must be >= 1");
    require(max_delay_spread >= 1 && max_delay_spread <= n_subcarriers, kStage,
            "max_delay_spread D must satisfy 1 <= D <= K");
    const auto nc = cluster_delays.size();
    require(nc >= 1, kStage, "at least one cluster is required");
    require(cluster_powers.size() == nc && rays_per_cluster.size() == nc &&
                angle_spread.size() == nc,
            kStage, "cluster_delays/powers/rays/angle_spread must have equal length");
    double total = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      require(cluster_delays[c] >= 0 && cluster_delays[c] < max_delay_spread, kStage,
              "cluster delay " + std::to_string(cluster_delays[c]) + " must lie in [0, D)");
      require(cluster_powers[c] >= 0.0, kStage, "cluster powers must be non-negative");
      require(rays_per_cluster[c] >= 1, kStage, "rays_per_cluster must be >= 1");
      require(angle_spread[c] >= 0.0, kStage, "angle_spread must be non-negative");
      total += cluster_powers[c];
    }
    require(std::abs(total - 1.0) <= 1e-12, kStage, "cluster powers must sum to 1");
  }
};

// Three clusters at taps {0, D/4, 3D/4} with powers {0.6, 0.3, 0.1}.
inline ChannelParams default_channel_params(Index n_tx, Index n_rx, Index n_subcarriers,
                                            Index max_delay_spread) {
  ChannelParams p;
  p.n_tx = n_tx;
  p.n_rx = n_rx;
  p.n_subcarriers = n_subcarriers;
  p.max_delay_spread = max_delay_spread;
  p.cluster_delays = {0, max_delay_spread / 4, (3 * max_delay_spread) / 4};
  p.cluster_powers = {0.6, 0.3, 0.1};
  p.rays_per_cluster = {10, 10, 10};
  p.angle_spread = {0.35, 0.35, 0.35};
  return p;
}

struct Ray {
  Index cluster = 0;
  cd gain{1.0, 0.0};
  double aoa = 0.0;  // radians from broadside
  double aod = 0.0;
};

// Unit-norm half-wavelength ULA response: [exp(j pi n sin(theta))]_n / sqrt(N).
inline CVec ula_steering(Index n, double theta) {
  CVec a(n);
  const double s = std::sin(theta);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index i = 0; i < n; ++i) a(i) = std::polar(scale, kPi * static_cast<double>(i) * s);
  return a;
}

// Draws ray gains and angles. Cluster centers are uniform in [-pi/2, pi/2),
// ray angles uniform within +/- angle_spread of the center.
inline std::vector<Ray> draw_rays(const ChannelParams& params, Rng& rng) {
  params.validate();
  const double n_total = static_cast<double>(params.total_rays());
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(params.total_rays()));
  for (Index c = 0; c < params.n_clusters(); ++c) {
    const auto cu = static_cast<std::size_t>(c);
    const double center_r = rng.uniform(-kPi / 2, kPi / 2);
    const double center_t = rng.uniform(-kPi / 2, kPi / 2);
    const double spread = params.angle_spread[cu];
    const double var = params.cluster_powers[cu] * n_total /
                       static_cast<double>(params.rays_per_cluster[cu]);
    for (Index j = 0; j < params.rays_per_cluster[cu]; ++j) {
      Ray ray;
      ray.cluster = c;
      ray.gain = rng.complex_normal(var);
      ray.aoa = center_r + rng.uniform(-spread, spread);
      ray.aod = center_t + rng.uniform(-spread, spread);
      rays.push_back(ray);
    }
  }
  return rays;
}

// Evaluates the clustered model for explicit rays.
inline FreqChannel synthesize_channel(const ChannelParams& params, const std::vector<Ray>& rays) {
  params.validate();
  const Index k_total = params.n_subcarriers;
  const double norm = std::sqrt(static_cast<double>(params.n_rx * params.n_tx) /
                                static_cast<double>(params.total_rays()));
  std::vector<CMat> per_cluster(static_cast<std::size_t>(params.n_clusters()),
                                CMat::Zero(params.n_rx, params.n_tx));
  for (const auto& ray : rays) {
    require_dims(ray.cluster >= 0 && ray.cluster < params.n_clusters(),
                 "synthesize_channel: ray cluster out of range");
    per_cluster[static_cast<std::size_t>(ray.cluster)] +=
        norm * ray.gain * ula_steering(params.n_rx, ray.aoa) *
        ula_steering(params.n_tx, ray.aod).adjoint();
  }
  const Twiddles tw(k_total);
  FreqChannel h(k_total, params.n_rx, params.n_tx);
  for (Index k = 0; k < k_total; ++k) {
    for (Index c = 0; c < params.n_clusters(); ++c) {
      const auto tau = params.cluster_delays[static_cast<std::size_t>(c)];
      h[k] += tw.minus(static_cast<long long>(k) * tau) * per_cluster[static_cast<std::size_t>(c)];
    }
  }
  return h;
}

inline FreqChannel gen_clustered_channel(const ChannelParams& params, Rng& rng) {
  return synthesize_channel(params, draw_rays(params, rng));
}

inline FreqChannel gen_clustered_channel(const ChannelParams& params, std::uint64_t seed) {
  Rng rng(seed, Stream::channel);
  return gen_clustered_channel(params, rng);
}

// X~ = (F~_D^H (x) I) H-bar: first d_taps delay taps of the channel.
inline DelayChannel freq_to_delay(const FreqChannel& h, Index d_taps) {
  const Index k_total = h.subcarriers();
  require_dims(k_total >= 1, "freq_to_delay: empty channel");
  require_dims(d_taps >= 1 && d_taps <= k_total, "freq_to_delay: need 1 <= d_taps <= K");
  const CMat f = partial_dft(k_total, d_taps);
  return DelayChannel(MatrixStack::unflatten(f.adjoint() * h.data.flatten(), h.rows(), h.cols()));
}

// H-bar = (F~_D (x) I) X~.
inline FreqChannel delay_to_freq(const DelayChannel& x, Index n_subcarriers) {
  require_dims(x.taps() >= 1, "delay_to_freq: empty delay channel");
  require_dims(x.taps() <= n_subcarriers, "delay_to_freq: d_taps exceeds K");
  const CMat f = partial_dft(n_subcarriers, x.taps());
  return FreqChannel(MatrixStack::unflatten(f * x.data.flatten(), x.rows(), x.cols()));
}

inline FreqChannel effective_channel(const FreqChannel& h, const MatrixStack& v) {
  require_dims(v.size() == h.subcarriers(), "effective_channel: subcarrier count mismatch");
  require_dims(v.rows() == h.cols(), "effective_channel: precoder rows must equal N_t");
  require_dims(v.cols() <= std::min(h.rows(), h.cols()),
               "effective_channel: stream count L exceeds min(N_t, N_r)");
  FreqChannel out(h.subcarriers(), h.rows(), v.cols());
  for (Index k = 0; k < h.subcarriers(); ++k) out[k].noalias() = h[k] * v[k];
  return out;
}

// H_e,k = H_k V_k.
inline FreqChannel effective_channel(const FreqChannel& h, const SparsePrecoder& v) {
  require_dims(v.subcarriers() == h.subcarriers(), "effective_channel: subcarrier count mismatch");
  return effective_channel(h, v.expand());
}

// Transposes every slice; turns H_k into the uplink view H_k^T.
inline FreqChannel transpose_slices(const FreqChannel& h) {
  FreqChannel out(h.subcarriers(), h.cols(), h.rows());
  for (Index k = 0; k < h.subcarriers(); ++k) out[k] = h[k].transpose();
  return out;
}

struct DelaySupportReport {
  double in_window_fraction = 0.0;
  double out_window_fraction = 0.0;
  double truncation_nmse = 0.0;  // energy outside the first `window` taps / total
};

inline DelaySupportReport delay_support_report(const DelayChannel& x, Index window) {
  require_dims(window > 0 && window <= x.taps(), "delay_support_report: need 0 < window <= taps");
  double inside = 0.0;
  double total = 0.0;
  for (Index d = 0; d < x.taps(); ++d) {
    const double e = x[d].squaredNorm();
    total += e;
    if (d < window) inside += e;
  }
  DelaySupportReport r;
  if (total > 0.0) {
    r.in_window_fraction = inside / total;
    r.out_window_fraction = (total - inside) / total;
    r.truncation_nmse = r.out_window_fraction;
  }
  return r;
}

// Mean |x_d|^2 over all entries of each tap, the per-tap profile used by the
// sparsity report and by genie estimators.
inline RVec tap_power_profile(const DelayChannel& x) {
  RVec p(x.taps());
  const double n = static_cast<double>(x.rows() * x.cols());
  for (Index d = 0; d < x.taps(); ++d) p(d) = x[d].squaredNorm() / n;
  return p;
}

// Expected per-entry tap power E|[X_d]_ij|^2 of the clustered generator over
// `window` taps.
inline RVec prior_tap_variance(const ChannelParams& params, Index window) {
  RVec eps = RVec::Zero(window);
  for (Index c = 0; c < params.n_clusters(); ++c) {
    const auto tau = params.cluster_delays[static_cast<std::size_t>(c)];
    if (tau < window) {
      eps(tau) += static_cast<double>(params.n_subcarriers) *
                  params.cluster_powers[static_cast<std::size_t>(c)];
    }
  }
  return eps;
}

}  // namespace ddsp
