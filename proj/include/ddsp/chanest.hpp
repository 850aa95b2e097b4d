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

// Channel estimators for FDM pilot observations.
//
// Every estimator works per pilot stream n: the samples of stream n live on
// the residue class Omega_a of its symbol, and the per-stream dictionary is
// Phi = rows Omega_a of the K x window partial DFT. Per-stream delay
// coefficients (window x n_obs) are then de-covered and, for uplink sounding,
// transposed back into H_k orientation.

#include "ddsp/channel.hpp"
#include "ddsp/core.hpp"
#include "ddsp/dft.hpp"
#include "ddsp/pilot.hpp"
#include "ddsp/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <limits>
#include <optional>
#include <string_view>

namespace ddsp {

enum class EstimatorKind { ls, antialias, omp, lasso, gamsse };

inline std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::ls: return "ls";
    case EstimatorKind::antialias: return "antialias";
    case EstimatorKind::omp: return "omp";
    case EstimatorKind::lasso: return "lasso";
    case EstimatorKind::gamsse: return "gamsse";
  }
  return "?";
}

inline EstimatorKind parse_estimator_kind(std::string_view s) {
  for (auto k : {EstimatorKind::ls, EstimatorKind::antialias, EstimatorKind::omp,
                 EstimatorKind::lasso, EstimatorKind::gamsse}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("chanest", "unknown estimator '" + std::string(s) + "'");
}

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::antialias;
  Index window = 0;            // delay window (D or D_eff)
  Index omp_max_taps = 0;      // 0 means "window"
  double omp_residual_tol = 1.0;
  double lasso_reg = 0.0;
  Index lasso_max_iter = 2000;
  double lasso_tol = 1e-10;

  Index effective_omp_max_taps() const { return omp_max_taps > 0 ? omp_max_taps : window; }

  void validate(Index n_subcarriers) const {
    constexpr const char* kStage = "chanest";
    if (kind != EstimatorKind::ls) {
      require(window >= 1 && window <= n_subcarriers, kStage, "window must lie in [1, K]");
    }
    require(omp_max_taps >= 0 && effective_omp_max_taps() <= window, kStage,
            "omp_max_taps must not exceed the window");
    require(omp_residual_tol > 0.0, kStage, "omp_residual_tol must be positive");
    require(lasso_reg >= 0.0, kStage, "lasso_reg must be non-negative");
    require(lasso_max_iter >= 1, kStage, "lasso_max_iter must be >= 1");
    require(lasso_tol > 0.0, kStage, "lasso_tol must be positive");
  }
};

// Iterative sub-problem bookkeeping (OMP residual norms, ISTA objectives).
struct SolverInfo {
  Index iterations = 0;
  bool converged = true;
  std::vector<double> trace;
  std::vector<Index> support;  // OMP only
};

struct ChannelEstimate {
  FreqChannel freq;
  DelayChannel delay;
  std::optional<RVec> tap_posterior_variance;  // gamsse only
  std::vector<SolverInfo> solver;              // one per sub-problem, iterative kinds only
};

namespace detail {

inline CMat stream_samples(const PilotObservation& obs, Index stream) {
  const auto& sched = obs.schedule;
  const auto& omega = sched.omega[static_cast<std::size_t>(stream)];
  const CMat& y = obs.symbols[static_cast<std::size_t>(sched.symbol_of(stream))];
  CMat out(static_cast<Index>(omega.size()), y.cols());
  for (Index i = 0; i < out.rows(); ++i) out.row(i) = y.row(omega[static_cast<std::size_t>(i)]);
  return out;
}

inline CMat stream_dictionary(const PilotObservation& obs, Index stream, Index window) {
  const auto& omega = obs.schedule.omega[static_cast<std::size_t>(stream)];
  return partial_dft_rows(obs.schedule.n_subcarriers, window, omega);
}

// G_d = (G S)_d S^H, transposed back for uplink sounding.
inline CMat uncover(const PilotObservation& obs, const CMat& covered) {
  CMat g = covered * obs.schedule.cover.adjoint();
  if (obs.link == PilotLink::uplink) return g.transpose();
  return g;
}

// coeffs[n] is window x n_obs for stream n.
inline ChannelEstimate assemble_from_delay(const PilotObservation& obs,
                                           const std::vector<CMat>& coeffs) {
  const Index window = coeffs.front().rows();
  const Index n_obs = coeffs.front().cols();
  const Index n_streams = obs.schedule.n_streams;
  ChannelEstimate est;
  std::vector<CMat> taps;
  taps.reserve(static_cast<std::size_t>(window));
  CMat covered(n_obs, n_streams);
  for (Index d = 0; d < window; ++d) {
    for (Index n = 0; n < n_streams; ++n) {
      covered.col(n) = coeffs[static_cast<std::size_t>(n)].row(d).transpose();
    }
    taps.push_back(uncover(obs, covered));
  }
  est.delay = DelayChannel(MatrixStack(std::move(taps)));
  est.freq = delay_to_freq(est.delay, obs.schedule.n_subcarriers);
  return est;
}

inline void check_identifiable(const PilotObservation& obs, Index window) {
  const auto& s = obs.schedule;
  require(window >= 1, "chanest", "window must be >= 1");
  require(s.n_subcarriers >= window * s.streams_per_symbol, "chanest",
          "identifiability requires K >= window * A (K=" + std::to_string(s.n_subcarriers) +
              ", window=" + std::to_string(window) +
              ", A=" + std::to_string(s.streams_per_symbol) + ")");
}

inline void check_observation(const PilotObservation& obs) {
  require_dims(!obs.symbols.empty(), "chanest: empty observation");
  require_dims(static_cast<Index>(obs.symbols.size()) == obs.schedule.n_symbols,
               "chanest: observation symbol count differs from schedule");
  for (const auto& y : obs.symbols) {
    require_dims(y.rows() == obs.schedule.n_subcarriers,
                 "chanest: observation subcarrier count differs from schedule");
  }
}

}  // namespace detail

// Per-stream anti-aliasing (delay-window least squares):
//   x = (Phi^H Phi)^{-1} Phi^H y|Omega,  h = F~_window x.
inline ChannelEstimate antialias_estimate(const PilotObservation& obs, Index window) {
  detail::check_observation(obs);
  detail::check_identifiable(obs, window);
  std::vector<CMat> coeffs;
  for (Index n = 0; n < obs.schedule.n_streams; ++n) {
    const CMat phi = detail::stream_dictionary(obs, n, window);
    const Eigen::LLT<CMat> normal(phi.adjoint() * phi);
    if (normal.info() != Eigen::Success) {
      throw NumericalError("antialias_estimate: singular normal matrix for stream " +
                           std::to_string(n));
    }
    coeffs.push_back(normal.solve(phi.adjoint() * detail::stream_samples(obs, n)));
  }
  return detail::assemble_from_delay(obs, coeffs);
}

// Per-occupied-subcarrier LS (pilot value 1 gives y itself), with
// nearest-occupied-subcarrier hold on the others. Ties go to the lower index.
inline ChannelEstimate ls_estimate(const PilotObservation& obs) {
  detail::check_observation(obs);
  const auto& s = obs.schedule;
  const Index k_total = s.n_subcarriers;
  const Index a_per = s.streams_per_symbol;
  const Index per_class = k_total / a_per;
  const Index n_obs = obs.n_obs_antennas();
  std::vector<CMat> covered(static_cast<std::size_t>(k_total), CMat(n_obs, s.n_streams));
  for (Index n = 0; n < s.n_streams; ++n) {
    const Index a = s.residue_of(n);
    const CMat& y = obs.symbols[static_cast<std::size_t>(s.symbol_of(n))];
    for (Index k = 0; k < k_total; ++k) {
      Index i = 0;
      if (k > a) {
        i = (k - a) / a_per;
        const Index below = k - (a + a_per * i);
        const Index above = a + a_per * (i + 1) - k;
        if (above < below && i + 1 < per_class) ++i;
      }
      covered[static_cast<std::size_t>(k)].col(n) = y.row(a + a_per * i).transpose();
    }
  }
  ChannelEstimate est;
  std::vector<CMat> slices;
  slices.reserve(covered.size());
  for (const auto& c : covered) slices.push_back(detail::uncover(obs, c));
  est.freq = FreqChannel(MatrixStack(std::move(slices)));
  est.delay = freq_to_delay(est.freq, k_total);
  return est;
}

// Single-vector OMP on a fixed dictionary. Stops when the residual norm drops
// to `stop_norm` or `max_atoms` atoms are selected; the coefficients are an
// LS re-fit on the selected support. `info.trace` holds residual norms, the
// first entry being ||y||.
inline CVec omp_solve(const CMat& phi, const CVec& y, Index max_atoms, double stop_norm,
                      SolverInfo& info) {
  const Index n_atoms = phi.cols();
  const RVec col_norms = phi.colwise().norm().transpose();
  CVec x = CVec::Zero(n_atoms);
  CVec residual = y;
  double rnorm = residual.norm();
  const double floor = 1e-13 * std::max(rnorm, std::numeric_limits<double>::min());
  info = SolverInfo{};
  info.trace.push_back(rnorm);
  std::vector<bool> used(static_cast<std::size_t>(n_atoms), false);
  while (static_cast<Index>(info.support.size()) < max_atoms && rnorm > stop_norm &&
         rnorm > floor) {
    const CVec corr = phi.adjoint() * residual;
    Index best = -1;
    double best_score = -1.0;
    for (Index d = 0; d < n_atoms; ++d) {
      if (used[static_cast<std::size_t>(d)] || col_norms(d) == 0.0) continue;
      const double score = std::abs(corr(d)) / col_norms(d);
      if (score > best_score) {
        best_score = score;
        best = d;
      }
    }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = true;
    info.support.push_back(best);
    CMat sub(phi.rows(), static_cast<Index>(info.support.size()));
    for (Index i = 0; i < sub.cols(); ++i) sub.col(i) = phi.col(info.support[static_cast<std::size_t>(i)]);
    const CVec coef = sub.colPivHouseholderQr().solve(y);
    x.setZero();
    for (Index i = 0; i < sub.cols(); ++i) x(info.support[static_cast<std::size_t>(i)]) = coef(i);
    residual = y - sub * coef;
    rnorm = residual.norm();
    info.trace.push_back(rnorm);
    ++info.iterations;
  }
  return x;
}

// OMP per (stream, observing antenna). The stopping threshold is
// omp_residual_tol * sqrt(|Omega|) * sigma.
inline ChannelEstimate omp_estimate(const PilotObservation& obs, const EstimatorConfig& cfg) {
  detail::check_observation(obs);
  cfg.validate(obs.schedule.n_subcarriers);
  detail::check_identifiable(obs, cfg.window);
  std::vector<CMat> coeffs;
  std::vector<SolverInfo> infos;
  for (Index n = 0; n < obs.schedule.n_streams; ++n) {
    const CMat phi = detail::stream_dictionary(obs, n, cfg.window);
    const CMat y = detail::stream_samples(obs, n);
    const double stop = cfg.omp_residual_tol * std::sqrt(static_cast<double>(y.rows())) *
                        std::sqrt(obs.noise_var);
    CMat x(cfg.window, y.cols());
    for (Index r = 0; r < y.cols(); ++r) {
      SolverInfo info;
      x.col(r) = omp_solve(phi, y.col(r), cfg.effective_omp_max_taps(), stop, info);
      infos.push_back(std::move(info));
    }
    coeffs.push_back(std::move(x));
  }
  auto est = detail::assemble_from_delay(obs, coeffs);
  est.solver = std::move(infos);
  return est;
}

// Row-group LASSO objective ||Y - Phi X||_F^2 + reg * sum_d ||X[d, :]||_2.
inline double group_lasso_objective(const CMat& phi, const CMat& y, const CMat& x, double reg) {
  return (y - phi * x).squaredNorm() + reg * x.rowwise().norm().sum();
}

// ISTA for the row-group LASSO with step 1 / (2 lambda_max(Phi^H Phi)).
// Stops on relative objective change below `tol`.
inline CMat group_lasso_ista(const CMat& phi, const CMat& y, double reg, Index max_iter, double tol,
                             SolverInfo& info) {
  const CMat gram = phi.adjoint() * phi;
  const CMat phi_h_y = phi.adjoint() * y;
  const double lmax = Eigen::SelfAdjointEigenSolver<CMat>(gram, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .maxCoeff();
  info = SolverInfo{};
  CMat x = CMat::Zero(phi.cols(), y.cols());
  if (lmax <= 0.0) return x;
  const double step = 1.0 / (2.0 * lmax);
  const double thresh = step * reg;
  double obj = group_lasso_objective(phi, y, x, reg);
  info.trace.push_back(obj);
  info.converged = false;
  for (Index it = 0; it < max_iter; ++it) {
    CMat z = x - step * 2.0 * (gram * x - phi_h_y);
    for (Index d = 0; d < z.rows(); ++d) {
      const double nrm = z.row(d).norm();
      z.row(d) *= nrm > thresh ? (1.0 - thresh / nrm) : 0.0;
    }
    x = std::move(z);
    const double next = group_lasso_objective(phi, y, x, reg);
    info.trace.push_back(next);
    ++info.iterations;
    const double change = std::abs(obj - next) / std::max(obj, std::numeric_limits<double>::min());
    obj = next;
    if (change < tol) {
      info.converged = true;
      break;
    }
  }
  return x;
}

// Group LASSO per stream, grouping each delay tap across observing antennas.
inline ChannelEstimate lasso_estimate(const PilotObservation& obs, const EstimatorConfig& cfg) {
  detail::check_observation(obs);
  cfg.validate(obs.schedule.n_subcarriers);
  detail::check_identifiable(obs, cfg.window);
  std::vector<CMat> coeffs;
  std::vector<SolverInfo> infos;
  for (Index n = 0; n < obs.schedule.n_streams; ++n) {
    SolverInfo info;
    coeffs.push_back(group_lasso_ista(detail::stream_dictionary(obs, n, cfg.window),
                                      detail::stream_samples(obs, n), cfg.lasso_reg,
                                      cfg.lasso_max_iter, cfg.lasso_tol, info));
    infos.push_back(std::move(info));
  }
  auto est = detail::assemble_from_delay(obs, coeffs);
  est.solver = std::move(infos);
  return est;
}

// Genie-aided per-tap scalar LMMSE on top of the anti-aliasing estimate:
//   x_d <- eps_d / (eps_d + s_d) * x_LS,d,  s_d = sigma^2 [(Phi^H Phi)^{-1}]_dd.
// `true_tap_variance` has one entry per tap of the window.
inline ChannelEstimate gamsse_estimate(const PilotObservation& obs, const RVec& true_tap_variance) {
  detail::check_observation(obs);
  const Index window = true_tap_variance.size();
  detail::check_identifiable(obs, window);
  require((true_tap_variance.array() >= 0.0).all(), "chanest",
          "genie tap variances must be non-negative");
  std::vector<CMat> coeffs;
  RVec posterior = RVec::Zero(window);
  for (Index n = 0; n < obs.schedule.n_streams; ++n) {
    const CMat phi = detail::stream_dictionary(obs, n, window);
    const Eigen::LLT<CMat> normal(phi.adjoint() * phi);
    if (normal.info() != Eigen::Success) {
      throw NumericalError("gamsse_estimate: singular normal matrix for stream " +
                           std::to_string(n));
    }
    CMat x = normal.solve(phi.adjoint() * detail::stream_samples(obs, n));
    const CMat inv = normal.solve(CMat::Identity(window, window));
    for (Index d = 0; d < window; ++d) {
      const double eps = true_tap_variance(d);
      const double err = obs.noise_var * inv(d, d).real();
      const double gain = eps > 0.0 ? eps / (eps + err) : 0.0;
      x.row(d) *= gain;
      // diag((Phi^H Phi)^{-1}) is the same for every residue class.
      posterior(d) = eps > 0.0 ? eps * err / (eps + err) : 0.0;
    }
    coeffs.push_back(std::move(x));
  }
  auto est = detail::assemble_from_delay(obs, coeffs);
  est.tap_posterior_variance = std::move(posterior);
  return est;
}

// Dispatches on cfg.kind. `genie_tap_variance` is required for gamsse.
inline ChannelEstimate estimate_channel(const PilotObservation& obs, const EstimatorConfig& cfg,
                                        const std::optional<RVec>& genie_tap_variance = {}) {
  switch (cfg.kind) {
    case EstimatorKind::ls: return ls_estimate(obs);
    case EstimatorKind::antialias: return antialias_estimate(obs, cfg.window);
    case EstimatorKind::omp: return omp_estimate(obs, cfg);
    case EstimatorKind::lasso: return lasso_estimate(obs, cfg);
    case EstimatorKind::gamsse:
      require(genie_tap_variance.has_value(), "chanest", "gamsse needs genie tap variances");
      require(genie_tap_variance->size() == cfg.window, "chanest",
              "genie tap variance length must equal the window");
      return gamsse_estimate(obs, *genie_tap_variance);
  }
  throw ConfigError("chanest", "unhandled estimator kind");
}

// Full L-symbol DMRS: H_e,k = Y_p,k R_p^H / (1 + sigma^2).
inline FreqChannel lmmse_dmrs_full(const std::vector<CMat>& y_p, const CMat& r_p, double noise_var) {
  require(noise_var >= 0.0, "chanest", "noise variance must be non-negative");
  require(unitarity_defect(r_p) <= 1e-8, "chanest", "R_p must be unitary");
  FreqChannel h(static_cast<Index>(y_p.size()), y_p.empty() ? 0 : y_p.front().rows(), r_p.rows());
  const double shrink = 1.0 / (1.0 + noise_var);
  for (Index k = 0; k < h.subcarriers(); ++k) {
    const CMat& y = y_p[static_cast<std::size_t>(k)];
    require_dims(y.cols() == r_p.rows(), "lmmse_dmrs_full: Y_p,k must have L columns");
    h[k] = shrink * y * r_p.adjoint();
  }
  return h;
}

// ||est - truth||_F^2 / ||truth||_F^2.
inline double nmse(const MatrixStack& estimate, const MatrixStack& truth) {
  const double denom = truth.energy();
  require(denom > 0.0, "chanest", "nmse: truth has zero energy");
  return squared_distance(estimate, truth) / denom;
}

inline double nmse(const FreqChannel& estimate, const FreqChannel& truth) {
  return nmse(estimate.data, truth.data);
}

inline double nmse(const DelayChannel& estimate, const DelayChannel& truth) {
  return nmse(estimate.data, truth.data);
}

}  // namespace ddsp
