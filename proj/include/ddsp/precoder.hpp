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

// Precoder design.
//
// The delay-sparse precoder keeps only D_v delay taps, V_k = A_k W~ with
// A_k = f_k^T (x) I_Nt and f_k the k-th row of the K x D_v partial DFT. It is
// found by block coordinate descent on the EVM objective
//
//   J(W~, {U_k}) = sum_k ||I_L - U_k^H H_k V_k||_F^2 + sigma^2 ||U_k||_F^2
//   s.t. ||W~||_F^2 <= K P_T,
//
// alternating the closed-form LMMSE decorrelators U_k and the regularized
// normal equation for W~ whose multiplier is located by bisection.
//
// The normal matrix G = sum_k A_k^H M_k A_k (M_k = H_k^H U_k U_k^H H_k) has
// block (d, d') = T_{d-d'}, T_delta = (1/K) sum_k exp(+j 2 pi k delta / K) M_k,
// so it is assembled from D_v block sums instead of K Kronecker products.

#include "ddsp/channel.hpp"
#include "ddsp/core.hpp"
#include "ddsp/dft.hpp"
#include "ddsp/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <optional>
#include <sstream>
#include <string_view>

namespace ddsp {

inline Index effective_delay_spread(Index delay_spread, Index precoder_taps) {
  require(delay_spread >= 1 && precoder_taps >= 1, "precoder", "D and D_v must be >= 1");
  return delay_spread + precoder_taps - 1;
}

namespace detail {

inline void check_streams(const FreqChannel& h, Index streams, Index limit) {
  require_dims(h.subcarriers() >= 1, "precoder: empty channel");
  require(streams >= 1 && streams <= limit, "precoder",
          "stream count L=" + std::to_string(streams) + " must lie in [1, " +
              std::to_string(limit) + "]");
}

}  // namespace detail

// Per-subcarrier SVD beamforming: V_k = sqrt(P_T / L) * (top-L right singular
// vectors of H_k). Returned as a full-width (D_v = K) delay precoder; its
// delay profile is generally dense.
inline SparsePrecoder svd_per_subcarrier(const FreqChannel& h, Index streams, double power) {
  detail::check_streams(h, streams, std::min(h.rows(), h.cols()));
  require(power > 0.0, "precoder", "power budget must be positive");
  const double scale = std::sqrt(power / static_cast<double>(streams));
  FreqChannel v(h.subcarriers(), h.cols(), streams);
  for (Index k = 0; k < h.subcarriers(); ++k) {
    Eigen::JacobiSVD<CMat> svd(h[k], Eigen::ComputeFullV);
    CMat right = svd.matrixV().leftCols(streams);
    canonicalize_column_phases(right);
    v[k] = scale * right;
  }
  return SparsePrecoder::from_taps(freq_to_delay(v, h.subcarriers()).data, h.subcarriers(), power);
}

// Top-L eigenvectors of C_h = sum_k H_k^H H_k, descending, phase-canonical.
inline CMat covariance_eigenvectors(const FreqChannel& h, Index streams) {
  CMat c = CMat::Zero(h.cols(), h.cols());
  for (Index k = 0; k < h.subcarriers(); ++k) c.noalias() += h[k].adjoint() * h[k];
  Eigen::SelfAdjointEigenSolver<CMat> eig(c);
  CMat top(h.cols(), streams);
  for (Index i = 0; i < streams; ++i) top.col(i) = eig.eigenvectors().col(h.cols() - 1 - i);
  canonicalize_column_phases(top);
  return top;
}

// One precoder V = sqrt(P_T / L) * eigvecs(C_h) shared by every subcarrier,
// i.e. a single delay tap W_0 = sqrt(K) V.
inline SparsePrecoder common_covariance_precoder(const FreqChannel& h, Index streams, double power) {
  detail::check_streams(h, streams, h.cols());
  require(power > 0.0, "precoder", "power budget must be positive");
  const double k = static_cast<double>(h.subcarriers());
  CMat w = std::sqrt(k * power / static_cast<double>(streams)) * covariance_eigenvectors(h, streams);
  return SparsePrecoder(std::move(w), 1, h.subcarriers(), power);
}

// V_k = A_k W~ for every subcarrier.
inline MatrixStack expand_precoder(const SparsePrecoder& w) { return w.expand(); }

struct Decorrelators {
  MatrixStack u;  // U_k: N_r x L
};

// U = E (E^H E + sigma^2 I)^{-1}. At sigma^2 = 0 the inverse is a
// pseudo-inverse with a 1e-12 eigenvalue floor.
inline CMat lmmse_receive_filter(const CMat& e, double noise_var) {
  const Index l = e.cols();
  const CMat gram = e.adjoint() * e;
  if (noise_var > 0.0) {
    const Eigen::LLT<CMat> llt(gram + noise_var * CMat::Identity(l, l));
    return llt.solve(e.adjoint()).adjoint();
  }
  Eigen::SelfAdjointEigenSolver<CMat> eig(gram);
  RVec inv = eig.eigenvalues();
  for (Index i = 0; i < inv.size(); ++i) inv(i) = inv(i) > 1e-12 ? 1.0 / inv(i) : 0.0;
  return e * eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().adjoint();
}

inline Decorrelators update_decorrelators(const FreqChannel& h, const MatrixStack& v,
                                          double noise_var) {
  require(noise_var >= 0.0, "precoder", "noise variance must be non-negative");
  require_dims(v.size() == h.subcarriers() && v.rows() == h.cols(),
               "update_decorrelators: precoder shape mismatch");
  Decorrelators out{MatrixStack(h.subcarriers(), h.rows(), v.cols())};
  for (Index k = 0; k < h.subcarriers(); ++k) {
    out.u[k] = lmmse_receive_filter(h[k] * v[k], noise_var);
  }
  return out;
}

inline Decorrelators update_decorrelators(const FreqChannel& h, const SparsePrecoder& v,
                                          double noise_var) {
  return update_decorrelators(h, v.expand(), noise_var);
}

struct EvmTerms {
  double distortion = 0.0;  // sum_k ||I - U_k^H H_k V_k||_F^2
  double noise = 0.0;       // sigma^2 sum_k ||U_k||_F^2
  double total() const { return distortion + noise; }
};

inline EvmTerms evm_terms(const FreqChannel& h, const MatrixStack& v, const Decorrelators& u,
                          double noise_var) {
  require_dims(v.size() == h.subcarriers() && u.u.size() == h.subcarriers(),
               "evm_objective: subcarrier count mismatch");
  EvmTerms t;
  for (Index k = 0; k < h.subcarriers(); ++k) {
    const Index l = v[k].cols();
    t.distortion += (CMat::Identity(l, l) - u.u[k].adjoint() * h[k] * v[k]).squaredNorm();
    t.noise += noise_var * u.u[k].squaredNorm();
  }
  return t;
}

inline double evm_objective(const FreqChannel& h, const MatrixStack& v, const Decorrelators& u,
                            double noise_var) {
  return evm_terms(h, v, u, noise_var).total();
}

inline double evm_objective(const FreqChannel& h, const SparsePrecoder& v, const Decorrelators& u,
                            double noise_var) {
  return evm_objective(h, v.expand(), u, noise_var);
}

// Normal-equation pieces of the W~ sub-problem: G (D_v N_t square) and the
// right-hand side B (D_v N_t x L).
struct DelayNormalEquation {
  CMat gram;
  CMat rhs;
};

inline DelayNormalEquation assemble_delay_normal_equation(const FreqChannel& h,
                                                          const Decorrelators& u, Index d_v) {
  const Index k_total = h.subcarriers();
  const Index n_tx = h.cols();
  require(d_v >= 1 && d_v <= k_total, "precoder", "D_v must lie in [1, K]");
  require_dims(u.u.size() == k_total && u.u.rows() == h.rows(),
               "update_delay_precoder: decorrelator shape mismatch");
  const Index l = u.u.cols();
  std::vector<CMat> m(static_cast<std::size_t>(k_total));
  std::vector<CMat> b(static_cast<std::size_t>(k_total));
  for (Index k = 0; k < k_total; ++k) {
    const CMat q = u.u[k].adjoint() * h[k];  // L x N_t
    m[static_cast<std::size_t>(k)] = q.adjoint() * q;
    b[static_cast<std::size_t>(k)] = q.adjoint();
  }
  const Twiddles tw(k_total);
  const double inv_k = 1.0 / static_cast<double>(k_total);
  const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(k_total));
  DelayNormalEquation eq{CMat(d_v * n_tx, d_v * n_tx), CMat(d_v * n_tx, l)};
  std::vector<CMat> toeplitz(static_cast<std::size_t>(d_v), CMat::Zero(n_tx, n_tx));
  for (Index delta = 0; delta < d_v; ++delta) {
    CMat& t = toeplitz[static_cast<std::size_t>(delta)];
    CMat rhs = CMat::Zero(n_tx, l);
    for (Index k = 0; k < k_total; ++k) {
      const cd ph = tw.plus(static_cast<long long>(k) * delta);
      t += ph * m[static_cast<std::size_t>(k)];
      rhs += ph * b[static_cast<std::size_t>(k)];
    }
    t *= inv_k;
    eq.rhs.middleRows(delta * n_tx, n_tx) = inv_sqrt_k * rhs;
  }
  for (Index d = 0; d < d_v; ++d) {
    for (Index dp = 0; dp < d_v; ++dp) {
      eq.gram.block(d * n_tx, dp * n_tx, n_tx, n_tx) =
          d >= dp ? toeplitz[static_cast<std::size_t>(d - dp)]
                  : CMat(toeplitz[static_cast<std::size_t>(dp - d)].adjoint());
    }
  }
  return eq;
}

struct PowerSearchOptions {
  double rel_tol = 1e-10;   // |P - budget| / budget at an active constraint
  Index max_halvings = 200;
  Index max_doublings = 1000;
};

struct DelayPrecoderUpdate {
  SparsePrecoder precoder;
  double upsilon = 0.0;
  bool power_active = false;
  Index halvings = 0;
};

namespace detail {

inline std::optional<CMat> regularized_solve(const DelayNormalEquation& eq, double upsilon) {
  const Index n = eq.gram.rows();
  const Eigen::LLT<CMat> llt(eq.gram + upsilon * CMat::Identity(n, n));
  if (llt.info() != Eigen::Success) return std::nullopt;
  CMat w = llt.solve(eq.rhs);
  if (!w.allFinite()) return std::nullopt;
  return w;
}

}  // namespace detail

// W~ = (G + upsilon I)^{-1} B with upsilon = 0 if that is feasible, else the
// bisection root of ||W~(upsilon)||^2 = K P_T. The returned point is always
// the feasible end of the bracket.
inline DelayPrecoderUpdate update_delay_precoder(const FreqChannel& h, const Decorrelators& u,
                                                 Index d_v, double power,
                                                 const PowerSearchOptions& opts = {}) {
  require(power > 0.0, "precoder", "power budget must be positive");
  const auto eq = assemble_delay_normal_equation(h, u, d_v);
  const double budget = static_cast<double>(h.subcarriers()) * power;
  DelayPrecoderUpdate out;

  if (auto w0 = detail::regularized_solve(eq, 0.0); w0 && w0->squaredNorm() <= budget) {
    out.precoder = SparsePrecoder(std::move(*w0), d_v, h.subcarriers(), power);
    return out;
  }

  double lo = 0.0;
  double hi = 1.0;
  std::optional<CMat> w_hi;
  for (Index i = 0;; ++i) {
    w_hi = detail::regularized_solve(eq, hi);
    if (w_hi && w_hi->squaredNorm() <= budget) break;
    if (i >= opts.max_doublings) {
      throw NumericalError("update_delay_precoder: no feasible multiplier bracket found");
    }
    lo = hi;
    hi *= 2.0;
  }
  double p_hi = w_hi->squaredNorm();
  Index halvings = 0;
  while ((budget - p_hi) / budget > opts.rel_tol) {
    const double mid = 0.5 * (lo + hi);
    if (halvings >= opts.max_halvings || mid <= lo || mid >= hi) {
      if ((budget - p_hi) / budget <= 1e-6) break;
      std::ostringstream msg;
      msg << "update_delay_precoder: bisection did not converge after " << halvings
          << " halvings (bracket [" << lo << ", " << hi << "], power " << p_hi << ", budget "
          << budget << ")";
      throw NumericalError(msg.str());
    }
    auto w_mid = detail::regularized_solve(eq, mid);
    ++halvings;
    if (!w_mid || w_mid->squaredNorm() > budget) {
      lo = mid;
    } else {
      hi = mid;
      p_hi = w_mid->squaredNorm();
      w_hi = std::move(w_mid);
    }
  }
  out.precoder = SparsePrecoder(std::move(*w_hi), d_v, h.subcarriers(), power);
  out.upsilon = hi;
  out.power_active = true;
  out.halvings = halvings;
  return out;
}

// Same update with a supplied multiplier; the result is scaled down onto the
// power budget if it exceeds it.
inline DelayPrecoderUpdate update_delay_precoder_fixed(const FreqChannel& h,
                                                       const Decorrelators& u, Index d_v,
                                                       double power, double upsilon) {
  require(power > 0.0, "precoder", "power budget must be positive");
  require(upsilon >= 0.0, "precoder", "supplied multiplier must be non-negative");
  const auto eq = assemble_delay_normal_equation(h, u, d_v);
  auto w = detail::regularized_solve(eq, upsilon);
  if (!w) {
    throw NumericalError("update_delay_precoder_fixed: singular system at upsilon=" +
                         std::to_string(upsilon));
  }
  const double budget = static_cast<double>(h.subcarriers()) * power;
  DelayPrecoderUpdate out;
  out.upsilon = upsilon;
  if (w->squaredNorm() > budget) {
    *w *= std::sqrt(budget / w->squaredNorm());
    out.power_active = true;
  }
  out.precoder = SparsePrecoder(std::move(*w), d_v, h.subcarriers(), power);
  return out;
}

struct BcdOptions {
  Index max_iters = 30;
  double tol = 1e-6;
  bool fixed_iterations = false;   // run exactly max_iters, ignore tol
  std::vector<double> multipliers; // per-iteration upsilon; empty = bisection
  PowerSearchOptions power;

  static BcdOptions optimized() { return {}; }

  static BcdOptions unrolled(Index iterations = 3) {
    BcdOptions o;
    o.max_iters = iterations;
    o.fixed_iterations = true;
    return o;
  }
};

// Entry 0 describes the initialization; entry t >= 1 the state after the
// t-th (W~, U) sweep.
struct BcdTrace {
  std::vector<double> objective;
  std::vector<double> distortion;
  std::vector<double> noise_term;
  std::vector<double> upsilon;
  std::vector<double> power;
  std::vector<bool> power_active;
  Index iterations = 0;
  bool converged = false;
};

struct BcdResult {
  SparsePrecoder precoder;
  Decorrelators decorrelators;
  BcdTrace trace;
};

// Delay truncation of the common-covariance precoder, padded to D_v taps and
// scaled to the full budget K P_T.
inline SparsePrecoder bcd_initial_precoder(const FreqChannel& h, Index streams, Index d_v,
                                           double power) {
  const auto common = common_covariance_precoder(h, streams, power);
  CMat w = CMat::Zero(d_v * h.cols(), streams);
  w.topRows(h.cols()) = common.w_delay();
  const double p = w.squaredNorm();
  if (p > 0.0) w *= std::sqrt(static_cast<double>(h.subcarriers()) * power / p);
  return SparsePrecoder(std::move(w), d_v, h.subcarriers(), power);
}

inline BcdResult evm_bcd_precoder(const FreqChannel& h, Index streams, Index d_v, double power,
                                  double noise_var, const BcdOptions& opts = {}) {
  detail::check_streams(h, streams, std::min(h.rows(), h.cols()));
  require(d_v >= 1 && d_v <= h.subcarriers(), "precoder", "D_v must lie in [1, K]");
  require(opts.max_iters >= 1, "precoder", "max_iters must be >= 1");
  require(noise_var >= 0.0, "precoder", "noise variance must be non-negative");
  require(opts.multipliers.empty() ||
              static_cast<Index>(opts.multipliers.size()) >= opts.max_iters,
          "precoder", "supplied multipliers must cover every iteration");

  BcdResult res;
  auto record = [&](const MatrixStack& v, double ups, bool active) {
    const auto t = evm_terms(h, v, res.decorrelators, noise_var);
    res.trace.objective.push_back(t.total());
    res.trace.distortion.push_back(t.distortion);
    res.trace.noise_term.push_back(t.noise);
    res.trace.upsilon.push_back(ups);
    res.trace.power.push_back(res.precoder.power());
    res.trace.power_active.push_back(active);
  };

  res.precoder = bcd_initial_precoder(h, streams, d_v, power);
  MatrixStack v = res.precoder.expand();
  res.decorrelators = update_decorrelators(h, v, noise_var);
  record(v, 0.0, false);

  for (Index it = 0; it < opts.max_iters; ++it) {
    auto step = opts.multipliers.empty()
                    ? update_delay_precoder(h, res.decorrelators, d_v, power, opts.power)
                    : update_delay_precoder_fixed(h, res.decorrelators, d_v, power,
                                                  opts.multipliers[static_cast<std::size_t>(it)]);
    res.precoder = std::move(step.precoder);
    v = res.precoder.expand();
    res.decorrelators = update_decorrelators(h, v, noise_var);
    record(v, step.upsilon, step.power_active);
    ++res.trace.iterations;

    const double prev = res.trace.objective[res.trace.objective.size() - 2];
    const double cur = res.trace.objective.back();
    if (!opts.fixed_iterations &&
        std::abs(prev - cur) <= opts.tol * std::max(std::abs(prev), 1e-300)) {
      res.trace.converged = true;
      break;
    }
  }
  return res;
}

enum class PrecoderKind { svd_per_subcarrier, common, evm_bcd, evm_bcd_unrolled };

inline std::string_view to_string(PrecoderKind k) {
  switch (k) {
    case PrecoderKind::svd_per_subcarrier: return "svd_per_subcarrier";
    case PrecoderKind::common: return "common";
    case PrecoderKind::evm_bcd: return "evm_bcd";
    case PrecoderKind::evm_bcd_unrolled: return "evm_bcd_unrolled";
  }
  return "?";
}

inline PrecoderKind parse_precoder_kind(std::string_view s) {
  for (auto k : {PrecoderKind::svd_per_subcarrier, PrecoderKind::common, PrecoderKind::evm_bcd,
                 PrecoderKind::evm_bcd_unrolled}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("precoder", "unknown precoder kind '" + std::string(s) + "'");
}

}  // namespace ddsp
