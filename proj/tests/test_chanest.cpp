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

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <set>

using namespace ddsp;

namespace {

// SISO channel with the given delay taps.
FreqChannel siso_from_taps(Index k, const std::vector<std::pair<Index, cd>>& taps) {
  Index width = 1;
  for (const auto& t : taps) width = std::max(width, t.first + 1);
  DelayChannel x(width, 1, 1);
  for (const auto& [d, v] : taps) x[d](0, 0) = v;
  return delay_to_freq(x, k);
}

PilotObservation sound(const FreqChannel& h, Index a, double noise_var, Rng& rng,
                       CoverKind cover = CoverKind::dft) {
  const auto sched = build_schedule(h.subcarriers(), a, h.rows(), cover);
  return observe_pilots(h, sched, noise_var, rng, PilotLink::uplink);
}

EstimatorConfig config(EstimatorKind kind, Index window) {
  EstimatorConfig c;
  c.kind = kind;
  c.window = window;
  return c;
}

void check_consistent(const ChannelEstimate& est) {
  const auto refreq = delay_to_freq(est.delay, est.freq.subcarriers());
  CHECK(std::sqrt(squared_distance(refreq.data, est.freq.data) /
                  std::max(est.freq.energy(), 1e-300)) <= 1e-10);
}

// Random phase, unit magnitude planted taps at distinct positions.
std::vector<std::pair<Index, cd>> planted_taps(Index count, Index window, std::mt19937_64& gen) {
  std::uniform_int_distribution<Index> pos(0, window - 1);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * kPi);
  std::set<Index> used;
  std::vector<std::pair<Index, cd>> taps;
  while (static_cast<Index>(taps.size()) < count) {
    const Index d = pos(gen);
    if (used.insert(d).second) taps.emplace_back(d, std::polar(1.0, ph(gen)));
  }
  return taps;
}

}  // namespace

TEST_CASE("nmse worked examples", "[chanest]") {
  std::mt19937_64 gen(1);
  const auto h = oracle::random_freq_channel(4, 2, 2, gen);
  CHECK(nmse(h, h) == 0.0);
  FreqChannel zero(4, 2, 2);
  CHECK(nmse(zero, h) == Catch::Approx(1.0).epsilon(1e-15));
  FreqChannel twice(4, 2, 2);
  for (Index k = 0; k < 4; ++k) twice[k] = 2.0 * h[k];
  CHECK(nmse(twice, h) == Catch::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(nmse(h, zero), ConfigError);
}

TEST_CASE("antialias recovers band-limited channels without noise", "[chanest]") {
  Rng rng(3, Stream::test);
  auto p = default_channel_params(1, 1, 1024, 72);
  const auto h = gen_clustered_channel(p, 5);
  const auto est = antialias_estimate(sound(h, 8, 0.0, rng), 72);
  CHECK(nmse(est.freq, h) <= 1e-20);
  check_consistent(est);

  p = default_channel_params(8, 8, 1024, 72);
  const auto hm = gen_clustered_channel(p, 6);
  const auto obs = sound(hm, 8, 0.0, rng);
  REQUIRE(obs.schedule.n_symbols == 1);
  const auto estm = antialias_estimate(obs, 72);
  CHECK(nmse(estm.freq, hm) <= 1e-18);
  check_consistent(estm);

  // identity cover, A below the stream count
  const auto obs2 = sound(hm, 4, 0.0, rng, CoverKind::identity);
  CHECK(obs2.schedule.n_symbols == 2);
  CHECK(nmse(antialias_estimate(obs2, 72).freq, hm) <= 1e-18);

  CHECK_THROWS_AS(antialias_estimate(obs, 129), ConfigError);
}

TEST_CASE("antialias error matches the analytic LS variance", "[chanest]") {
  // With unit-magnitude pilots on K/A uniformly spaced subcarriers, the
  // delay-window LS error covariance is A sigma^2 I over D taps, so
  // NMSE = sigma^2 D / (K / A) when ||h||^2 = K.
  constexpr Index k = 256;
  constexpr Index d = 18;
  constexpr Index a = 8;
  constexpr double sigma2 = 0.01;
  auto h = gen_clustered_channel(default_channel_params(1, 1, k, d), 9);
  const double scale = std::sqrt(static_cast<double>(k) / h.energy());
  for (Index i = 0; i < k; ++i) h[i] *= scale;
  Rng rng(10, Stream::srs_noise);
  double acc = 0.0;
  constexpr int trials = 200;
  for (int t = 0; t < trials; ++t) acc += nmse(antialias_estimate(sound(h, a, sigma2, rng), d).freq, h);
  const double expected = sigma2 * d / (static_cast<double>(k) / a);
  CHECK(std::abs(acc / trials / expected - 1.0) < 0.2);
}

TEST_CASE("LS per-subcarrier estimate with hold", "[chanest]") {
  Rng rng(4, Stream::test);
  std::mt19937_64 gen(2);
  const auto h = oracle::random_freq_channel(32, 2, 3, gen);
  CHECK(nmse(ls_estimate(sound(h, 1, 0.0, rng)).freq, h) <= 1e-24);

  FreqChannel flat(64, 2, 2);
  const CMat c = oracle::random_matrix(2, 2, gen);
  for (Index k = 0; k < 64; ++k) flat[k] = c;
  CHECK(nmse(ls_estimate(sound(flat, 8, 0.0, rng)).freq, flat) <= 1e-24);

  const auto sel = gen_clustered_channel(default_channel_params(2, 2, 64, 8), 4);
  const auto obs = sound(sel, 2, 0.0, rng);
  const auto ls = ls_estimate(obs);
  const double ls_err = nmse(ls.freq, sel);
  CHECK(ls_err > 0.0);
  CHECK(nmse(antialias_estimate(obs, 8).freq, sel) < ls_err);
  check_consistent(ls);
}

TEST_CASE("LS hold picks the nearest occupied subcarrier", "[chanest]") {
  // SISO, A = 4, stream 0 on {0, 4, 8, 12}: subcarrier 2 ties and takes 0,
  // 3 takes 4, 13..15 hold 12.
  FreqChannel h(16, 1, 1);
  for (Index k = 0; k < 16; ++k) h[k](0, 0) = static_cast<double>(k);
  Rng rng(1, Stream::test);
  const auto est = ls_estimate(sound(h, 4, 0.0, rng));
  const std::vector<double> expect{0, 0, 0, 4, 4, 4, 4, 8, 8, 8, 8, 12, 12, 12, 12, 12};
  for (Index k = 0; k < 16; ++k) CHECK(std::abs(est.freq[k](0, 0) - expect[static_cast<std::size_t>(k)]) < 1e-12);
}

TEST_CASE("OMP noiseless exact recovery and zero input", "[chanest]") {
  std::mt19937_64 gen(7);
  const auto taps = planted_taps(3, 32, gen);
  const auto h = siso_from_taps(64, taps);
  Rng rng(1, Stream::test);
  const auto est = omp_estimate(sound(h, 1, 0.0, rng), config(EstimatorKind::omp, 32));
  CHECK(nmse(est.freq, h) <= 1e-18);
  REQUIRE(est.solver.size() == 1);
  std::set<Index> got(est.solver[0].support.begin(), est.solver[0].support.end());
  std::set<Index> want;
  for (const auto& t : taps) want.insert(t.first);
  CHECK(got == want);
  check_consistent(est);

  FreqChannel zero(64, 1, 1);
  const auto ez = omp_estimate(sound(zero, 1, 0.0, rng), config(EstimatorKind::omp, 32));
  CHECK(ez.freq.energy() == 0.0);
  CHECK(ez.solver[0].iterations == 0);
}

TEST_CASE("OMP support recall under noise", "[chanest]") {
  std::mt19937_64 gen(8);
  Rng rng(2, Stream::srs_noise);
  Index hits = 0;
  Index planted = 0;
  for (int t = 0; t < 100; ++t) {
    const auto taps = planted_taps(5, 32, gen);
    const auto h = siso_from_taps(256, taps);
    const auto est = omp_estimate(sound(h, 4, 0.01, rng), config(EstimatorKind::omp, 32));
    const auto& info = est.solver[0];
    for (std::size_t i = 1; i < info.trace.size(); ++i) CHECK(info.trace[i] <= info.trace[i - 1]);
    std::set<Index> got(info.support.begin(), info.support.end());
    for (const auto& tap : taps) hits += got.count(tap.first);
    planted += 5;
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(planted) >= 0.9);
}

TEST_CASE("LASSO limits and self-consistency", "[chanest]") {
  std::mt19937_64 gen(9);
  Rng rng(3, Stream::srs_noise);
  const auto h = siso_from_taps(128, planted_taps(3, 16, gen));
  const auto obs = sound(h, 2, 1e-4, rng);

  auto cfg = config(EstimatorKind::lasso, 16);
  cfg.lasso_reg = 0.0;
  const auto l0 = lasso_estimate(obs, cfg);
  CHECK(std::sqrt(squared_distance(l0.freq.data, antialias_estimate(obs, 16).freq.data) /
                  h.energy()) <= 1e-8);

  cfg.lasso_reg = 1e6;
  CHECK(lasso_estimate(obs, cfg).freq.energy() == 0.0);

  // Non-uniform pilot rows so ISTA needs real iterations.
  const CMat phi = partial_dft_rows(128, 16, std::vector<Index>{0, 1, 3, 7, 12, 20, 31, 40, 41, 55, 63,
                                                                 70, 81, 90, 99, 101, 110, 120, 127});
  CMat xs = CMat::Zero(16, 2);
  for (const auto& [d, v] : planted_taps(3, 16, gen)) xs.row(d) << v, v * cd(0.3, 0.8);
  CMat y = phi * xs;
  const double sigma = 1e-2;
  for (Index i = 0; i < y.rows(); ++i) {
    for (Index j = 0; j < 2; ++j) y(i, j) += rng.complex_normal(sigma * sigma);
  }
  const double reg = 2.0 * sigma * std::sqrt(2.0 * std::log(16.0));
  SolverInfo short_run;
  SolverInfo long_run;
  const CMat xa = group_lasso_ista(phi, y, reg, 20000, 1e-14, short_run);
  const CMat xb = group_lasso_ista(phi, y, reg, 200000, 1e-16, long_run);
  const double fa = group_lasso_objective(phi, y, xa, reg);
  const double fb = group_lasso_objective(phi, y, xb, reg);
  CHECK(std::abs(fa - fb) / fb <= 1e-6);
  for (std::size_t i = 1; i < long_run.trace.size(); ++i) {
    CHECK(long_run.trace[i] <= long_run.trace[i - 1] + 1e-12);
  }
}

TEST_CASE("GA-MMSE shrinkage", "[chanest]") {
  Rng rng(5, Stream::test);
  const auto p = default_channel_params(2, 2, 128, 16);
  const auto h = gen_clustered_channel(p, 7);
  const RVec prior = prior_tap_variance(p, 16);

  const auto obs0 = sound(h, 4, 0.0, rng);
  const auto g0 = gamsse_estimate(obs0, RVec::Ones(16));
  CHECK(squared_distance(g0.freq.data, antialias_estimate(obs0, 16).freq.data) == 0.0);

  const auto obs = sound(h, 4, 0.1, rng);
  const auto g = gamsse_estimate(obs, prior);
  for (Index d = 0; d < 16; ++d) {
    if (prior(d) == 0.0) CHECK(g.delay[d].norm() == 0.0);
  }
  REQUIRE(g.tap_posterior_variance.has_value());
  check_consistent(g);

  Rng noise(6, Stream::srs_noise);
  double ga = 0.0;
  double aa = 0.0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const auto ht = gen_clustered_channel(p, 100 + t);
    const auto o = sound(ht, 4, 0.1, noise);
    ga += nmse(gamsse_estimate(o, prior).freq, ht);
    aa += nmse(antialias_estimate(o, 16).freq, ht);
  }
  CHECK(ga <= aa);

  auto cfg = config(EstimatorKind::gamsse, 16);
  CHECK_THROWS_AS(estimate_channel(obs, cfg), ConfigError);
  CHECK_THROWS_AS(estimate_channel(obs, cfg, RVec::Ones(15)), ConfigError);
}

TEST_CASE("estimator ordering at 10 dB pilot SNR", "[chanest][property]") {
  const auto p = default_channel_params(4, 4, 256, 18);
  const RVec prior = prior_tap_variance(p, 18);
  Rng noise(11, Stream::srs_noise);
  double g = 0.0, a = 0.0, l = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto h = gen_clustered_channel(p, 500 + t);
    const auto o = sound(h, 8, 0.1, noise);
    g += nmse(gamsse_estimate(o, prior).freq, h);
    a += nmse(antialias_estimate(o, 18).freq, h);
    l += nmse(ls_estimate(o).freq, h);
  }
  CHECK(g <= a);
  CHECK(a <= l);
}

TEST_CASE("full DMRS LMMSE", "[chanest]") {
  std::mt19937_64 gen(12);
  const auto he = oracle::random_freq_channel(16, 4, 2, gen);
  Rng rng(1, Stream::dmrs_noise);
  const CMat eye = CMat::Identity(2, 2);
  const auto y0 = observe_dmrs_full(he, eye, 0.0, rng);
  const auto e0 = lmmse_dmrs_full(y0, eye, 0.0);
  for (Index k = 0; k < 16; ++k) CHECK(e0[k] == y0[static_cast<std::size_t>(k)]);
  const auto e1 = lmmse_dmrs_full(y0, eye, 1.0);
  for (Index k = 0; k < 16; ++k) CHECK((e1[k] - 0.5 * he[k]).norm() < 1e-15);
  CHECK_THROWS_AS(lmmse_dmrs_full(y0, 2.0 * eye, 0.0), ConfigError);

  // Channel with unit mean entry energy: NMSE = sigma^2 / (1 + sigma^2).
  auto h = oracle::random_freq_channel(64, 4, 2, gen);
  const double s = std::sqrt(64.0 * 8.0 / h.energy());
  for (Index k = 0; k < 64; ++k) h[k] *= s;
  const double sigma2 = 0.01;
  const CMat r = unitary_dft(2);
  double acc = 0.0;
  for (int t = 0; t < 500; ++t) acc += nmse(lmmse_dmrs_full(observe_dmrs_full(h, r, sigma2, rng), r, sigma2), h);
  CHECK(std::abs(acc / 500.0 / (sigma2 / (1.0 + sigma2)) - 1.0) < 0.2);
}

TEST_CASE("estimator config validation", "[chanest]") {
  auto c = config(EstimatorKind::omp, 16);
  CHECK_NOTHROW(c.validate(64));
  c.omp_max_taps = 17;
  CHECK_THROWS_AS(c.validate(64), ConfigError);
  c = config(EstimatorKind::antialias, 65);
  CHECK_THROWS_AS(c.validate(64), ConfigError);
  c = config(EstimatorKind::lasso, 8);
  c.lasso_tol = 0.0;
  CHECK_THROWS_AS(c.validate(64), ConfigError);
  CHECK(parse_estimator_kind("gamsse") == EstimatorKind::gamsse);
  CHECK_THROWS_AS(parse_estimator_kind("vamp"), ConfigError);
}
