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

using namespace ddsp;

namespace {

double relative_error(const MatrixStack& a, const MatrixStack& b) {
  return std::sqrt(squared_distance(a, b) / b.energy());
}

ChannelParams params_with(Index k, Index d, std::vector<Index> delays, std::vector<double> powers,
                          std::vector<Index> rays, Index n = 4) {
  ChannelParams p;
  p.n_tx = n;
  p.n_rx = n;
  p.n_subcarriers = k;
  p.max_delay_spread = d;
  p.cluster_delays = std::move(delays);
  p.cluster_powers = std::move(powers);
  p.rays_per_cluster = std::move(rays);
  p.angle_spread.assign(p.cluster_delays.size(), 0.2);
  return p;
}

// Energy of delay taps outside `support`, relative to the total.
double off_support_fraction(const DelayChannel& x, const std::vector<Index>& support) {
  double off = 0.0;
  for (Index d = 0; d < x.taps(); ++d) {
    if (std::find(support.begin(), support.end(), d) == support.end()) off += x[d].squaredNorm();
  }
  return off / x.energy();
}

}  // namespace

TEST_CASE("single zero-delay ray gives a frequency-flat channel", "[channel]") {
  auto p = params_with(32, 4, {0}, {1.0}, {1}, 3);
  const std::vector<Ray> rays{Ray{0, cd(1.0, 0.0), 0.3, -0.7}};
  const auto h = synthesize_channel(p, rays);
  for (Index k = 1; k < 32; ++k) CHECK((h[k] - h[0]).norm() == 0.0);
  // unit gain, unit-norm steering vectors, sqrt(N_r N_t / 1) scaling
  const CMat expect = 3.0 * ula_steering(3, 0.3) * ula_steering(3, -0.7).adjoint();
  CHECK((h[0] - expect).norm() < 1e-14);
}

TEST_CASE("two clusters occupy exactly their delay taps", "[channel]") {
  const auto p = params_with(64, 8, {0, 5}, {0.7, 0.3}, {3, 2});
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto h = gen_clustered_channel(p, seed);
    const auto x = freq_to_delay(h, 64);
    CHECK(off_support_fraction(x, {0, 5}) <= 1e-10);
  }
}

TEST_CASE("per-tap power ratios follow the cluster powers", "[channel]") {
  const auto p = params_with(256, 41, {0, 10, 40}, {0.6, 0.3, 0.1}, {10, 10, 10});
  RVec acc = RVec::Zero(3);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto x = freq_to_delay(gen_clustered_channel(p, seed), 41);
    acc(0) += x[0].squaredNorm();
    acc(1) += x[10].squaredNorm();
    acc(2) += x[40].squaredNorm();
  }
  acc /= acc.sum();
  CHECK(std::abs(acc(0) / 0.6 - 1.0) < 0.05);
  CHECK(std::abs(acc(1) / 0.3 - 1.0) < 0.05);
  CHECK(std::abs(acc(2) / 0.1 - 1.0) < 0.05);
}

TEST_CASE("generated channels have mean energy K N_r N_t", "[channel]") {
  // Unit-norm steering vectors and sum of ray variances = N_tot make
  // E||H_k||^2 = N_r N_t on every subcarrier.
  const auto p = default_channel_params(4, 2, 64, 16);
  double e = 0.0;
  constexpr int n = 2000;
  for (int s = 0; s < n; ++s) e += gen_clustered_channel(p, static_cast<std::uint64_t>(s)).energy();
  CHECK(std::abs(e / n / (64.0 * 8.0) - 1.0) < 0.05);
}

TEST_CASE("channel parameter validation", "[channel]") {
  auto p = default_channel_params(4, 4, 64, 8);
  p.cluster_delays[2] = 8;
  CHECK_THROWS_AS(gen_clustered_channel(p, 1), ConfigError);
  p = default_channel_params(4, 4, 64, 8);
  p.max_delay_spread = 65;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = default_channel_params(4, 4, 64, 8);
  p.cluster_powers[0] += 1e-9;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = default_channel_params(4, 4, 64, 8);
  p.rays_per_cluster[1] = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = default_channel_params(4, 4, 64, 8);
  p.angle_spread.pop_back();
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("freq_to_delay worked examples", "[channel]") {
  FreqChannel ones(4, 1, 1);
  for (Index k = 0; k < 4; ++k) ones[k](0, 0) = 1.0;
  const auto x = freq_to_delay(ones, 4);
  CHECK(std::abs(x[0](0, 0) - cd(2.0, 0.0)) < 1e-15);
  for (Index d = 1; d < 4; ++d) CHECK(std::abs(x[d](0, 0)) < 1e-15);

  // h = F_2 [1, j] with unitary columns
  FreqChannel h(8, 1, 1);
  for (Index k = 0; k < 8; ++k) h[k](0, 0) = oracle::dft(k, 0, 8) + cd(0, 1) * oracle::dft(k, 1, 8);
  const auto x2 = freq_to_delay(h, 2);
  CHECK(std::abs(x2[0](0, 0) - cd(1, 0)) < 1e-14);
  CHECK(std::abs(x2[1](0, 0) - cd(0, 1)) < 1e-14);
}

TEST_CASE("delay_to_freq worked examples", "[channel]") {
  DelayChannel x(1, 1, 1);
  x[0](0, 0) = 1.0;
  const auto h = delay_to_freq(x, 16);
  for (Index k = 0; k < 16; ++k) CHECK(std::abs(h[k](0, 0) - cd(0.25, 0.0)) < 1e-15);

  // zero-padded full-size DFT oracle
  std::mt19937_64 gen(5);
  DelayChannel taps(4, 2, 3);
  for (auto& t : taps.data) t = oracle::random_matrix(2, 3, gen);
  const auto hf = delay_to_freq(taps, 32);
  for (Index k = 0; k < 32; ++k) {
    CMat ref = CMat::Zero(2, 3);
    for (Index d = 0; d < 4; ++d) ref += oracle::dft(k, d, 32) * taps[d];
    CHECK((hf[k] - ref).norm() < 1e-13);
  }
}

TEST_CASE("unitary round trip and Parseval", "[channel][property]") {
  std::mt19937_64 gen(11);
  const auto h = oracle::random_freq_channel(24, 3, 2, gen);
  const auto x = freq_to_delay(h, 24);
  CHECK(relative_error(delay_to_freq(x, 24).data, h.data) < 1e-12);
  CHECK(std::abs(x.energy() / h.energy() - 1.0) < 1e-10);

  // band-limited channel round-trips at reduced width
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = default_channel_params(4, 4, 128, 20);
    const auto hc = gen_clustered_channel(p, seed);
    CHECK(relative_error(delay_to_freq(freq_to_delay(hc, 20), 128).data, hc.data) < 1e-10);
  }
  CHECK_THROWS_AS(freq_to_delay(h, 25), DimensionError);
  CHECK_THROWS_AS(delay_to_freq(x, 23), DimensionError);
}

TEST_CASE("generated channels concentrate energy on cluster taps", "[channel][property]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = default_channel_params(4, 4, 256, 18);
    const auto x = freq_to_delay(gen_clustered_channel(p, seed), 256);
    CHECK(off_support_fraction(x, p.cluster_delays) <= 1e-10);
  }
}

TEST_CASE("effective channel examples", "[channel]") {
  std::mt19937_64 gen(2);
  const auto h = oracle::random_freq_channel(8, 4, 4, gen);
  MatrixStack sel(8, 4, 2);
  for (auto& v : sel) v = CMat::Identity(4, 2);
  const auto he = effective_channel(h, sel);
  for (Index k = 0; k < 8; ++k) CHECK((he[k] - h[k].leftCols(2)).norm() == 0.0);

  const auto hs = oracle::random_freq_channel(8, 1, 1, gen);
  MatrixStack two(8, 1, 1);
  for (auto& v : two) v(0, 0) = 2.0;
  const auto hs2 = effective_channel(hs, two);
  for (Index k = 0; k < 8; ++k) CHECK(hs2[k](0, 0) == 2.0 * hs[k](0, 0));

  MatrixStack too_wide(8, 4, 5);
  CHECK_THROWS_AS(effective_channel(h, too_wide), DimensionError);
}

TEST_CASE("effective delay support is at most D + D_v - 1 taps", "[channel]") {
  constexpr Index k = 128;
  constexpr Index d = 12;
  constexpr Index d_v = 6;
  const auto p = default_channel_params(4, 4, k, d);
  const auto h = gen_clustered_channel(p, 3);
  std::mt19937_64 gen(3);
  MatrixStack taps(d_v, 4, 2);
  for (auto& t : taps) t = oracle::random_matrix(4, 2, gen);
  const auto v = SparsePrecoder::from_taps(taps, k, 1.0);
  const auto x = freq_to_delay(effective_channel(h, v), k);
  std::vector<Index> support(d + d_v - 1);
  std::iota(support.begin(), support.end(), Index{0});
  CHECK(off_support_fraction(x, support) <= 1e-10);
}

TEST_CASE("effective channel is bilinear", "[channel][property]") {
  std::mt19937_64 gen(8);
  const auto h1 = oracle::random_freq_channel(6, 3, 3, gen);
  const auto h2 = oracle::random_freq_channel(6, 3, 3, gen);
  MatrixStack v1(6, 3, 2), v2(6, 3, 2);
  for (Index i = 0; i < 6; ++i) {
    v1[i] = oracle::random_matrix(3, 2, gen);
    v2[i] = oracle::random_matrix(3, 2, gen);
  }
  const cd a(0.3, -1.2);
  const cd b(-0.8, 0.5);
  FreqChannel hmix(6, 3, 3);
  MatrixStack vmix(6, 3, 2);
  for (Index i = 0; i < 6; ++i) {
    hmix[i] = a * h1[i] + b * h2[i];
    vmix[i] = a * v1[i] + b * v2[i];
  }
  const auto lhs_h = effective_channel(hmix, v1);
  const auto lhs_v = effective_channel(h1, vmix);
  const auto e11 = effective_channel(h1, v1);
  const auto e21 = effective_channel(h2, v1);
  const auto e12 = effective_channel(h1, v2);
  for (Index i = 0; i < 6; ++i) {
    CHECK((lhs_h[i] - (a * e11[i] + b * e21[i])).norm() < 1e-12);
    CHECK((lhs_v[i] - (a * e11[i] + b * e12[i])).norm() < 1e-12);
  }
}

TEST_CASE("delay support report", "[channel]") {
  DelayChannel x(4, 1, 1);
  x[0](0, 0) = 1.0;
  CHECK(delay_support_report(x, 1).truncation_nmse == 0.0);
  x[2](0, 0) = cd(0.0, 1.0);
  const auto r = delay_support_report(x, 2);
  CHECK(r.truncation_nmse == 0.5);
  CHECK(r.in_window_fraction == 0.5);
  CHECK_THROWS_AS(delay_support_report(x, 0), DimensionError);
  CHECK_THROWS_AS(delay_support_report(x, 5), DimensionError);
}

TEST_CASE("prior tap variance matches the generator on average", "[channel]") {
  const auto p = default_channel_params(2, 2, 64, 16);
  const RVec prior = prior_tap_variance(p, 16);
  RVec acc = RVec::Zero(16);
  constexpr int n = 3000;
  for (int s = 0; s < n; ++s) {
    acc += tap_power_profile(freq_to_delay(gen_clustered_channel(p, static_cast<std::uint64_t>(s)), 16));
  }
  acc /= n;
  for (Index d = 0; d < 16; ++d) {
    if (prior(d) == 0.0) {
      CHECK(acc(d) < 1e-20);
    } else {
      CHECK(std::abs(acc(d) / prior(d) - 1.0) < 0.08);
    }
  }
}
