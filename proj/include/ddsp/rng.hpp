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

// Counter-based random numbers. All simulation randomness flows through
// Philox4x32-10 (Salmon et al., Random123) so that any other implementation
// can regenerate identical draws from (seed, stream, counter):
//
//   key     = {seed & 0xffffffff, seed >> 32}
//   counter = {n & 0xffffffff, n >> 32, stream & 0xffffffff, stream >> 32}
//
// where n is the block index starting at 0. Each block yields four 32-bit
// words consumed in order. Derived variates:
//   u64      = (w0 << 32) | w1 from two consecutive words
//   uniform  = (u64 >> 11) * 2^-53, in [0, 1)
//   CN(0, v) = sqrt(-v * ln(1 - u_a)) * exp(j * 2*pi * u_b)  (Box-Muller)

#include "ddsp/core.hpp"

#include <array>
#include <cstdint>

namespace ddsp {

class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xffffffffu; }

  result_type operator()() {
    if (pos_ == 4) {
      const Block ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                      static_cast<std::uint32_t>(stream_),
                      static_cast<std::uint32_t>(stream_ >> 32)};
      buffer_ = generate(ctr, key_);
      ++block_;
      pos_ = 0;
    }
    return buffer_[pos_++];
  }

  // One Philox4x32-10 bijection.
  static Block generate(Block ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int pos_ = 4;
};

// Named streams used by the link harness. Each stage of a trial draws from
// its own stream so that swapping an estimator or precoder leaves every other
// draw untouched.
enum class Stream : std::uint64_t {
  channel = 1,
  srs_noise = 2,
  dmrs_noise = 3,
  payload_bits = 4,
  payload_noise = 5,
  test = 99,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(seed, stream) {}
  Rng(std::uint64_t seed, Stream stream) : engine_(seed, static_cast<std::uint64_t>(stream)) {}

  std::uint64_t next_u64() {
    const std::uint64_t hi = engine_();
    const std::uint64_t lo = engine_();
    return (hi << 32) | lo;
  }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Circularly-symmetric complex Gaussian with E|z|^2 = variance.
  cd complex_normal(double variance = 1.0) {
    const double u_a = uniform();
    const double u_b = uniform();
    const double r = std::sqrt(-variance * std::log1p(-u_a));
    return std::polar(r, 2.0 * kPi * u_b);
  }

  bool bit() { return (engine_() & 1u) != 0u; }

  Philox4x32& engine() noexcept { return engine_; }

 private:
  Philox4x32 engine_;
};

}  // namespace ddsp
