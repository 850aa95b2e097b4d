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

// Unitary DFT convention used everywhere in the library:
//   F[k, d] = exp(-j 2 pi k d / K) / sqrt(K),   F^H F = I.
// Frequency samples are h = F x, delay taps are x = F^H h.

#include "ddsp/core.hpp"

#include <span>

namespace ddsp {

// Table of exp(+j 2 pi m / K) for m in [0, K). Phases are looked up by the
// exact integer residue (k * d) mod K, which keeps large-K transforms free of
// accumulated phase error.
class Twiddles {
 public:
  explicit Twiddles(Index k) : k_(k), table_(static_cast<std::size_t>(k)) {
    require_dims(k >= 1, "Twiddles: K must be positive");
    for (Index m = 0; m < k; ++m) {
      table_[static_cast<std::size_t>(m)] =
          std::polar(1.0, 2.0 * kPi * static_cast<double>(m) / static_cast<double>(k));
    }
  }

  Index size() const noexcept { return k_; }

  // exp(+j 2 pi n / K) for any integer n.
  cd plus(long long n) const {
    long long r = n % k_;
    if (r < 0) r += k_;
    return table_[static_cast<std::size_t>(r)];
  }

  cd minus(long long n) const { return std::conj(plus(n)); }

 private:
  Index k_;
  std::vector<cd> table_;
};

inline cd dft_entry(Index k, Index d, Index n_fft) {
  const Twiddles tw(n_fft);
  return tw.minus(static_cast<long long>(k) * d) / std::sqrt(static_cast<double>(n_fft));
}

// First `cols` columns of the K-point unitary DFT matrix (K x cols).
inline CMat partial_dft(Index n_fft, Index cols) {
  require_dims(cols >= 1 && cols <= n_fft, "partial_dft: need 1 <= cols <= K");
  const Twiddles tw(n_fft);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_fft));
  CMat f(n_fft, cols);
  for (Index d = 0; d < cols; ++d) {
    for (Index k = 0; k < n_fft; ++k) f(k, d) = tw.minus(static_cast<long long>(k) * d) * scale;
  }
  return f;
}

// Rows `rows` of partial_dft(n_fft, cols).
inline CMat partial_dft_rows(Index n_fft, Index cols, std::span<const Index> rows) {
  require_dims(cols >= 1 && cols <= n_fft, "partial_dft_rows: need 1 <= cols <= K");
  const Twiddles tw(n_fft);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_fft));
  CMat f(static_cast<Index>(rows.size()), cols);
  for (Index i = 0; i < f.rows(); ++i) {
    const Index k = rows[static_cast<std::size_t>(i)];
    require_dims(k >= 0 && k < n_fft, "partial_dft_rows: subcarrier index out of range");
    for (Index d = 0; d < cols; ++d) f(i, d) = tw.minus(static_cast<long long>(k) * d) * scale;
  }
  return f;
}

// Unitary n x n DFT matrix, used as the default pilot cover.
inline CMat unitary_dft(Index n) { return partial_dft(n, n); }

}  // namespace ddsp
