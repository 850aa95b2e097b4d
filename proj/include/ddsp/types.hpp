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

#include "ddsp/core.hpp"
#include "ddsp/dft.hpp"

namespace ddsp {

// Per-subcarrier channel matrices H_k (or effective channels H_k V_k).
// Slice k is N_rx x N_cols.
struct FreqChannel {
  MatrixStack data;

  FreqChannel() = default;
  explicit FreqChannel(MatrixStack d) : data(std::move(d)) {}
  FreqChannel(Index k, Index rows, Index cols) : data(k, rows, cols) {}

  Index subcarriers() const noexcept { return data.size(); }
  Index rows() const noexcept { return data.rows(); }
  Index cols() const noexcept { return data.cols(); }
  double energy() const { return data.energy(); }
  CMat& operator[](Index k) { return data[k]; }
  const CMat& operator[](Index k) const { return data[k]; }
};

// Delay-domain taps truncated to the first `taps()` delays. Slice d is the
// N_rx x N_cols coefficient matrix of tap d.
struct DelayChannel {
  MatrixStack data;

  DelayChannel() = default;
  explicit DelayChannel(MatrixStack d) : data(std::move(d)) {}
  DelayChannel(Index taps, Index rows, Index cols) : data(taps, rows, cols) {}

  Index taps() const noexcept { return data.size(); }
  Index rows() const noexcept { return data.rows(); }
  Index cols() const noexcept { return data.cols(); }
  double energy() const { return data.energy(); }
  CMat& operator[](Index d) { return data[d]; }
  const CMat& operator[](Index d) const { return data[d]; }
};

// Delay-domain precoder W~ with D_v taps. Row block d (n_tx rows) of
// `w_delay()` is the tap-d coefficient matrix W_d, so the frequency precoder
// is V_k = sum_d F[k, d] W_d.
class SparsePrecoder {
 public:
  SparsePrecoder() = default;

  SparsePrecoder(CMat w_delay, Index d_v, Index subcarriers, double power_budget)
      : w_(std::move(w_delay)), d_v_(d_v), k_(subcarriers), power_budget_(power_budget) {
    require_dims(d_v_ >= 1 && d_v_ <= k_, "SparsePrecoder: need 1 <= D_v <= K");
    require_dims(w_.rows() % d_v_ == 0, "SparsePrecoder: rows must be D_v * N_t");
    n_tx_ = w_.rows() / d_v_;
  }

  static SparsePrecoder from_taps(const MatrixStack& taps, Index subcarriers, double power_budget) {
    require_dims(taps.size() >= 1, "SparsePrecoder::from_taps: no taps");
    CMat w(taps.size() * taps.rows(), taps.cols());
    for (Index d = 0; d < taps.size(); ++d) w.middleRows(d * taps.rows(), taps.rows()) = taps[d];
    return SparsePrecoder(std::move(w), taps.size(), subcarriers, power_budget);
  }

  const CMat& w_delay() const noexcept { return w_; }
  Index d_v() const noexcept { return d_v_; }
  Index n_tx() const noexcept { return n_tx_; }
  Index streams() const noexcept { return w_.cols(); }
  Index subcarriers() const noexcept { return k_; }
  double power_budget() const noexcept { return power_budget_; }

  // ||W~||_F^2; equals sum_k ||V_k||_F^2 by unitarity.
  double power() const { return w_.squaredNorm(); }

  CMat tap(Index d) const { return w_.middleRows(d * n_tx_, n_tx_); }

  DelayChannel taps() const {
    DelayChannel out(d_v_, n_tx_, streams());
    for (Index d = 0; d < d_v_; ++d) out[d] = tap(d);
    return out;
  }

  // Per-subcarrier precoders V_k, k = 0..K-1.
  MatrixStack expand() const {
    const CMat f = partial_dft(k_, d_v_);
    return MatrixStack::unflatten(f * taps().data.flatten(), n_tx_, streams());
  }

 private:
  CMat w_;
  Index d_v_ = 0;
  Index n_tx_ = 0;
  Index k_ = 0;
  double power_budget_ = 0.0;
};

}  // namespace ddsp
