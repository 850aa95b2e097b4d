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

// Payload link: Gray-mapped square QAM, the precoded MIMO-OFDM data channel,
// LMMSE stream decorrelation, max-log soft demapping and bit metrics.
//
// Bits use the +/-1 convention (beta = +1 <=> binary 1). A symbol carries B
// bits: the first B/2 select the in-phase level, the rest the quadrature
// level. Per axis the n = B/2 bits (MSB first) are read as a binary-reflected
// Gray codeword g; its binary index i gives the level 2 i - (2^n - 1), so the
// MSB is the sign. Levels are scaled by 1 / sqrt(2 (2^B - 1) / 3) for unit
// average energy. Example, B = 4, per axis:
//
//   bits (MSB..LSB)   -1 -1   -1 +1   +1 +1   +1 -1
//   level             -3      -1      +1      +3

#include "ddsp/core.hpp"
#include "ddsp/rng.hpp"
#include "ddsp/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cstdint>
#include <limits>

namespace ddsp {

using RMat = Eigen::MatrixXd;

inline void check_bits_per_symbol(Index b) {
  require(b >= 2 && b <= 12 && b % 2 == 0, "link",
          "bits per symbol B=" + std::to_string(b) + " must be even and in [2, 12]");
}

// M x K x L x B array of +/-1, flattened with the bit index fastest.
struct BitBlock {
  Index symbols = 0;      // M
  Index subcarriers = 0;  // K
  Index streams = 0;      // L
  Index bits_per_symbol = 0;
  std::vector<std::int8_t> bits;

  BitBlock() = default;
  BitBlock(Index m, Index k, Index l, Index b)
      : symbols(m), subcarriers(k), streams(l), bits_per_symbol(b),
        bits(static_cast<std::size_t>(m * k * l * b), std::int8_t{-1}) {
    check_bits_per_symbol(b);
  }

  std::size_t offset(Index m, Index k, Index l, Index i) const {
    return static_cast<std::size_t>(((m * subcarriers + k) * streams + l) * bits_per_symbol + i);
  }
  std::int8_t& at(Index m, Index k, Index l, Index i) { return bits[offset(m, k, l, i)]; }
  std::int8_t at(Index m, Index k, Index l, Index i) const { return bits[offset(m, k, l, i)]; }
  std::size_t size() const noexcept { return bits.size(); }

  bool same_shape(const BitBlock& o) const {
    return symbols == o.symbols && subcarriers == o.subcarriers && streams == o.streams &&
           bits_per_symbol == o.bits_per_symbol;
  }
};

// Same layout as BitBlock; entries are P(beta = +1).
struct SoftBits {
  Index symbols = 0;
  Index subcarriers = 0;
  Index streams = 0;
  Index bits_per_symbol = 0;
  std::vector<double> probs;

  SoftBits() = default;
  SoftBits(Index m, Index k, Index l, Index b)
      : symbols(m), subcarriers(k), streams(l), bits_per_symbol(b),
        probs(static_cast<std::size_t>(m * k * l * b), 0.5) {}

  std::size_t offset(Index m, Index k, Index l, Index i) const {
    return static_cast<std::size_t>(((m * subcarriers + k) * streams + l) * bits_per_symbol + i);
  }
  double& at(Index m, Index k, Index l, Index i) { return probs[offset(m, k, l, i)]; }
  double at(Index m, Index k, Index l, Index i) const { return probs[offset(m, k, l, i)]; }
};

inline BitBlock random_bits(Index m, Index k, Index l, Index b, Rng& rng) {
  BitBlock out(m, k, l, b);
  for (auto& x : out.bits) x = rng.bit() ? std::int8_t{1} : std::int8_t{-1};
  return out;
}

// Square 2^B-QAM with the per-axis Gray map described above.
class QamConstellation {
 public:
  explicit QamConstellation(Index bits_per_symbol) : b_(bits_per_symbol) {
    check_bits_per_symbol(b_);
    const Index n = b_ / 2;
    const Index levels = Index{1} << n;
    scale_ = 1.0 / std::sqrt(2.0 * static_cast<double>((Index{1} << b_) - 1) / 3.0);
    level_of_code_.resize(static_cast<std::size_t>(levels));
    for (Index g = 0; g < levels; ++g) {
      Index idx = 0;
      Index acc = 0;
      for (Index i = n - 1; i >= 0; --i) {
        acc ^= (g >> i) & 1;
        idx = (idx << 1) | acc;
      }
      level_of_code_[static_cast<std::size_t>(g)] =
          scale_ * static_cast<double>(2 * idx - (levels - 1));
    }
  }

  Index bits_per_symbol() const noexcept { return b_; }
  Index bits_per_axis() const noexcept { return b_ / 2; }
  Index levels_per_axis() const noexcept { return Index{1} << (b_ / 2); }
  double scale() const noexcept { return scale_; }

  // Level for an n-bit Gray codeword (bit n-1 of `code` = MSB).
  double axis_level(Index code) const { return level_of_code_[static_cast<std::size_t>(code)]; }

  // Symbol for the B bits starting at `bits` (+/-1 values).
  cd map(const std::int8_t* bits) const {
    const Index n = bits_per_axis();
    Index ci = 0;
    Index cq = 0;
    for (Index i = 0; i < n; ++i) {
      ci = (ci << 1) | (bits[i] > 0 ? 1 : 0);
      cq = (cq << 1) | (bits[n + i] > 0 ? 1 : 0);
    }
    return {axis_level(ci), axis_level(cq)};
  }

  // All 2^B points, indexed by the B-bit word (first bit = MSB of the word).
  std::vector<cd> points() const {
    const Index total = Index{1} << b_;
    std::vector<cd> pts(static_cast<std::size_t>(total));
    std::vector<std::int8_t> bits(static_cast<std::size_t>(b_));
    for (Index w = 0; w < total; ++w) {
      for (Index i = 0; i < b_; ++i) bits[static_cast<std::size_t>(i)] = ((w >> (b_ - 1 - i)) & 1) ? 1 : -1;
      pts[static_cast<std::size_t>(w)] = map(bits.data());
    }
    return pts;
  }

  // Max-log per-axis LLRs, log P(+1)/P(-1), for one coordinate. `out` gets n
  // values, MSB first.
  void axis_llr(double y, double noise_var, double* out) const {
    const Index n = bits_per_axis();
    const Index levels = levels_per_axis();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
      double d_minus = kInf;
      double d_plus = kInf;
      const Index mask = Index{1} << (n - 1 - i);
      for (Index g = 0; g < levels; ++g) {
        const double d = (y - axis_level(g)) * (y - axis_level(g));
        if (g & mask) {
          d_plus = std::min(d_plus, d);
        } else {
          d_minus = std::min(d_minus, d);
        }
      }
      out[i] = std::clamp((d_minus - d_plus) / noise_var, -kLlrClip, kLlrClip);
    }
  }

  static constexpr double kLlrClip = 40.0;

 private:
  Index b_;
  double scale_ = 1.0;
  std::vector<double> level_of_code_;
};

// Symbols are stored per subcarrier: slice k is L x M, column m = r_{m,k}.
inline MatrixStack qam_modulate(const BitBlock& bits) {
  const QamConstellation qam(bits.bits_per_symbol);
  MatrixStack out(bits.subcarriers, bits.streams, bits.symbols);
  for (Index m = 0; m < bits.symbols; ++m) {
    for (Index k = 0; k < bits.subcarriers; ++k) {
      for (Index l = 0; l < bits.streams; ++l) {
        out[k](l, m) = qam.map(&bits.bits[bits.offset(m, k, l, 0)]);
      }
    }
  }
  return out;
}

inline double logistic(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// noise_var(k, l) is the post-equalization noise variance of stream l on
// subcarrier k.
inline SoftBits soft_demap(const MatrixStack& symbols, const RMat& noise_var, Index bits_per_symbol) {
  const QamConstellation qam(bits_per_symbol);
  const Index k_total = symbols.size();
  const Index l_total = symbols.rows();
  const Index m_total = symbols.cols();
  require_dims(noise_var.rows() == k_total && noise_var.cols() == l_total,
               "soft_demap: noise variance must be K x L");
  SoftBits out(m_total, k_total, l_total, bits_per_symbol);
  const Index n = qam.bits_per_axis();
  std::vector<double> llr(static_cast<std::size_t>(bits_per_symbol));
  for (Index k = 0; k < k_total; ++k) {
    for (Index l = 0; l < l_total; ++l) {
      const double nv = noise_var(k, l);
      require(nv > 0.0 && std::isfinite(nv), "link", "demapper noise variance must be positive");
      for (Index m = 0; m < m_total; ++m) {
        const cd y = symbols[k](l, m);
        qam.axis_llr(y.real(), nv, llr.data());
        qam.axis_llr(y.imag(), nv, llr.data() + n);
        for (Index i = 0; i < bits_per_symbol; ++i) {
          out.at(m, k, l, i) = logistic(llr[static_cast<std::size_t>(i)]);
        }
      }
    }
  }
  return out;
}

inline SoftBits soft_demap(const MatrixStack& symbols, double noise_var, Index bits_per_symbol) {
  return soft_demap(symbols, RMat::Constant(symbols.size(), symbols.rows(), noise_var),
                    bits_per_symbol);
}

inline BitBlock hard_decision(const SoftBits& probs) {
  BitBlock out(probs.symbols, probs.subcarriers, probs.streams, probs.bits_per_symbol);
  for (std::size_t i = 0; i < probs.probs.size(); ++i) {
    out.bits[i] = probs.probs[i] > 0.5 ? std::int8_t{1} : std::int8_t{-1};
  }
  return out;
}

// y_{m,k} = H_k V_k r_{m,k} + z, z ~ CN(0, noise_var I). Slice k of the
// result is N_r x M.
inline MatrixStack transmit_payload(const FreqChannel& h, const MatrixStack& v,
                                    const MatrixStack& symbols, double noise_var, Rng& rng) {
  require(noise_var >= 0.0, "link", "noise variance must be non-negative");
  require_dims(v.size() == h.subcarriers() && symbols.size() == h.subcarriers(),
               "transmit_payload: subcarrier count mismatch");
  require_dims(v.rows() == h.cols(), "transmit_payload: precoder rows must equal N_t");
  require_dims(symbols.rows() == v.cols(), "transmit_payload: symbol streams must equal L");
  MatrixStack y(h.subcarriers(), h.rows(), symbols.cols());
  for (Index k = 0; k < h.subcarriers(); ++k) {
    y[k].noalias() = h[k] * (v[k] * symbols[k]);
    if (noise_var > 0.0) {
      for (Index m = 0; m < y.cols(); ++m) {
        for (Index r = 0; r < y.rows(); ++r) y[k](r, m) += rng.complex_normal(noise_var);
      }
    }
  }
  return y;
}

inline MatrixStack transmit_payload(const FreqChannel& h, const SparsePrecoder& v,
                                    const MatrixStack& symbols, double noise_var,
                                    std::uint64_t seed) {
  Rng rng(seed, Stream::payload_noise);
  return transmit_payload(h, v.expand(), symbols, noise_var, rng);
}

struct Equalized {
  MatrixStack symbols;  // slice k: L x M
  RMat noise_var;       // K x L post-equalization noise estimate
};

// U_k = H^_e,k (H^_e,k^H H^_e,k + sigma^2 I)^{-1}, r^ = U_k^H y. The demapper
// noise is sigma^2 (U^H U)_ll + [(I - U^H H^)(I - U^H H^)^H]_ll.
inline Equalized lmmse_decorrelate(const FreqChannel& h_eff, double noise_var, const MatrixStack& y) {
  require(noise_var >= 0.0, "link", "noise variance must be non-negative");
  require_dims(y.size() == h_eff.subcarriers() && y.rows() == h_eff.rows(),
               "lmmse_decorrelate: observation shape mismatch");
  const Index l = h_eff.cols();
  Equalized out{MatrixStack(h_eff.subcarriers(), l, y.cols()), RMat(h_eff.subcarriers(), l)};
  for (Index k = 0; k < h_eff.subcarriers(); ++k) {
    const CMat& e = h_eff[k];
    const CMat gram = e.adjoint() * e;
    CMat u;
    if (noise_var > 0.0) {
      u = Eigen::LLT<CMat>(gram + noise_var * CMat::Identity(l, l)).solve(e.adjoint()).adjoint();
    } else {
      Eigen::SelfAdjointEigenSolver<CMat> eig(gram);
      RVec inv = eig.eigenvalues();
      for (Index i = 0; i < l; ++i) inv(i) = inv(i) > 1e-12 ? 1.0 / inv(i) : 0.0;
      u = e * eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().adjoint();
    }
    out.symbols[k].noalias() = u.adjoint() * y[k];
    const CMat resid = CMat::Identity(l, l) - u.adjoint() * e;
    for (Index i = 0; i < l; ++i) {
      const double nv = noise_var * u.col(i).squaredNorm() + resid.row(i).squaredNorm();
      out.noise_var(k, i) = std::max(nv, 1e-12);
    }
  }
  return out;
}

// (1 / 2N) sum (1 - beta beta^)
inline double ber(const BitBlock& bits, const BitBlock& decided) {
  require_dims(bits.same_shape(decided), "ber: shape mismatch");
  require_dims(!bits.bits.empty(), "ber: empty bit block");
  double acc = 0.0;
  for (std::size_t i = 0; i < bits.bits.size(); ++i) {
    acc += 1.0 - static_cast<double>(bits.bits[i]) * static_cast<double>(decided.bits[i]);
  }
  return acc / (2.0 * static_cast<double>(bits.bits.size()));
}

// Mean binary cross-entropy, returned as a positive loss.
inline double cross_entropy(const BitBlock& bits, const SoftBits& probs) {
  require_dims(bits.symbols == probs.symbols && bits.subcarriers == probs.subcarriers &&
                   bits.streams == probs.streams && bits.bits_per_symbol == probs.bits_per_symbol,
               "cross_entropy: shape mismatch");
  require_dims(!bits.bits.empty(), "cross_entropy: empty bit block");
  constexpr double kEps = 1e-12;
  double acc = 0.0;
  for (std::size_t i = 0; i < bits.bits.size(); ++i) {
    const double p = std::clamp(probs.probs[i], kEps, 1.0 - kEps);
    const double u = 0.5 * (1.0 + static_cast<double>(bits.bits[i]));
    acc += u * std::log(p) + (1.0 - u) * std::log(1.0 - p);
  }
  return -acc / static_cast<double>(bits.bits.size());
}

// sum |r^ - r|^2 / sum |r|^2 over all symbols.
inline double symbol_evm(const MatrixStack& estimate, const MatrixStack& reference) {
  const double ref = reference.energy();
  require_dims(ref > 0.0, "symbol_evm: zero reference energy");
  return squared_distance(estimate, reference) / ref;
}

}  // namespace ddsp
