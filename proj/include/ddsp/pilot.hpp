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

// Uniformly sampled FDM pilot schedules.
//
// Stream n (0-based) is sent in OFDM symbol n / A on the residue class
// {k : k mod A = n mod A}. Every stream carries a column of a unitary cover
// matrix S: on an occupied subcarrier the transmitted pilot vector is S[:, n],
// so the receiver sees G_k S[:, n] and recovers G_k = (G_k S) S^H.

#include "ddsp/channel.hpp"
#include "ddsp/core.hpp"
#include "ddsp/dft.hpp"
#include "ddsp/rng.hpp"
#include "ddsp/types.hpp"

#include <sstream>
#include <string>

namespace ddsp {

// {k : k mod A = a, 0 <= k < K}
inline std::vector<Index> fdm_pattern(Index n_subcarriers, Index streams_per_symbol, Index a) {
  require(streams_per_symbol >= 1, "pilot", "A must be >= 1");
  require(n_subcarriers % streams_per_symbol == 0, "pilot",
          "A = " + std::to_string(streams_per_symbol) + " must divide K = " +
              std::to_string(n_subcarriers));
  require(a >= 0 && a < streams_per_symbol, "pilot", "residue a must lie in [0, A)");
  std::vector<Index> omega;
  omega.reserve(static_cast<std::size_t>(n_subcarriers / streams_per_symbol));
  for (Index k = a; k < n_subcarriers; k += streams_per_symbol) omega.push_back(k);
  return omega;
}

// Largest A for which a D-tap channel stays identifiable from K/A samples.
inline Index max_streams_per_symbol(Index n_subcarriers, Index delay_spread) {
  require(delay_spread >= 1 && delay_spread <= n_subcarriers, "pilot", "need 1 <= D <= K");
  return n_subcarriers / delay_spread;
}

enum class CoverKind { identity, dft };

struct PilotSchedule {
  Index n_subcarriers = 0;
  Index streams_per_symbol = 0;  // A
  Index n_streams = 0;
  Index n_symbols = 0;
  std::vector<std::vector<Index>> omega;  // per stream
  CMat cover;                             // n_streams x n_streams, unitary

  Index symbol_of(Index stream) const { return stream / streams_per_symbol; }
  Index residue_of(Index stream) const { return stream % streams_per_symbol; }

  // Stream occupying (symbol, subcarrier), or -1.
  Index stream_at(Index symbol, Index k) const {
    const Index n = symbol * streams_per_symbol + k % streams_per_symbol;
    return (symbol >= 0 && symbol < n_symbols && n < n_streams) ? n : -1;
  }

  // Resource elements actually carrying pilots.
  Index occupied_elements() const {
    return n_streams * (n_subcarriers / streams_per_symbol);
  }
};

inline PilotSchedule build_schedule(Index n_subcarriers, Index streams_per_symbol, Index n_streams,
                                    CoverKind cover_kind = CoverKind::dft) {
  require(n_streams >= 1, "pilot", "n_streams must be >= 1");
  require(streams_per_symbol >= 1 && streams_per_symbol <= n_subcarriers, "pilot",
          "A must lie in [1, K]");
  PilotSchedule s;
  s.n_subcarriers = n_subcarriers;
  s.streams_per_symbol = streams_per_symbol;
  s.n_streams = n_streams;
  s.n_symbols = (n_streams + streams_per_symbol - 1) / streams_per_symbol;
  for (Index n = 0; n < n_streams; ++n) {
    s.omega.push_back(fdm_pattern(n_subcarriers, streams_per_symbol, n % streams_per_symbol));
  }
  s.cover = cover_kind == CoverKind::dft ? unitary_dft(n_streams)
                                         : CMat::Identity(n_streams, n_streams);
  return s;
}

// Symbols x subcarriers occupancy grid; stream indices in base 36, '.' idle.
inline std::string occupancy_grid(const PilotSchedule& s, Index max_subcarriers = 64) {
  static constexpr char kDigits[] = "0123456789abcdefghijklmnopqrstuvwxyz";
  std::ostringstream os;
  const Index shown = std::min(max_subcarriers, s.n_subcarriers);
  os << "# pilot occupancy: K=" << s.n_subcarriers << " A=" << s.streams_per_symbol
     << " streams=" << s.n_streams << " symbols=" << s.n_symbols << " (first " << shown
     << " subcarriers)\n";
  for (Index m = 0; m < s.n_symbols; ++m) {
    os << "m=" << m << " ";
    for (Index k = 0; k < shown; ++k) {
      const Index n = s.stream_at(m, k);
      os << (n < 0 ? '.' : kDigits[n % 36]);
    }
    os << '\n';
  }
  return os.str();
}

// Uplink sounding observes H_k^T (the TX sees the RX pilots); downlink DMRS
// observes the effective channel H_e,k as is.
enum class PilotLink { uplink, downlink };

struct PilotObservation {
  std::vector<CMat> symbols;  // per OFDM symbol: K x n_obs_antennas
  double noise_var = 0.0;
  PilotSchedule schedule;
  PilotLink link = PilotLink::downlink;

  Index n_obs_antennas() const { return symbols.empty() ? 0 : symbols.front().cols(); }
};

// The matrix G_k whose columns are driven by the pilot streams.
inline FreqChannel pilot_view(const FreqChannel& h, PilotLink link) {
  return link == PilotLink::uplink ? transpose_slices(h) : h;
}

inline PilotObservation observe_pilots(const FreqChannel& h, const PilotSchedule& sched,
                                       double noise_var, Rng& rng, PilotLink link) {
  require(noise_var >= 0.0, "pilot", "noise variance must be non-negative");
  const FreqChannel g = pilot_view(h, link);
  require_dims(g.subcarriers() == sched.n_subcarriers,
               "observe_pilots: channel subcarriers differ from schedule K");
  require_dims(g.cols() == sched.n_streams,
               "observe_pilots: channel stream dimension differs from schedule");
  PilotObservation obs;
  obs.noise_var = noise_var;
  obs.schedule = sched;
  obs.link = link;
  for (Index m = 0; m < sched.n_symbols; ++m) {
    CMat y(sched.n_subcarriers, g.rows());
    for (Index k = 0; k < sched.n_subcarriers; ++k) {
      const Index n = sched.stream_at(m, k);
      if (n >= 0) {
        y.row(k) = (g[k] * sched.cover.col(n)).transpose();
      } else {
        y.row(k).setZero();
      }
      if (noise_var > 0.0) {
        for (Index r = 0; r < y.cols(); ++r) y(k, r) += rng.complex_normal(noise_var);
      }
    }
    obs.symbols.push_back(std::move(y));
  }
  return obs;
}

// Conventional DMRS over L symbols: Y_p,k = H_e,k R_p + Z_p,k.
inline std::vector<CMat> observe_dmrs_full(const FreqChannel& h_eff, const CMat& r_p,
                                           double noise_var, Rng& rng) {
  require(noise_var >= 0.0, "pilot", "noise variance must be non-negative");
  require_dims(r_p.rows() == h_eff.cols() && r_p.cols() == h_eff.cols(),
               "observe_dmrs_full: R_p must be L x L");
  std::vector<CMat> y;
  y.reserve(static_cast<std::size_t>(h_eff.subcarriers()));
  for (Index k = 0; k < h_eff.subcarriers(); ++k) {
    CMat yk = h_eff[k] * r_p;
    if (noise_var > 0.0) {
      for (Index j = 0; j < yk.cols(); ++j) {
        for (Index i = 0; i < yk.rows(); ++i) yk(i, j) += rng.complex_normal(noise_var);
      }
    }
    y.push_back(std::move(yk));
  }
  return y;
}

}  // namespace ddsp
