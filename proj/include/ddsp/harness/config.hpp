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

// Experiment configuration: flat `key = value` text with section prefixes.
//
//   # comment
//   channel.n_tx = 4
//   link.snr_db = 10, 20, 30
//
// Lists are comma separated. Unknown keys, malformed values and every
// invariant violation raise ConfigError labeled with the offending stage.
// See README.md for the full key table.

#include "ddsp/channel.hpp"
#include "ddsp/chanest.hpp"
#include "ddsp/core.hpp"
#include "ddsp/precoder.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>

namespace ddsp {

enum class CsirMode { full_dmrs_lmmse, sparse_fdm };

inline std::string_view to_string(CsirMode m) {
  return m == CsirMode::full_dmrs_lmmse ? "full_dmrs_lmmse" : "sparse_fdm";
}

inline CsirMode parse_csir_mode(std::string_view s) {
  if (s == "full_dmrs_lmmse") return CsirMode::full_dmrs_lmmse;
  if (s == "sparse_fdm") return CsirMode::sparse_fdm;
  throw ConfigError("link", "unknown csir mode '" + std::string(s) + "'");
}

struct ExperimentConfig {
  ChannelParams channel = default_channel_params(4, 4, 256, 18);

  PrecoderKind precoder = PrecoderKind::evm_bcd;
  Index streams = 2;          // L
  Index precoder_taps = 14;   // D_v
  double tx_power = 1.0;      // P_T per subcarrier
  Index bcd_max_iters = 30;
  double bcd_tol = 1e-6;
  Index unrolled_iters = 3;

  Index bits_per_symbol = 8;
  Index payload_symbols = 2;  // M
  std::vector<double> snr_db{30.0};
  double uplink_snr_db = 20.0;
  Index srs_streams_per_symbol = 8;   // A_u
  Index dmrs_streams_per_symbol = 0;  // A_r, 0 = largest divisor of K with K >= A_r * window
  CsirMode csir = CsirMode::sparse_fdm;
  bool perfect_csit = false;
  bool perfect_csir = false;

  EstimatorConfig csit_estimator;
  EstimatorConfig csir_estimator;
  std::vector<EstimatorKind> sweep_estimators{EstimatorKind::ls, EstimatorKind::antialias,
                                              EstimatorKind::omp, EstimatorKind::lasso,
                                              EstimatorKind::gamsse};

  Index trials = 50;
  std::uint64_t seed = 1;
  Index threads = 1;
  std::string out;
  std::vector<Index> report_windows;  // empty = {D, D_eff}

  Index n_subcarriers() const { return channel.n_subcarriers; }
  Index delay_spread() const { return channel.max_delay_spread; }

  double downlink_noise_var(double snr) const { return tx_power * std::pow(10.0, -snr / 10.0); }
  double uplink_noise_var() const { return std::pow(10.0, -uplink_snr_db / 10.0); }

  void validate() const;
};

// Delay window the receiver needs for the effective channel of `kind`.
inline Index csir_window(PrecoderKind kind, Index delay_spread, Index precoder_taps,
                         Index n_subcarriers, Index a_r) {
  switch (kind) {
    case PrecoderKind::common: return delay_spread;
    case PrecoderKind::evm_bcd:
    case PrecoderKind::evm_bcd_unrolled: return effective_delay_spread(delay_spread, precoder_taps);
    case PrecoderKind::svd_per_subcarrier: return n_subcarriers / a_r;
  }
  return n_subcarriers;
}

// Largest divisor A of K with A * window <= K.
inline Index auto_streams_per_symbol(Index n_subcarriers, Index window) {
  require(window >= 1 && window <= n_subcarriers, "link", "window must lie in [1, K]");
  for (Index a = n_subcarriers / window; a >= 1; --a) {
    if (n_subcarriers % a == 0) return a;
  }
  return 1;
}

// A_r actually used by the sparse DMRS for a precoder kind.
inline Index dmrs_streams_per_symbol(const ExperimentConfig& cfg, PrecoderKind kind) {
  if (cfg.dmrs_streams_per_symbol > 0) return cfg.dmrs_streams_per_symbol;
  const Index window = kind == PrecoderKind::svd_per_subcarrier
                           ? cfg.delay_spread()
                           : csir_window(kind, cfg.delay_spread(), cfg.precoder_taps,
                                         cfg.n_subcarriers(), 1);
  return auto_streams_per_symbol(cfg.n_subcarriers(), window);
}

inline Index csir_window(const ExperimentConfig& cfg, PrecoderKind kind) {
  return csir_window(kind, cfg.delay_spread(), cfg.precoder_taps, cfg.n_subcarriers(),
                     dmrs_streams_per_symbol(cfg, kind));
}

// ceil(L * D_eff / K)
inline Index sparse_dmrs_symbol_bound(Index streams, Index window, Index n_subcarriers) {
  return (streams * window + n_subcarriers - 1) / n_subcarriers;
}

inline void ExperimentConfig::validate() const {
  channel.validate();
  const Index k = n_subcarriers();
  constexpr const char* kPre = "precoder";
  constexpr const char* kLink = "link";
  constexpr const char* kRun = "run";
  require(streams >= 1 && streams <= std::min(channel.n_tx, channel.n_rx), kPre,
          "streams L must lie in [1, min(n_tx, n_rx)]");
  require(precoder_taps >= 1 && precoder_taps <= k, kPre, "taps D_v must lie in [1, K]");
  require(tx_power > 0.0 && std::isfinite(tx_power), kPre, "power must be positive");
  require(bcd_max_iters >= 1, kPre, "max_iters must be >= 1");
  require(bcd_tol > 0.0, kPre, "tol must be positive");
  require(unrolled_iters >= 1, kPre, "unrolled_iters must be >= 1");

  require(bits_per_symbol >= 2 && bits_per_symbol <= 12 && bits_per_symbol % 2 == 0, kLink,
          "bits_per_symbol must be even and in [2, 12]");
  require(payload_symbols >= 1, kLink, "payload_symbols must be >= 1");
  require(!snr_db.empty(), kLink, "snr_db grid must be non-empty");
  for (double s : snr_db) require(!std::isnan(s), kLink, "snr_db entries must be numbers");
  require(!std::isnan(uplink_snr_db), kLink, "uplink_snr_db must be a number");
  require(srs_streams_per_symbol >= 1 && k % srs_streams_per_symbol == 0, kLink,
          "srs_streams_per_symbol must divide K");
  require(srs_streams_per_symbol * delay_spread() <= k, kLink,
          "srs_streams_per_symbol * D must not exceed K (identifiability)");
  require(dmrs_streams_per_symbol >= 0, kLink, "dmrs_streams_per_symbol must be >= 0");
  if (dmrs_streams_per_symbol > 0) {
    require(k % dmrs_streams_per_symbol == 0, kLink, "dmrs_streams_per_symbol must divide K");
  }
  if (csir == CsirMode::sparse_fdm && !perfect_csir &&
      precoder != PrecoderKind::svd_per_subcarrier) {
    const Index w = csir_window(*this, precoder);
    require(::ddsp::dmrs_streams_per_symbol(*this, precoder) * w <= k, kLink,
            "dmrs_streams_per_symbol * csir window (" + std::to_string(w) +
                ") must not exceed K (identifiability)");
  }

  auto check_est = [&](const EstimatorConfig& e, Index window) {
    EstimatorConfig c = e;
    c.window = window;
    c.validate(k);
  };
  check_est(csit_estimator, delay_spread());
  if (precoder != PrecoderKind::svd_per_subcarrier) {
    check_est(csir_estimator, csir_window(*this, precoder));
  }
  require(!sweep_estimators.empty(), "estimator", "estimator.sweep must be non-empty");

  require(trials >= 1, kRun, "trials must be >= 1");
  require(threads >= 1, kRun, "threads must be >= 1");
  for (Index w : report_windows) require(w >= 1 && w <= k, kRun, "report windows must lie in [1, K]");
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

inline std::string stage_of(const std::string& key) {
  const auto dot = key.find('.');
  return dot == std::string::npos ? std::string("config") : key.substr(0, dot);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(stage_of(key), "'" + key + "' expects a number, got '" + v + "'");
}

inline Index parse_index(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return static_cast<Index>(x);
  } catch (const std::exception&) {
  }
  throw ConfigError(stage_of(key), "'" + key + "' expects an integer, got '" + v + "'");
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(stage_of(key), "'" + key + "' expects true/false, got '" + v + "'");
}

template <class T, class F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F&& one) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(one(key, item));
  if (out.empty()) throw ConfigError(stage_of(key), "'" + key + "' expects a non-empty list");
  return out;
}

}  // namespace detail

// Applies one key to `cfg`. Throws ConfigError for unknown keys or bad values.
inline void apply_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& v) {
  using namespace detail;
  auto est_key = [&](EstimatorConfig& e, const std::string& field) -> bool {
    if (field == "kind") e.kind = parse_estimator_kind(v);
    else if (field == "omp_max_taps") e.omp_max_taps = parse_index(key, v);
    else if (field == "omp_residual_tol") e.omp_residual_tol = parse_double(key, v);
    else if (field == "lasso_reg") e.lasso_reg = parse_double(key, v);
    else if (field == "lasso_max_iter") e.lasso_max_iter = parse_index(key, v);
    else if (field == "lasso_tol") e.lasso_tol = parse_double(key, v);
    else return false;
    return true;
  };
  auto& ch = cfg.channel;
  if (key == "channel.n_tx") ch.n_tx = parse_index(key, v);
  else if (key == "channel.n_rx") ch.n_rx = parse_index(key, v);
  else if (key == "channel.n_subcarriers") ch.n_subcarriers = parse_index(key, v);
  else if (key == "channel.delay_spread") ch.max_delay_spread = parse_index(key, v);
  else if (key == "channel.cluster_delays") ch.cluster_delays = parse_list<Index>(key, v, parse_index);
  else if (key == "channel.cluster_powers") ch.cluster_powers = parse_list<double>(key, v, parse_double);
  else if (key == "channel.rays_per_cluster") ch.rays_per_cluster = parse_list<Index>(key, v, parse_index);
  else if (key == "channel.angle_spread") ch.angle_spread = parse_list<double>(key, v, parse_double);
  else if (key == "precoder.kind") cfg.precoder = parse_precoder_kind(v);
  else if (key == "precoder.streams") cfg.streams = parse_index(key, v);
  else if (key == "precoder.taps") cfg.precoder_taps = parse_index(key, v);
  else if (key == "precoder.power") cfg.tx_power = parse_double(key, v);
  else if (key == "precoder.max_iters") cfg.bcd_max_iters = parse_index(key, v);
  else if (key == "precoder.tol") cfg.bcd_tol = parse_double(key, v);
  else if (key == "precoder.unrolled_iters") cfg.unrolled_iters = parse_index(key, v);
  else if (key == "link.bits_per_symbol") cfg.bits_per_symbol = parse_index(key, v);
  else if (key == "link.payload_symbols") cfg.payload_symbols = parse_index(key, v);
  else if (key == "link.snr_db") cfg.snr_db = parse_list<double>(key, v, parse_double);
  else if (key == "link.uplink_snr_db") cfg.uplink_snr_db = parse_double(key, v);
  else if (key == "link.srs_streams_per_symbol") cfg.srs_streams_per_symbol = parse_index(key, v);
  else if (key == "link.dmrs_streams_per_symbol") cfg.dmrs_streams_per_symbol = parse_index(key, v);
  else if (key == "link.csir") cfg.csir = parse_csir_mode(v);
  else if (key == "link.perfect_csit") cfg.perfect_csit = parse_bool(key, v);
  else if (key == "link.perfect_csir") cfg.perfect_csir = parse_bool(key, v);
  else if (key.rfind("estimator.csit.", 0) == 0 && est_key(cfg.csit_estimator, key.substr(15))) {}
  else if (key.rfind("estimator.csir.", 0) == 0 && est_key(cfg.csir_estimator, key.substr(15))) {}
  else if (key == "estimator.sweep") {
    cfg.sweep_estimators = parse_list<EstimatorKind>(
        key, v, [](const std::string&, const std::string& s) { return parse_estimator_kind(s); });
  }
  else if (key == "run.trials") cfg.trials = parse_index(key, v);
  else if (key == "run.seed") cfg.seed = static_cast<std::uint64_t>(parse_index(key, v));
  else if (key == "run.threads") cfg.threads = parse_index(key, v);
  else if (key == "run.out") cfg.out = v;
  else if (key == "run.report_windows") cfg.report_windows = parse_list<Index>(key, v, parse_index);
  else throw ConfigError(stage_of(key), "unknown key '" + key + "'");
}

// Parses config text. Cluster fields left unset fall back to the default
// three-cluster profile of the final D.
inline ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  bool clusters_set = false;
  std::string line;
  Index lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config", "line " + std::to_string(lineno) + ": expected key = value");
    }
    const auto key = detail::trim(std::string_view(t).substr(0, eq));
    const auto value = detail::trim(std::string_view(t).substr(eq + 1));
    if (value.empty()) {
      throw ConfigError(detail::stage_of(key), "line " + std::to_string(lineno) + ": empty value for '" + key + "'");
    }
    if (key.rfind("channel.cluster", 0) == 0 || key == "channel.rays_per_cluster" ||
        key == "channel.angle_spread") {
      clusters_set = true;
    }
    apply_config_key(cfg, key, value);
  }
  if (!clusters_set) {
    const auto d = default_channel_params(cfg.channel.n_tx, cfg.channel.n_rx,
                                          cfg.channel.n_subcarriers, cfg.channel.max_delay_spread);
    cfg.channel.cluster_delays = d.cluster_delays;
    cfg.channel.cluster_powers = d.cluster_powers;
    cfg.channel.rays_per_cluster = d.rays_per_cluster;
    cfg.channel.angle_spread = d.angle_spread;
  }
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config", "cannot open '" + path + "'");
  return parse_config(is);
}

}  // namespace ddsp
