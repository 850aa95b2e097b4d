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

// Seeded Monte-Carlo link experiments.
//
// Trial t uses seed = base_seed + t. Every stage draws from its own named
// RNG stream of that seed, so the channel, pilot noise, payload bits and
// payload noise are shared by every SNR point and every scheme of the trial.
// Trials may run on several threads; rows are reduced in trial order, so the
// CSV output does not depend on the thread count.

#include "ddsp/chanest.hpp"
#include "ddsp/channel.hpp"
#include "ddsp/harness/config.hpp"
#include "ddsp/harness/csv.hpp"
#include "ddsp/io.hpp"
#include "ddsp/link.hpp"
#include "ddsp/pilot.hpp"
#include "ddsp/precoder.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

namespace ddsp {

struct Overhead {
  Index srs_symbols = 0;
  Index dmrs_symbols = 0;               // symbols actually spent on DMRS
  Index dmrs_symbols_bound = 0;         // ceil(L D_eff / K)
  Index conventional_dmrs_symbols = 0;  // L

  double reduction() const {
    return static_cast<double>(conventional_dmrs_symbols) / static_cast<double>(dmrs_symbols_bound);
  }
};

struct LinkResult {
  double snr_db = 0.0;
  Index trial = 0;
  std::uint64_t seed = 0;
  double ber = 0.0;
  double cross_entropy = 0.0;
  double nmse_csit = 0.0;
  double nmse_csir = 0.0;
  double evm = 0.0;
  Overhead overhead;
  double wallclock_s = 0.0;  // informational, never written to CSV
};

struct PrecoderDesign {
  SparsePrecoder precoder;
  std::optional<BcdTrace> trace;
};

// Intermediates of one trial at one SNR point.
struct TrialDebug {
  double snr_db = 0.0;
  FreqChannel channel;
  FreqChannel channel_csit;
  SparsePrecoder precoder;
  std::optional<BcdTrace> trace;
  FreqChannel effective;
  FreqChannel effective_csir;
  BitBlock bits;
  BitBlock decided;
};

inline PrecoderDesign design_precoder(const ExperimentConfig& cfg, PrecoderKind kind,
                                      const FreqChannel& h, double noise_var) {
  switch (kind) {
    case PrecoderKind::svd_per_subcarrier:
      return {svd_per_subcarrier(h, cfg.streams, cfg.tx_power), std::nullopt};
    case PrecoderKind::common:
      return {common_covariance_precoder(h, cfg.streams, cfg.tx_power), std::nullopt};
    case PrecoderKind::evm_bcd:
    case PrecoderKind::evm_bcd_unrolled: {
      BcdOptions opts = kind == PrecoderKind::evm_bcd ? BcdOptions::optimized()
                                                      : BcdOptions::unrolled(cfg.unrolled_iters);
      if (kind == PrecoderKind::evm_bcd) {
        opts.max_iters = cfg.bcd_max_iters;
        opts.tol = cfg.bcd_tol;
      }
      auto res = evm_bcd_precoder(h, cfg.streams, cfg.precoder_taps, cfg.tx_power, noise_var, opts);
      return {std::move(res.precoder), std::move(res.trace)};
    }
  }
  throw ConfigError("precoder", "unhandled precoder kind");
}

inline EstimatorConfig with_window(EstimatorConfig e, Index window) {
  e.window = window;
  return e;
}

// Uplink sounding of H^T with one pilot stream per RX antenna.
inline PilotObservation sound_uplink(const ExperimentConfig& cfg, const FreqChannel& h,
                                     double noise_var, std::uint64_t seed) {
  const auto sched = build_schedule(cfg.n_subcarriers(), cfg.srs_streams_per_symbol, h.rows());
  Rng rng(seed, Stream::srs_noise);
  return observe_pilots(h, sched, noise_var, rng, PilotLink::uplink);
}

// One trial at every SNR point of cfg.snr_db. `debug`, if given, receives
// one record per SNR point.
inline std::vector<LinkResult> run_trial(const ExperimentConfig& cfg, Index trial,
                                         std::vector<TrialDebug>* debug = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(trial);
  const Index k_total = cfg.n_subcarriers();
  const Index l = cfg.streams;

  const FreqChannel h = gen_clustered_channel(cfg.channel, seed);

  FreqChannel h_csit = h;
  double nmse_csit = 0.0;
  Index srs_symbols = 0;
  {
    const auto obs = sound_uplink(cfg, h, cfg.uplink_noise_var(), seed);
    srs_symbols = obs.schedule.n_symbols;
    if (!cfg.perfect_csit) {
      const auto est = estimate_channel(obs, with_window(cfg.csit_estimator, cfg.delay_spread()),
                                        prior_tap_variance(cfg.channel, cfg.delay_spread()));
      h_csit = est.freq;
      nmse_csit = nmse(h_csit, h);
    }
  }

  Rng bit_rng(seed, Stream::payload_bits);
  const BitBlock bits = random_bits(cfg.payload_symbols, k_total, l, cfg.bits_per_symbol, bit_rng);
  const MatrixStack symbols = qam_modulate(bits);

  const Index a_r = dmrs_streams_per_symbol(cfg, cfg.precoder);
  const Index window = csir_window(cfg, cfg.precoder);

  std::vector<LinkResult> rows;
  for (double snr : cfg.snr_db) {
    const double noise_var = cfg.downlink_noise_var(snr);
    auto design = design_precoder(cfg, cfg.precoder, h_csit, noise_var);
    const MatrixStack v = design.precoder.expand();
    const FreqChannel h_eff = effective_channel(h, v);

    LinkResult row;
    row.snr_db = snr;
    row.trial = trial;
    row.seed = seed;
    row.nmse_csit = nmse_csit;
    row.overhead.srs_symbols = srs_symbols;
    row.overhead.conventional_dmrs_symbols = l;
    row.overhead.dmrs_symbols_bound = sparse_dmrs_symbol_bound(l, window, k_total);

    FreqChannel h_eff_hat = h_eff;
    Rng dmrs_rng(seed, Stream::dmrs_noise);
    if (cfg.csir == CsirMode::full_dmrs_lmmse) {
      const CMat r_p = unitary_dft(l);
      row.overhead.dmrs_symbols = l;
      const auto y_p = observe_dmrs_full(h_eff, r_p, noise_var, dmrs_rng);
      if (!cfg.perfect_csir) h_eff_hat = lmmse_dmrs_full(y_p, r_p, noise_var);
    } else {
      const auto sched = build_schedule(k_total, a_r, l);
      row.overhead.dmrs_symbols = sched.n_symbols;
      if (!cfg.perfect_csir) {
        const auto obs = observe_pilots(h_eff, sched, noise_var, dmrs_rng, PilotLink::downlink);
        const RVec genie = tap_power_profile(freq_to_delay(h_eff, window));
        h_eff_hat = estimate_channel(obs, with_window(cfg.csir_estimator, window), genie).freq;
      }
    }
    row.nmse_csir = cfg.perfect_csir ? 0.0 : nmse(h_eff_hat, h_eff);

    Rng noise_rng(seed, Stream::payload_noise);
    const MatrixStack y = transmit_payload(h, v, symbols, noise_var, noise_rng);
    const auto eq = lmmse_decorrelate(h_eff_hat, noise_var, y);
    const SoftBits probs = soft_demap(eq.symbols, eq.noise_var, cfg.bits_per_symbol);
    BitBlock decided = hard_decision(probs);
    row.ber = ber(bits, decided);
    row.cross_entropy = cross_entropy(bits, probs);
    row.evm = symbol_evm(eq.symbols, symbols);
    row.wallclock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(row);

    if (debug != nullptr) {
      debug->push_back(TrialDebug{snr, h, h_csit, design.precoder, design.trace, h_eff, h_eff_hat,
                                  bits, std::move(decided)});
    }
  }
  return rows;
}

inline LinkResult run_link_trial(const ExperimentConfig& cfg, Index trial, double snr_db) {
  ExperimentConfig one = cfg;
  one.snr_db = {snr_db};
  return run_trial(one, trial).front();
}

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(Index n, Index threads, Fn&& fn) {
  std::atomic<Index> next{0};
  auto worker = [&] {
    for (Index i = next++; i < n; i = next++) fn(i);
  };
  const Index workers = std::min(threads, n);
  if (workers <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (Index w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

struct TrialOutcome {
  std::vector<LinkResult> rows;
  std::exception_ptr error;
  std::string message;
};

inline std::vector<TrialOutcome> run_trials(const ExperimentConfig& cfg,
                                            std::vector<std::vector<TrialDebug>>* debug = nullptr) {
  std::vector<TrialOutcome> out(static_cast<std::size_t>(cfg.trials));
  if (debug != nullptr) debug->assign(static_cast<std::size_t>(cfg.trials), {});
  parallel_for(cfg.trials, cfg.threads, [&](Index t) {
    auto& o = out[static_cast<std::size_t>(t)];
    try {
      o.rows = run_trial(cfg, t, debug != nullptr ? &(*debug)[static_cast<std::size_t>(t)] : nullptr);
    } catch (const std::exception& e) {
      o.error = std::current_exception();
      o.message = e.what();
    }
  });
  return out;
}

inline const std::vector<std::string>& ber_csv_header() {
  static const std::vector<std::string> h{
      "snr_db", "trial", "seed", "ber", "cross_entropy", "nmse_csit", "nmse_csir", "evm",
      "srs_symbols", "dmrs_symbols", "dmrs_symbols_bound", "conventional_dmrs_symbols", "status"};
  return h;
}

inline void write_ber_row(CsvWriter& w, const LinkResult& r, const std::string& trial,
                          const std::string& status) {
  w.field(r.snr_db).field(trial).field(r.seed).field(r.ber).field(r.cross_entropy)
      .field(r.nmse_csit).field(r.nmse_csir).field(r.evm).field(r.overhead.srs_symbols)
      .field(r.overhead.dmrs_symbols).field(r.overhead.dmrs_symbols_bound)
      .field(r.overhead.conventional_dmrs_symbols).field(status).end_row();
}

struct BerSweep {
  std::vector<LinkResult> rows;        // snr-major, trial-minor
  std::vector<LinkResult> aggregates;  // one per snr point, trial = -1
};

inline LinkResult mean_row(const std::vector<LinkResult>& rows, std::uint64_t base_seed) {
  LinkResult m = rows.front();
  m.trial = -1;
  m.seed = base_seed;
  m.ber = m.cross_entropy = m.nmse_csit = m.nmse_csir = m.evm = m.wallclock_s = 0.0;
  for (const auto& r : rows) {
    m.ber += r.ber;
    m.cross_entropy += r.cross_entropy;
    m.nmse_csit += r.nmse_csit;
    m.nmse_csir += r.nmse_csir;
    m.evm += r.evm;
    m.wallclock_s += r.wallclock_s;
  }
  const double n = static_cast<double>(rows.size());
  m.ber /= n;
  m.cross_entropy /= n;
  m.nmse_csit /= n;
  m.nmse_csir /= n;
  m.evm /= n;
  return m;
}

inline void dump_debug(const std::string& dir, const std::vector<TrialDebug>& records) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& d = records[i];
    const std::string p = (fs::path(dir) / ("snr" + std::to_string(i) + "_")).string();
    save_channel(p + "channel.csv", d.channel);
    save_channel(p + "channel_csit.csv", d.channel_csit);
    save_channel(p + "effective.csv", d.effective);
    save_channel(p + "effective_csir.csv", d.effective_csir);
    save_channel(p + "precoder_taps.csv", FreqChannel(d.precoder.taps().data));
  }
}

// Runs the sweep and writes the CSV to `os`. On a failed trial the rows
// before it are flushed, an error row is written and the failure rethrown.
inline BerSweep run_ber_sweep(const ExperimentConfig& cfg, std::ostream& os,
                              const std::string& debug_dir = {}) {
  cfg.validate();
  std::vector<std::vector<TrialDebug>> debug;
  const auto outcomes = run_trials(cfg, debug_dir.empty() ? nullptr : &debug);

  CsvWriter w(os);
  w.row(ber_csv_header());
  BerSweep sweep;
  for (std::size_t s = 0; s < cfg.snr_db.size(); ++s) {
    std::vector<LinkResult> at_snr;
    for (Index t = 0; t < cfg.trials; ++t) {
      const auto& o = outcomes[static_cast<std::size_t>(t)];
      if (o.error) {
        LinkResult err;
        err.snr_db = cfg.snr_db[s];
        err.trial = t;
        err.seed = cfg.seed + static_cast<std::uint64_t>(t);
        write_ber_row(w, err, std::to_string(t), "error: " + o.message);
        w.flush();
        std::rethrow_exception(o.error);
      }
      const auto& r = o.rows[s];
      write_ber_row(w, r, std::to_string(t), "ok");
      at_snr.push_back(r);
      sweep.rows.push_back(r);
    }
    const auto m = mean_row(at_snr, cfg.seed);
    write_ber_row(w, m, "mean", "ok");
    sweep.aggregates.push_back(m);
  }
  w.flush();
  if (!debug_dir.empty() && !debug.empty()) dump_debug(debug_dir, debug.front());
  return sweep;
}

struct NmseRow {
  double snr_db = 0.0;
  EstimatorKind estimator = EstimatorKind::antialias;
  double nmse_mean = 0.0;
  double nmse_std = 0.0;
  Index trials = 0;
  std::uint64_t seed = 0;
};

// CSIT estimation sweep; cfg.snr_db is read as the uplink pilot SNR. All
// estimators see the same observation within a trial.
inline std::vector<NmseRow> run_nmse_sweep(const ExperimentConfig& cfg, std::ostream* os = nullptr) {
  cfg.validate();
  const std::size_t n_snr = cfg.snr_db.size();
  const std::size_t n_est = cfg.sweep_estimators.size();
  const Index window = cfg.delay_spread();
  const RVec prior = prior_tap_variance(cfg.channel, window);
  // values[t][s * n_est + e]
  std::vector<std::vector<double>> values(static_cast<std::size_t>(cfg.trials));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.trials));
  parallel_for(cfg.trials, cfg.threads, [&](Index t) {
    try {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(t);
      const FreqChannel h = gen_clustered_channel(cfg.channel, seed);
      auto& v = values[static_cast<std::size_t>(t)];
      for (double snr : cfg.snr_db) {
        const auto obs = sound_uplink(cfg, h, std::pow(10.0, -snr / 10.0), seed);
        for (auto kind : cfg.sweep_estimators) {
          EstimatorConfig e = with_window(cfg.csit_estimator, window);
          e.kind = kind;
          v.push_back(nmse(estimate_channel(obs, e, prior).freq, h));
        }
      }
    } catch (...) {
      errors[static_cast<std::size_t>(t)] = std::current_exception();
    }
  });

  std::vector<NmseRow> rows;
  std::optional<CsvWriter> w;
  if (os != nullptr) {
    w.emplace(*os);
    w->row({"snr_db", "estimator", "nmse_mean", "nmse_std", "trials", "seed"});
  }
  for (std::size_t t = 0; t < errors.size(); ++t) {
    if (errors[t]) {
      if (w) {
        w->field("error").field("trial " + std::to_string(t)).end_row();
        w->flush();
      }
      std::rethrow_exception(errors[t]);
    }
  }
  for (std::size_t s = 0; s < n_snr; ++s) {
    for (std::size_t e = 0; e < n_est; ++e) {
      NmseRow r;
      r.snr_db = cfg.snr_db[s];
      r.estimator = cfg.sweep_estimators[e];
      r.trials = cfg.trials;
      r.seed = cfg.seed;
      for (const auto& v : values) r.nmse_mean += v[s * n_est + e];
      r.nmse_mean /= static_cast<double>(cfg.trials);
      if (cfg.trials > 1) {
        double ss = 0.0;
        for (const auto& v : values) ss += (v[s * n_est + e] - r.nmse_mean) * (v[s * n_est + e] - r.nmse_mean);
        r.nmse_std = std::sqrt(ss / static_cast<double>(cfg.trials - 1));
      }
      if (w) {
        w->field(r.snr_db).field(std::string(to_string(r.estimator))).field(r.nmse_mean)
            .field(r.nmse_std).field(r.trials).field(r.seed).end_row();
      }
      rows.push_back(r);
    }
  }
  if (w) w->flush();
  return rows;
}

struct TapProfileRow {
  std::string series;  // channel | precoder | effective
  Index tap = 0;
  double energy = 0.0;
  double fraction = 0.0;
};

struct TruncationRow {
  std::string series;
  Index window = 0;
  double truncation_nmse = 0.0;
};

struct SparsityReport {
  std::vector<TapProfileRow> profile;
  std::vector<TruncationRow> truncation;
  std::string occupancy;
  Index effective_support = 0;  // 1 + last tap holding energy above 1e-12 relative
};

// Delay-domain energy of the propagation channel, the precoder and the
// effective channel of one trial (seed = base seed), designed on the true
// channel at the first SNR point.
inline SparsityReport run_sparsity_report(const ExperimentConfig& cfg) {
  cfg.validate();
  const Index k_total = cfg.n_subcarriers();
  const FreqChannel h = gen_clustered_channel(cfg.channel, cfg.seed);
  const auto design = design_precoder(cfg, cfg.precoder, h, cfg.downlink_noise_var(cfg.snr_db.front()));
  const FreqChannel v(design.precoder.expand());
  const FreqChannel h_eff = effective_channel(h, v.data);

  SparsityReport rep;
  std::vector<Index> windows = cfg.report_windows;
  if (windows.empty()) {
    windows = {cfg.delay_spread(), effective_delay_spread(cfg.delay_spread(), cfg.precoder_taps)};
    if (windows.back() > k_total) windows.pop_back();
  }
  const std::pair<const char*, const FreqChannel*> series[] = {
      {"channel", &h}, {"precoder", &v}, {"effective", &h_eff}};
  for (const auto& [name, f] : series) {
    const DelayChannel x = freq_to_delay(*f, k_total);
    const double total = x.energy();
    for (Index d = 0; d < k_total; ++d) {
      const double e = x[d].squaredNorm();
      rep.profile.push_back({name, d, e, total > 0.0 ? e / total : 0.0});
      if (std::string_view(name) == "effective" && total > 0.0 && e > 1e-12 * total) {
        rep.effective_support = d + 1;
      }
    }
    for (Index win : windows) {
      rep.truncation.push_back({name, win, delay_support_report(x, win).truncation_nmse});
    }
  }
  const Index a_r = dmrs_streams_per_symbol(cfg, cfg.precoder);
  rep.occupancy = occupancy_grid(build_schedule(k_total, a_r, cfg.streams));
  return rep;
}

inline void write_sparsity_csv(std::ostream& os, const SparsityReport& rep) {
  CsvWriter w(os);
  w.row({"series", "tap", "energy", "fraction"});
  for (const auto& r : rep.profile) w.field(r.series).field(r.tap).field(r.energy).field(r.fraction).end_row();
}

inline void write_truncation_csv(std::ostream& os, const SparsityReport& rep) {
  CsvWriter w(os);
  w.row({"series", "window", "truncation_nmse"});
  for (const auto& r : rep.truncation) w.field(r.series).field(r.window).field(r.truncation_nmse).end_row();
}

inline void write_precoder_csv(std::ostream& os, const SparsePrecoder& p) {
  CsvWriter w(os);
  w.row({"tap", "tx", "stream", "re", "im"});
  for (Index d = 0; d < p.d_v(); ++d) {
    const CMat t = p.tap(d);
    for (Index i = 0; i < t.rows(); ++i) {
      for (Index j = 0; j < t.cols(); ++j) {
        w.field(d).field(i).field(j).field(t(i, j).real()).field(t(i, j).imag()).end_row();
      }
    }
  }
}

inline void write_trace_csv(std::ostream& os, const BcdTrace& tr) {
  CsvWriter w(os);
  w.row({"iteration", "objective", "distortion", "noise", "upsilon", "power", "power_active"});
  for (std::size_t i = 0; i < tr.objective.size(); ++i) {
    w.field(static_cast<Index>(i)).field(tr.objective[i]).field(tr.distortion[i])
        .field(tr.noise_term[i]).field(tr.upsilon[i]).field(tr.power[i])
        .field(tr.power_active[i] ? "1" : "0").end_row();
  }
}

// Designs the configured precoder on the seed channel at the first SNR
// point. Kinds without iterations get a one-row trace evaluated with the
// LMMSE decorrelators.
inline PrecoderDesign run_precoder_design(const ExperimentConfig& cfg) {
  cfg.validate();
  const FreqChannel h = gen_clustered_channel(cfg.channel, cfg.seed);
  const double noise_var = cfg.downlink_noise_var(cfg.snr_db.front());
  auto design = design_precoder(cfg, cfg.precoder, h, noise_var);
  if (!design.trace) {
    const MatrixStack v = design.precoder.expand();
    const auto u = update_decorrelators(h, v, noise_var);
    const auto t = evm_terms(h, v, u, noise_var);
    BcdTrace tr;
    tr.objective = {t.total()};
    tr.distortion = {t.distortion};
    tr.noise_term = {t.noise};
    tr.upsilon = {0.0};
    tr.power = {design.precoder.power()};
    tr.power_active = {false};
    tr.converged = true;
    design.trace = std::move(tr);
  }
  return design;
}

}  // namespace ddsp
