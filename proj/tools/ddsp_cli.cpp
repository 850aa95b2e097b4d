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

// ddsp: command-line front end for the link experiments.
//
// Exit codes: 0 success, 1 usage or I/O error, 2 configuration error,
// 3 numerical failure.

#include "ddsp/ddsp.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<ddsp::Index> trials;
  std::optional<ddsp::Index> threads;
  std::string out;
  std::string debug_dump;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("config", o.config, "experiment config file")->required();
  sub->add_option("--seed", o.seed, "base seed (overrides run.seed)");
  sub->add_option("--trials", o.trials, "trial count (overrides run.trials)");
  sub->add_option("--threads", o.threads, "worker threads (overrides run.threads)");
  sub->add_option("--out", o.out, "output file (sweeps) or directory (design/report)");
  sub->add_option("--debug-dump", o.debug_dump, "directory for trial-0 intermediates");
}

ddsp::ExperimentConfig load(const Overrides& o) {
  auto cfg = ddsp::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.trials) cfg.trials = *o.trials;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.out.empty()) cfg.out = o.out;
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  return os;
}

std::filesystem::path out_dir(const ddsp::ExperimentConfig& cfg) {
  const std::filesystem::path dir = cfg.out.empty() ? std::filesystem::path(".") : std::filesystem::path(cfg.out);
  std::filesystem::create_directories(dir);
  return dir;
}

int ber_sweep(const Overrides& o) {
  const auto cfg = load(o);
  if (cfg.out.empty()) {
    ddsp::run_ber_sweep(cfg, std::cout, o.debug_dump);
  } else {
    auto os = open_out(cfg.out);
    ddsp::run_ber_sweep(cfg, os, o.debug_dump);
  }
  return 0;
}

int nmse_sweep(const Overrides& o) {
  const auto cfg = load(o);
  if (cfg.out.empty()) {
    ddsp::run_nmse_sweep(cfg, &std::cout);
  } else {
    auto os = open_out(cfg.out);
    ddsp::run_nmse_sweep(cfg, &os);
  }
  return 0;
}

int precoder_design(const Overrides& o) {
  const auto cfg = load(o);
  const auto design = ddsp::run_precoder_design(cfg);
  const auto dir = out_dir(cfg);
  auto w = open_out((dir / "w_delay.csv").string());
  ddsp::write_precoder_csv(w, design.precoder);
  auto t = open_out((dir / "bcd_trace.csv").string());
  ddsp::write_trace_csv(t, *design.trace);
  std::cout << "precoder " << ddsp::to_string(cfg.precoder) << ": D_v=" << design.precoder.d_v()
            << " power=" << design.precoder.power() << " objective=" << design.trace->objective.back()
            << " iterations=" << design.trace->iterations << '\n';
  return 0;
}

int sparsity_report(const Overrides& o) {
  const auto cfg = load(o);
  const auto rep = ddsp::run_sparsity_report(cfg);
  const auto dir = out_dir(cfg);
  auto p = open_out((dir / "delay_profile.csv").string());
  ddsp::write_sparsity_csv(p, rep);
  auto t = open_out((dir / "truncation.csv").string());
  ddsp::write_truncation_csv(t, rep);
  std::cout << rep.occupancy;
  std::cout << "effective support: " << rep.effective_support << " taps\n";
  for (const auto& r : rep.truncation) {
    std::cout << "truncation " << r.series << " window=" << r.window << ": " << r.truncation_nmse
              << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay-domain sparse precoding link simulator"};
  app.require_subcommand(1);
  Overrides o;
  auto* ber = app.add_subcommand("ber-sweep", "BER versus SNR Monte-Carlo sweep");
  auto* nmse = app.add_subcommand("nmse-sweep", "CSIT estimator NMSE sweep");
  auto* design = app.add_subcommand("precoder-design", "design one precoder, write taps and trace");
  auto* report = app.add_subcommand("sparsity-report", "delay-domain energy profiles");
  for (auto* sub : {ber, nmse, design, report}) add_common(sub, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*ber) return ber_sweep(o);
    if (*nmse) return nmse_sweep(o);
    if (*design) return precoder_design(o);
    if (*report) return sparsity_report(o);
  } catch (const ddsp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ddsp::DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ddsp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
