#pragma once

// Monte Carlo harness: a sweep-excited plant, noisy output realizations and
// one identification per trial.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hdpbsid/analysis.hpp"
#include "hdpbsid/identification.hpp"
#include "hdpbsid/lti_sim.hpp"

namespace hdpbsid {

struct ExperimentConfig {
  StateSpaceModel model;
  SweepSpec sweep;
  Index samples = 2000;
  /// The plant is simulated on a grid this many times finer than the
  /// measurement grid and then sampled.
  int oversample = 16;
  /// Band-limit the sweep to Hermite orders 0..eta when set.
  std::optional<int> bandlimit_eta;
  /// One campaign per entry; an empty entry means noise-free.
  std::vector<std::optional<double>> snr_db{50.0};
  IdentConfig ident;
  int trials = 500;
  std::uint64_t base_seed = 1;
  bool include_failures = false;
  int jobs = 1;

  void validate() const {
    model.validate();
    sweep.validate();
    ident.validate();
    if (model.nu() != 1) throw Error("config", "the sweep harness drives single-input models");
    if (samples < 2) throw Error("config", "need at least 2 samples");
    if (oversample < 1) throw Error("config", "oversample must be >= 1");
    if (trials < 1) throw Error("config", "trial count must be >= 1");
    if (jobs < 1) throw Error("config", "jobs must be >= 1");
  }
};

/// Measured input and noise-free output on the measurement grid.
struct Dataset {
  SampledSignal u;
  SampledSignal y_clean;
};

inline Dataset make_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  const Index fine_n = (cfg.samples - 1) * cfg.oversample + 1;
  const VectorXd fine_t = uniform_grid(0.0, cfg.sweep.duration, fine_n);
  SampledSignal u_fine = sine_sweep(cfg.sweep, fine_t);
  if (cfg.bandlimit_eta) u_fine = bandlimit_via_hermite(u_fine, *cfg.bandlimit_eta);
  const SampledSignal y_fine = simulate_noise_free(cfg.model, u_fine);

  VectorXd t(cfg.samples);
  MatrixXd u(cfg.model.nu(), cfg.samples), y(cfg.model.ny(), cfg.samples);
  for (Index k = 0; k < cfg.samples; ++k) {
    const Index f = k * cfg.oversample;
    t[k] = fine_t[f];
    u.col(k) = u_fine.values().col(f);
    y.col(k) = y_fine.values().col(f);
  }
  return {SampledSignal(t, std::move(u)), SampledSignal(t, std::move(y))};
}

struct TrialOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<Complex> eigenvalues;
  StateSpaceModel model;
};

inline TrialOutcome run_trial(const Dataset& data, const IdentConfig& ident,
                              std::optional<double> snr_db, std::uint64_t seed) {
  TrialOutcome out;
  out.seed = seed;
  try {
    const SampledSignal y =
        snr_db ? SampledSignal(data.y_clean.times(),
                               add_output_noise(data.y_clean.values(), *snr_db, seed))
               : data.y_clean;
    const IdentResult r = identify(data.u, y, ident);
    out.model = r.model;
    out.eigenvalues = eigenvalues(r.model);
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

/// Trials with seeds base_seed + index, run on `jobs` threads. The result
/// order follows the trial index regardless of scheduling.
inline std::vector<TrialOutcome> run_trials(const Dataset& data,
                                            const ExperimentConfig& cfg,
                                            std::optional<double> snr_db) {
  std::vector<TrialOutcome> out(cfg.trials);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < cfg.trials; i = next++)
      out[i] = run_trial(data, cfg.ident, snr_db, cfg.base_seed + std::uint64_t(i));
  };
  const int jobs = std::min(cfg.jobs, cfg.trials);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

struct CampaignResult {
  std::optional<double> snr_db;
  std::vector<TrialOutcome> trials;
  std::vector<McStats> stats;  // empty when every trial failed
  Index failures = 0;
};

inline CampaignResult run_campaign(const Dataset& data, const ExperimentConfig& cfg,
                                   std::optional<double> snr_db) {
  CampaignResult c;
  c.snr_db = snr_db;
  c.trials = run_trials(data, cfg, snr_db);
  const auto truth = eigenvalues(cfg.model);
  std::vector<std::vector<Complex>> eigs;
  for (const auto& t : c.trials) {
    eigs.push_back(t.ok ? t.eigenvalues : std::vector<Complex>{});
    if (!t.ok || t.eigenvalues.size() != truth.size()) ++c.failures;
  }
  try {
    c.stats = mc_statistics(eigs, truth, cfg.include_failures);
  } catch (const Error&) {
    c.stats.clear();
  }
  return c;
}

/// Mean absolute eigenvalue error of a successful trial against the truth.
inline double mean_eigenvalue_error(const std::vector<Complex>& est,
                                    const std::vector<Complex>& truth) {
  const EigMatch m = match_eigenvalues(est, truth);
  if (m.pairs.empty()) return std::numeric_limits<double>::infinity();
  return m.total_error() / double(m.pairs.size());
}

/// Reference models used by the experiments.
namespace benchmarks {

/// Second-order plant with eigenvalues -2 and -4, two outputs.
inline StateSpaceModel second_order() {
  MatrixXd a(2, 2), b(2, 1), c(2, 2);
  a << -2, 1, 0, -4;
  b << 0.5, 1;
  c << 1, 4, 2, 1;
  return {a, b, c, MatrixXd::Zero(2, 1)};
}

/// Third-order plant with eigenvalues -5 and -1 +/- i, four outputs.
inline StateSpaceModel third_order() {
  MatrixXd a(3, 3), b(3, 1), c(4, 3), d(4, 1);
  a << -0.2588, 0.2115, -9.5751, 0.7629, -6.7412, -10.4169, 0, 1, 0;
  b << -10.1647, 450.71, 0;
  c << 1, 0, 0, 0, 1, 0, 0, 0, 1, -0.1068, 0.1192, 0;
  d << 0, 0, 0, -10.1647;
  return {a, b, c, d};
}

}  // namespace benchmarks

}  // namespace hdpbsid
