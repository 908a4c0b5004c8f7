// hdpbsid command-line front end: identify, montecarlo, reconstruct-check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hdpbsid/hdpbsid.hpp"

namespace fs = std::filesystem;
using namespace hdpbsid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;

/// Input problems (format, configuration, documented preconditions) map to 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) { return format_double(v); }

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

void write_json(const fs::path& p, const json& j) {
  auto f = open_out(p);
  f << j.dump(2) << "\n";
}

json complex_list(const std::vector<Complex>& v) {
  json a = json::array();
  for (const auto& c : v) a.push_back(json::array({c.real(), c.imag()}));
  return a;
}

/// JSON cannot carry inf/nan; those become null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create " + p.string() + ": " + ec.message());
}

// ---------------------------------------------------------------- identify

struct IdentifyArgs {
  std::string data, u, y, config, out = ".";
  std::optional<int> inputs, order;
};

json diagnostics_json(const IdentResult& r) {
  const IdentDiagnostics& d = r.diagnostics;
  json j;
  j["order"] = r.model.nx();
  j["eigenvalues"] = complex_list(eigenvalues(r.model));
  j["alpha"] = d.alpha;
  j["operator_condition"] = number_or_null(d.operator_condition);
  j["markov_condition"] = number_or_null(d.markov_condition);
  j["output_condition"] = number_or_null(d.output_condition);
  j["system_condition"] = number_or_null(d.system_condition);
  j["markov_residual"] = d.markov_residual;
  j["output_residual"] = d.output_residual;
  j["system_residual"] = d.system_residual;
  j["innovation_relative_norm"] = d.innovation_relative_norm;
  j["k_identifiable"] = d.k_identifiable;
  j["output_rank_deficient"] = d.output_rank_deficient;
  j["predictor_eigenvalues"] = complex_list(d.predictor_eigenvalues);
  j["predictor_in_unit_circle"] = d.predictor_in_unit_circle;
  j["truncation_bias_proxy"] = d.truncation_bias_proxy;
  return j;
}

int cmd_identify(const IdentifyArgs& a) {
  IdentifyConfig cfg;
  if (!a.config.empty()) cfg = identify_config_from_json(JsonDocument::from_file(a.config));
  if (a.inputs) cfg.inputs = *a.inputs;
  if (a.order) cfg.ident.order = *a.order;
  try {
    cfg.ident.validate();
  } catch (const Error& e) {
    throw InputError(e.what());
  }

  std::optional<SampledSignal> u, y;
  if (!a.data.empty()) {
    if (!a.u.empty() || !a.y.empty()) throw InputError("use either --data or --u/--y");
    const SampledSignal all = read_signal_csv_file(a.data);
    const int nu = cfg.inputs.value_or(1);
    if (nu >= all.channels())
      throw InputError(a.data + ": needs more than " + std::to_string(nu) +
                       " channels (inputs first, then outputs)");
    u = select_channels(all, 0, nu);
    y = select_channels(all, nu, all.channels() - nu);
  } else {
    if (a.u.empty() || a.y.empty()) throw InputError("give --data, or both --u and --y");
    u = read_signal_csv_file(a.u);
    y = read_signal_csv_file(a.y);
  }

  IdentResult r;
  try {
    r = identify(*u, *y, cfg.ident);
  } catch (const Error& e) {
    if (e.stage() == "data" || e.stage() == "config") throw InputError(e.what());
    throw;
  }

  const fs::path out(a.out);
  ensure_dir(out);
  write_json(out / "model.json", model_to_json(r.model));
  {
    auto f = open_out(out / "singular_values.csv");
    f << "index,singular_value\n";
    for (Index i = 0; i < r.singular_values.size(); ++i)
      f << i << "," << fmt(r.singular_values[i]) << "\n";
  }
  write_json(out / "diagnostics.json", diagnostics_json(r));

  std::cout << "order " << r.model.nx() << "\n";
  for (const auto& l : eigenvalues(r.model))
    std::cout << "eigenvalue " << fmt(l.real()) << " " << fmt(l.imag()) << "\n";
  return kExitOk;
}

// -------------------------------------------------------------- montecarlo

struct MonteCarloArgs {
  std::string config, out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs, trials;
  bool include_failures = false;
};

std::string snr_label(const std::optional<double>& snr) {
  if (!snr) return "noise_free";
  std::ostringstream os;
  os << "snr_" << *snr;
  return os.str();
}

std::string csv_quote(const std::string& s) {
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += (c == '\n' ? ' ' : c);
  }
  return q + "\"";
}

void write_bode_rows(std::ostream& f, const std::string& series,
                     const StateSpaceModel& m, const std::vector<double>& freqs) {
  const auto g = frequency_response(m, freqs);
  for (std::size_t i = 0; i < freqs.size(); ++i)
    for (Index o = 0; o < g[i].rows(); ++o)
      for (Index in = 0; in < g[i].cols(); ++in)
        f << series << "," << fmt(freqs[i]) << "," << o << "," << in << ","
          << fmt(std::abs(g[i](o, in))) << "," << fmt(std::arg(g[i](o, in))) << "\n";
}

void write_campaign(const fs::path& dir, const ExperimentConfig& cfg,
                    const CampaignResult& c, const std::vector<double>& freqs) {
  ensure_dir(dir);
  const auto truth = eigenvalues(cfg.model);
  {
    auto f = open_out(dir / "stats.csv");
    f << "eigenvalue_index,bias,std,failures,trials,std_defined,truth_re,truth_im\n";
    for (std::size_t k = 0; k < truth.size(); ++k) {
      if (c.stats.empty()) {
        f << k << ",nan,nan," << c.failures << ",0,0," << fmt(truth[k].real()) << ","
          << fmt(truth[k].imag()) << "\n";
        continue;
      }
      const McStats& s = c.stats[k];
      f << k << "," << fmt(s.bias) << "," << fmt(s.std_defined ? s.std : 0.0) << ","
        << s.failures << "," << s.trials << "," << (s.std_defined ? 1 : 0) << ","
        << fmt(s.truth.real()) << "," << fmt(s.truth.imag()) << "\n";
    }
  }
  {
    auto f = open_out(dir / "eigs.csv");
    f << "trial,seed,ok,eigenvalue_index,re,im,matched_truth_index,error\n";
    for (std::size_t i = 0; i < c.trials.size(); ++i) {
      const TrialOutcome& t = c.trials[i];
      if (!t.ok) {
        f << i << "," << t.seed << ",0,,,,,\n";
        continue;
      }
      const EigMatch m = match_eigenvalues(t.eigenvalues, truth);
      for (std::size_t k = 0; k < t.eigenvalues.size(); ++k) {
        const Complex l = t.eigenvalues[k];
        f << i << "," << t.seed << ",1," << k << "," << fmt(l.real()) << ","
          << fmt(l.imag()) << ",";
        bool matched = false;
        for (const auto& p : m.pairs) {
          if (p.estimated == l && !matched) {
            f << p.truth_index << "," << fmt(p.error);
            matched = true;
          }
        }
        if (!matched) f << ",";
        f << "\n";
      }
    }
  }
  {
    auto f = open_out(dir / "failures.csv");
    f << "trial,seed,message\n";
    for (std::size_t i = 0; i < c.trials.size(); ++i) {
      const TrialOutcome& t = c.trials[i];
      if (!t.ok) f << i << "," << t.seed << "," << csv_quote(t.error) << "\n";
      else if (t.eigenvalues.size() != truth.size())
        f << i << "," << t.seed << "," << csv_quote("order mismatch") << "\n";
    }
  }
  {
    auto f = open_out(dir / "bode_grid.csv");
    f << "series,freq_hz,output,input,magnitude,phase_rad\n";
    write_bode_rows(f, "true", cfg.model, freqs);
    for (std::size_t i = 0; i < c.trials.size(); ++i) {
      const TrialOutcome& t = c.trials[i];
      if (!t.ok) continue;
      try {
        std::ostringstream rows;
        write_bode_rows(rows, std::to_string(i), t.model, freqs);
        f << rows.str();
      } catch (const Error&) {
        // a pole on the imaginary axis at a grid frequency; the trial has no curve
      }
    }
  }
}

int cmd_montecarlo(const MonteCarloArgs& a) {
  if (a.config.empty()) throw InputError("--config is required");
  const std::string base = fs::path(a.config).parent_path().string();
  MonteCarloConfig mc =
      montecarlo_config_from_json(JsonDocument::from_file(a.config), base.empty() ? "." : base);
  ExperimentConfig& cfg = mc.experiment;
  if (a.seed) cfg.base_seed = *a.seed;
  if (a.jobs) cfg.jobs = *a.jobs;
  if (a.trials) cfg.trials = *a.trials;
  if (a.include_failures) cfg.include_failures = true;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw InputError(e.what());
  }

  const fs::path out(a.out);
  ensure_dir(out);
  const Dataset data = make_dataset(cfg);
  const auto freqs = log_frequency_grid(0.01, 100.0, mc.bode_points);

  json summary;
  summary["trials"] = cfg.trials;
  summary["base_seed"] = cfg.base_seed;
  summary["include_failures"] = cfg.include_failures;
  summary["truth"] = complex_list(eigenvalues(cfg.model));
  summary["campaigns"] = json::array();
  for (const auto& snr : cfg.snr_db) {
    const CampaignResult c = run_campaign(data, cfg, snr);
    const std::string label = snr_label(snr);
    write_campaign(out / label, cfg, c, freqs);
    json cj;
    cj["snr_db"] = snr ? json(*snr) : json(nullptr);
    cj["directory"] = label;
    cj["failures"] = c.failures;
    summary["campaigns"].push_back(cj);

    std::cout << label << ": " << c.failures << " failures";
    for (std::size_t k = 0; k < c.stats.size(); ++k)
      std::cout << " | l" << k << " bias " << fmt(c.stats[k].bias) << " std "
                << fmt(c.stats[k].std);
    std::cout << "\n";
  }
  write_json(out / "summary.json", summary);
  return kExitOk;
}

// ------------------------------------------------------- reconstruct-check

struct ReconstructArgs {
  std::string data, out;
  std::vector<int> n_max;
  double interior = 1.0;
};

int cmd_reconstruct(const ReconstructArgs& a) {
  const SampledSignal s = read_signal_csv_file(a.data);
  if (s.samples() < 2) throw InputError(a.data + ": needs at least 2 samples");
  std::ostringstream csv;
  csv << "n_max,channel,rel_l2_error\n";
  for (int n : a.n_max) {
    if (n < 0) throw InputError("n_max values must be non-negative");
    const VectorXd err = reconstruction_error(s, n, a.interior);
    for (Index c = 0; c < err.size(); ++c) csv << n << "," << c << "," << fmt(err[c]) << "\n";
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    auto f = open_out(a.out);
    f << csv.str();
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time subspace identification with Hermite projections"};
  app.require_subcommand(1);

  IdentifyArgs ia;
  auto* ident = app.add_subcommand("identify", "identify a model from sampled data");
  ident->add_option("--data", ia.data, "CSV with input channels first, then outputs");
  ident->add_option("--inputs", ia.inputs, "number of input channels in --data (default 1)");
  ident->add_option("--u", ia.u, "input CSV");
  ident->add_option("--y", ia.y, "output CSV");
  ident->add_option("--config", ia.config, "JSON configuration");
  ident->add_option("--order", ia.order, "model order (default: singular-value gap)");
  ident->add_option("--out", ia.out, "output directory");

  MonteCarloArgs ma;
  auto* mcs = app.add_subcommand("montecarlo", "run a Monte Carlo campaign");
  mcs->add_option("--config", ma.config, "JSON configuration")->required();
  mcs->add_option("--out", ma.out, "output directory");
  mcs->add_option("--seed", ma.seed, "base seed; trial i uses seed + i");
  mcs->add_option("--jobs", ma.jobs, "worker threads");
  mcs->add_option("--trials", ma.trials, "trials per noise level");
  mcs->add_flag("--include-failures", ma.include_failures,
                "include order-mismatched trials in bias and std");

  ReconstructArgs ra;
  auto* rec = app.add_subcommand("reconstruct-check",
                                 "relative L2 reconstruction error per expansion order");
  rec->add_option("--data", ra.data, "signal CSV")->required();
  rec->add_option("--nmax", ra.n_max, "expansion orders, e.g. 10,50,250")
      ->required()
      ->delimiter(',');
  rec->add_option("--interior", ra.interior, "central fraction of the window to score");
  rec->add_option("--out", ra.out, "write CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (ident->parsed()) return cmd_identify(ia);
    if (mcs->parsed()) return cmd_montecarlo(ma);
    if (rec->parsed()) return cmd_reconstruct(ra);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
