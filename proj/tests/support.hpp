#pragma once

#include <cmath>
#include <random>

#include "hdpbsid/hdpbsid.hpp"

namespace testing_support {

using namespace hdpbsid;

/// Physicists' Hermite polynomial from its explicit sum, not the recurrence.
inline double hermite_poly(int n, double t) {
  double s = 0.0;
  for (int m = 0; m <= n / 2; ++m) {
    const double term = std::tgamma(n + 1.0) / (std::tgamma(m + 1.0) * std::tgamma(n - 2 * m + 1.0)) *
                        std::pow(2.0 * t, n - 2 * m);
    s += (m % 2 ? -term : term);
  }
  return s;
}

/// Normalized Hermite function by the Rodrigues-formula closed form.
inline double hermite_fn(int n, double t) {
  const double norm = std::sqrt(std::pow(2.0, n) * std::tgamma(n + 1.0) * std::sqrt(M_PI));
  return std::exp(-0.5 * t * t) * hermite_poly(n, t) / norm;
}

inline SampledSignal sample(const VectorXd& t, auto&& f) {
  MatrixXd v(1, t.size());
  for (Index k = 0; k < t.size(); ++k) v(0, k) = f(t[k]);
  return SampledSignal(t, v);
}

inline MatrixXd random_matrix(std::mt19937_64& rng, Index r, Index c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

/// Second-order benchmark data: sweep input band-limited to order 200, plant simulated
/// on a 16x finer grid.
inline ExperimentConfig second_order_experiment(std::optional<int> eta = 200) {
  ExperimentConfig cfg;
  cfg.model = benchmarks::second_order();
  cfg.bandlimit_eta = eta;
  cfg.ident.n_max = 250;
  cfg.ident.beta = 3;
  cfg.ident.gamma = 20;
  cfg.ident.past = cfg.ident.future = 10;
  cfg.ident.order = 2;
  return cfg;
}

inline double max_abs(const MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace testing_support
