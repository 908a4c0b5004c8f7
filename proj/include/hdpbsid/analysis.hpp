#pragma once

// Grading identified models against ground truth: optimal eigenvalue
// pairing, Monte Carlo bias/STD, and frequency-response discrepancy.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "hdpbsid/error.hpp"
#include "hdpbsid/lti_sim.hpp"

namespace hdpbsid {

/// Minimum-cost assignment of every row to a distinct column for a cost
/// matrix with rows <= cols (Hungarian method with potentials, O(n^2 m)).
/// Returns the column assigned to each row.
inline std::vector<Index> min_cost_assignment(const MatrixXd& cost) {
  const Index n = cost.rows(), m = cost.cols();
  if (n > m) throw Error("assignment needs rows <= cols");
  if (n == 0) return {};
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is the virtual start.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<Index> p(m + 1, 0), way(m + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> row_to_col(n, -1);
  for (Index j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

struct EigPair {
  Complex estimated;
  Complex truth;
  double error = 0.0;
  Index truth_index = 0;  // position in the truth list
};

struct EigMatch {
  std::vector<EigPair> pairs;       // ordered by truth_index
  std::vector<Complex> unmatched;   // leftovers of the larger list
  double total_error() const {
    double s = 0.0;
    for (const auto& p : pairs) s += p.error;
    return s;
  }
};

namespace detail {

inline bool is_conjugate(const Complex& a, const Complex& b) {
  const double tol = 1e-9 * std::max(1.0, std::abs(a));
  return std::abs(a - std::conj(b)) <= tol;
}

}  // namespace detail

/// Optimal pairing minimizing the total |estimated - truth|. When a
/// conjugate pair of estimates is assigned to a conjugate pair of true
/// values, the upper-half-plane members are matched together; this never
/// increases the total cost.
inline EigMatch match_eigenvalues(const std::vector<Complex>& est,
                                  const std::vector<Complex>& truth) {
  const bool est_rows = est.size() <= truth.size();
  const auto& rows = est_rows ? est : truth;
  const auto& cols = est_rows ? truth : est;
  MatrixXd cost(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      cost(i, j) = std::abs(rows[i] - cols[j]);
  const std::vector<Index> assign = min_cost_assignment(cost);

  // truth index -> estimate index
  std::vector<Index> est_of(truth.size(), -1);
  std::vector<char> est_used(est.size(), 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index e = est_rows ? Index(i) : assign[i];
    const Index t = est_rows ? assign[i] : Index(i);
    est_of[t] = e;
    est_used[e] = 1;
  }

  for (std::size_t a = 0; a < truth.size(); ++a) {
    for (std::size_t b = a + 1; b < truth.size(); ++b) {
      if (est_of[a] < 0 || est_of[b] < 0) continue;
      if (!detail::is_conjugate(truth[a], truth[b]) || truth[a].imag() == 0.0) continue;
      const Complex ea = est[est_of[a]], eb = est[est_of[b]];
      if (!detail::is_conjugate(ea, eb) || ea.imag() == 0.0) continue;
      if ((ea.imag() > 0.0) != (truth[a].imag() > 0.0)) std::swap(est_of[a], est_of[b]);
    }
  }

  EigMatch m;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (est_of[t] < 0) {
      m.unmatched.push_back(truth[t]);
      continue;
    }
    const Complex e = est[est_of[t]];
    m.pairs.push_back({e, truth[t], std::abs(e - truth[t]), Index(t)});
  }
  for (std::size_t e = 0; e < est.size(); ++e)
    if (!est_used[e]) m.unmatched.push_back(est[e]);
  return m;
}

/// Monte Carlo statistics for one true eigenvalue.
struct McStats {
  Complex truth;
  double bias = 0.0;  // |mean(estimates) - truth|
  double std = 0.0;   // sqrt(sum |estimate - mean|^2 / (N - 1))
  Index trials = 0;   // estimates entering bias and std
  Index failures = 0;
  bool std_defined = false;  // false when fewer than two estimates
};

/// Bias and STD per true eigenvalue. A trial whose eigenvalue count differs
/// from the truth (an empty list marks an errored trial) is a failure; its
/// matched pairs enter the statistics only with include_failures.
inline std::vector<McStats> mc_statistics(
    const std::vector<std::vector<Complex>>& trials,
    const std::vector<Complex>& truth, bool include_failures = false) {
  std::vector<std::vector<Complex>> per(truth.size());
  Index failures = 0;
  for (const auto& t : trials) {
    const bool failed = t.size() != truth.size();
    if (failed) ++failures;
    if (failed && (!include_failures || t.empty())) continue;
    for (const auto& p : match_eigenvalues(t, truth).pairs)
      per[p.truth_index].push_back(p.estimated);
  }
  std::vector<McStats> out(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    McStats& s = out[k];
    s.truth = truth[k];
    s.failures = failures;
    s.trials = Index(per[k].size());
    if (s.trials == 0)
      throw Error("no successful trials for an eigenvalue");
    Complex mean(0.0, 0.0);
    for (const auto& e : per[k]) mean += e;
    mean /= double(s.trials);
    s.bias = std::abs(mean - truth[k]);
    if (s.trials > 1) {
      double ss = 0.0;
      for (const auto& e : per[k]) ss += std::norm(e - mean);
      s.std = std::sqrt(ss / double(s.trials - 1));
      s.std_defined = true;
    }
  }
  return out;
}

/// max over channels and frequencies of |G_a - G_b| / max(|G_b|, 1e-12).
inline double frf_discrepancy(const StateSpaceModel& a, const StateSpaceModel& b,
                              const std::vector<double>& freqs_hz) {
  if (a.ny() != b.ny() || a.nu() != b.nu())
    throw Error("models have different input/output dimensions");
  const auto ga = frequency_response(a, freqs_hz);
  const auto gb = frequency_response(b, freqs_hz);
  double worst = 0.0;
  for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
    const MatrixXd num = (ga[i] - gb[i]).cwiseAbs();
    const MatrixXd den = gb[i].cwiseAbs().cwiseMax(1e-12);
    worst = std::max(worst, num.cwiseQuotient(den).maxCoeff());
  }
  return worst;
}

}  // namespace hdpbsid
