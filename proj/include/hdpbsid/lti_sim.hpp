#pragma once

// Continuous-time LTI models, excitation signals, simulation with additive
// output noise, and reference quantities used to grade identified models.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "hdpbsid/error.hpp"
#include "hdpbsid/hermite_basis.hpp"

namespace hdpbsid {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Complex = std::complex<double>;

/// Innovation-form model dx = (A x + B u) dt + K dxi, y = C x + D u + e.
struct StateSpaceModel {
  MatrixXd A, B, C, D, K;

  StateSpaceModel() = default;
  /// K defaults to zero when left empty.
  StateSpaceModel(MatrixXd a, MatrixXd b, MatrixXd c, MatrixXd d,
                  MatrixXd k = {})
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)),
        K(std::move(k)) {
    if (K.size() == 0) K = MatrixXd::Zero(A.rows(), C.rows());
    validate();
  }

  Index nx() const noexcept { return A.rows(); }
  Index nu() const noexcept { return B.cols(); }
  Index ny() const noexcept { return C.rows(); }

  void validate() const {
    const Index n = A.rows();
    if (A.cols() != n) throw Error("A must be square");
    if (B.rows() != n) throw Error("B rows must equal the state dimension");
    if (C.cols() != n) throw Error("C columns must equal the state dimension");
    if (D.rows() != C.rows() || D.cols() != B.cols())
      throw Error("D must be ny x nu");
    if (K.rows() != n || K.cols() != C.rows())
      throw Error("K must be nx x ny");
  }

  /// Predictor dynamics A - K C.
  MatrixXd predictor_a() const { return A - K * C; }
  /// Predictor input matrix [B - K D, K].
  MatrixXd predictor_b() const {
    MatrixXd r(nx(), nu() + ny());
    r << B - K * D, K;
    return r;
  }

  /// Rank of the observability matrix, for the (A, C) diagnostic.
  Index observability_rank() const {
    MatrixXd o(ny() * nx(), nx());
    MatrixXd block = C;
    for (Index i = 0; i < nx(); ++i) {
      o.middleRows(i * ny(), ny()) = block;
      block = block * A;
    }
    return Eigen::FullPivLU<MatrixXd>(o).rank();
  }

  /// Rank of the controllability matrix, for the (A, B) diagnostic.
  Index controllability_rank() const {
    MatrixXd c(nx(), nu() * nx());
    MatrixXd block = B;
    for (Index i = 0; i < nx(); ++i) {
      c.middleCols(i * nu(), nu()) = block;
      block = A * block;
    }
    return Eigen::FullPivLU<MatrixXd>(c).rank();
  }

  /// Model in coordinates x_new = T^-1 x.
  StateSpaceModel transformed(const MatrixXd& T) const {
    const MatrixXd Ti = T.inverse();
    return {Ti * A * T, Ti * B, C * T, D, Ti * K};
  }
};

enum class NoiseMode { none, snr_db, covariance };

struct NoiseSpec {
  NoiseMode mode = NoiseMode::none;
  double snr_db = std::numeric_limits<double>::infinity();
  // Incremental covariance blocks; accepted but not simulated.
  MatrixXd Q, S, R;
  std::uint64_t seed = 0;

  static NoiseSpec noise_free() { return {}; }
  static NoiseSpec snr(double db, std::uint64_t seed) {
    NoiseSpec n;
    n.mode = NoiseMode::snr_db;
    n.snr_db = db;
    n.seed = seed;
    return n;
  }
};

/// Linear sine sweep sin(2 pi (f1 t + (f2 - f1) t^2 / (2 T))).
struct SweepSpec {
  double duration = 10.0;  // T [s]
  double f1 = 0.0;         // [Hz]
  double f2 = 8.0;         // [Hz]

  void validate() const {
    if (!(duration > 0.0)) throw Error("sweep duration must be positive");
    if (!(f1 >= 0.0 && f2 >= f1)) throw Error("sweep needs f2 >= f1 >= 0");
  }
};

inline VectorXd uniform_grid(double t0, double t1, Index samples) {
  if (samples < 2) throw Error("a grid needs at least 2 samples");
  return VectorXd::LinSpaced(samples, t0, t1);
}

inline SampledSignal sine_sweep(const SweepSpec& spec, const VectorXd& times) {
  spec.validate();
  constexpr double slack = 1e-12;
  MatrixXd v(1, times.size());
  for (Index k = 0; k < times.size(); ++k) {
    const double t = times[k];
    if (t < -slack || t > spec.duration * (1.0 + slack))
      throw Error("sweep evaluated outside [0, T]");
    const double phase =
        spec.f1 * t + (spec.f2 - spec.f1) / (2.0 * spec.duration) * t * t;
    v(0, k) = std::sin(2.0 * std::numbers::pi * phase);
  }
  return SampledSignal(times, std::move(v));
}

/// Project onto orders 0..eta and evaluate the expansion back on the
/// signal's own grid.
inline SampledSignal bandlimit_via_hermite(const SampledSignal& signal,
                                           int eta) {
  const BasisSpec basis(eta);
  auto [scaled, scaling] = shift_and_scale(signal, basis);
  const CoefficientMatrix c = project(scaled, basis);
  SampledSignal r = reconstruct(c, scaled.times());
  return SampledSignal(signal.times(), r.values());
}

namespace detail {

/// Exact first-order-hold transition over one interval of length h:
/// x+ = phi x + g1 u_k + g2 (u_{k+1} - u_k) / h.
struct FohStep {
  MatrixXd phi, g1, g2;
  double h = 0.0;

  FohStep(const MatrixXd& a, const MatrixXd& b, double step) : h(step) {
    const Index n = a.rows();
    const Index m = b.cols();
    MatrixXd aug = MatrixXd::Zero(n + 2 * m, n + 2 * m);
    aug.topLeftCorner(n, n) = a;
    aug.block(0, n, n, m) = b;
    aug.block(n, n + m, m, m) = MatrixXd::Identity(m, m);
    const MatrixXd e = (aug * step).exp();
    phi = e.topLeftCorner(n, n);
    g1 = e.block(0, n, n, m);
    g2 = e.block(0, n + m, n, m);
  }
};

}  // namespace detail

/// Noise-free response from rest, propagated interval by interval with the
/// matrix exponential under first-order-hold input interpolation.
inline SampledSignal simulate_noise_free(const StateSpaceModel& model,
                                         const SampledSignal& input) {
  model.validate();
  if (input.channels() != model.nu())
    throw Error("input channel count does not match the model");
  const Index n = input.samples();
  const VectorXd& t = input.times();
  const MatrixXd& u = input.values();

  MatrixXd y(model.ny(), n);
  VectorXd x = VectorXd::Zero(model.nx());
  std::optional<detail::FohStep> step;
  for (Index k = 0; k < n; ++k) {
    y.col(k) = model.C * x + model.D * u.col(k);
    if (k + 1 == n) break;
    const double h = t[k + 1] - t[k];
    if (!step || std::abs(step->h - h) > 1e-12 * std::abs(h))
      step.emplace(model.A, model.B, h);
    x = step->phi * x + step->g1 * u.col(k) +
        step->g2 * (u.col(k + 1) - u.col(k)) / h;
  }
  return SampledSignal(t, std::move(y));
}

/// Add zero-mean white Gaussian noise to each channel so that the ratio of
/// the channel's mean-square power to the noise variance is snr_db.
inline MatrixXd add_output_noise(const MatrixXd& clean, double snr_db,
                                 std::uint64_t seed) {
  if (!std::isfinite(snr_db)) throw Error("SNR must be finite");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd noisy = clean;
  const double ratio = std::pow(10.0, snr_db / 10.0);
  for (Index r = 0; r < clean.rows(); ++r) {
    const double power = clean.row(r).squaredNorm() / clean.cols();
    const double sigma = std::sqrt(power / ratio);
    for (Index k = 0; k < clean.cols(); ++k) noisy(r, k) += sigma * normal(rng);
  }
  return noisy;
}

inline SampledSignal simulate(const StateSpaceModel& model,
                              const SampledSignal& input,
                              const NoiseSpec& noise) {
  SampledSignal clean = simulate_noise_free(model, input);
  switch (noise.mode) {
    case NoiseMode::none:
      return clean;
    case NoiseMode::snr_db:
      return SampledSignal(clean.times(),
                           add_output_noise(clean.values(), noise.snr_db, noise.seed));
    case NoiseMode::covariance:
      break;
  }
  throw Error("covariance noise mode is not implemented");
}

inline bool eig_less(const Complex& a, const Complex& b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

/// Eigenvalues sorted by real part, then imaginary part.
inline std::vector<Complex> eigenvalues(const MatrixXd& a) {
  if (a.rows() == 0) return {};
  Eigen::EigenSolver<MatrixXd> es(a, false);
  if (es.info() != Eigen::Success) throw Error("eigenvalue computation failed");
  std::vector<Complex> ev(es.eigenvalues().begin(), es.eigenvalues().end());
  std::sort(ev.begin(), ev.end(), eig_less);
  return ev;
}

inline std::vector<Complex> eigenvalues(const StateSpaceModel& model) {
  return eigenvalues(model.A);
}

/// G(j 2 pi f) = C (j w I - A)^-1 B + D for each frequency; result[i] is
/// the ny x nu matrix at freqs_hz[i].
inline std::vector<MatrixXcd> frequency_response(
    const StateSpaceModel& model, const std::vector<double>& freqs_hz) {
  model.validate();
  const Index n = model.nx();
  const auto poles = eigenvalues(model.A);
  const MatrixXcd a = model.A.cast<Complex>();
  const MatrixXcd b = model.B.cast<Complex>();
  const MatrixXcd c = model.C.cast<Complex>();
  const MatrixXcd d = model.D.cast<Complex>();

  std::vector<MatrixXcd> out;
  out.reserve(freqs_hz.size());
  for (double f : freqs_hz) {
    const Complex jw(0.0, 2.0 * std::numbers::pi * f);
    for (const auto& p : poles) {
      if (std::abs(jw - p) < 1e-9) {
        std::ostringstream msg;
        msg << "resolvent singular at " << f << " Hz";
        throw Error(msg.str());
      }
    }
    if (n == 0) {
      out.push_back(d);
      continue;
    }
    const MatrixXcd resolvent = jw * MatrixXcd::Identity(n, n) - a;
    out.push_back(c * resolvent.partialPivLu().solve(b) + d);
  }
  return out;
}

/// n log-spaced frequencies from lo to hi inclusive.
inline std::vector<double> log_frequency_grid(double lo, double hi, int n) {
  std::vector<double> f(n);
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i)
    f[i] = std::pow(10.0, n == 1 ? a : a + (b - a) * i / (n - 1));
  return f;
}

}  // namespace hdpbsid
