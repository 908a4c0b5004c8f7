#pragma once

// Truncated orthonormal Hermite basis: evaluation, projection of sampled
// signals, reconstruction, and the time scaling that maps an experiment
// window onto the effective support of the basis.

#include <cmath>
#include <numbers>
#include <utility>

#include <Eigen/Dense>

#include "hdpbsid/error.hpp"

namespace hdpbsid {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Absolute slack on scaled time when checking that samples lie inside the
/// effective support.
inline constexpr double kSupportTolerance = 1e-9;

/// Truncated basis {h_0, ..., h_nmax}.
class BasisSpec {
 public:
  explicit BasisSpec(int n_max) : n_max_(n_max) {
    if (n_max < 0) throw Error("basis order must be non-negative");
  }

  int n_max() const noexcept { return n_max_; }
  /// Number of basis functions, n_max + 1.
  Index size() const noexcept { return n_max_ + 1; }
  /// Half-width of the effective support, sqrt(2 n_max + 1).
  double half_width() const noexcept { return std::sqrt(2.0 * n_max_ + 1.0); }

  bool operator==(const BasisSpec&) const = default;

 private:
  int n_max_;
};

/// Multichannel signal on a strictly increasing time grid. One row of
/// `values` per channel, one column per instant.
class SampledSignal {
 public:
  SampledSignal() = default;
  SampledSignal(VectorXd times, MatrixXd values)
      : times_(std::move(times)), values_(std::move(values)) {
    if (values_.cols() != times_.size())
      throw Error("signal value columns do not match time grid length");
    for (Index k = 1; k < times_.size(); ++k) {
      if (!(times_[k] > times_[k - 1]))
        throw Error("signal times must be strictly increasing");
    }
  }

  const VectorXd& times() const noexcept { return times_; }
  const MatrixXd& values() const noexcept { return values_; }
  Index channels() const noexcept { return values_.rows(); }
  Index samples() const noexcept { return times_.size(); }

 private:
  VectorXd times_;
  MatrixXd values_;
};

/// Hermite-domain representation: rows are channels, columns are orders.
struct CoefficientMatrix {
  MatrixXd coeffs;
  BasisSpec basis{0};

  CoefficientMatrix() = default;
  CoefficientMatrix(MatrixXd c, BasisSpec b) : coeffs(std::move(c)), basis(b) {
    if (coeffs.cols() != basis.size())
      throw Error("coefficient columns do not match basis size");
  }

  Index channels() const noexcept { return coeffs.rows(); }
};

/// Affine map from recorded time t to scaled time t' = (t - t_mid) / alpha.
struct TimeScaling {
  double t_mid = 0.0;
  double tau = 0.0;    // half-duration of the recorded window [s]
  double alpha = 1.0;  // tau / sqrt(2 n_max + 1) [s]

  double to_scaled(double t) const { return (t - t_mid) / alpha; }
  double to_recorded(double s) const { return s * alpha + t_mid; }
};

/// Values [h_0(t), ..., h_nmax(t)] by the normalized three-term recurrence.
///
/// The running pair is renormalized whenever it grows large and the scale
/// is carried as a logarithm together with the Gaussian exponent, so the
/// result neither overflows nor loses the high orders to an early underflow
/// of exp(-t^2/2).
inline VectorXd eval_basis(const BasisSpec& spec, double t) {
  const Index nc = spec.size();
  VectorXd h(nc);

  constexpr double kRescale = 1e150;
  const double log_rescale = std::log(kRescale);
  const double pi_quarter = std::pow(std::numbers::pi, -0.25);

  double log_scale = -0.5 * t * t;
  double prev = 0.0;
  double cur = pi_quarter;  // h_0 / exp(log_scale)
  const auto unscale = [&](double v) {
    if (v == 0.0) return 0.0;
    return std::copysign(std::exp(std::log(std::abs(v)) + log_scale), v);
  };
  h[0] = unscale(cur);

  for (Index n = 0; n + 1 < nc; ++n) {
    const double dn = static_cast<double>(n);
    double next = t * std::sqrt(2.0 / (dn + 1.0)) * cur -
                  std::sqrt(dn / (dn + 1.0)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > kRescale) {
      cur /= kRescale;
      prev /= kRescale;
      log_scale += log_rescale;
    }
    h[n + 1] = unscale(cur);
  }
  return h;
}

/// Entry (n, k) is h_n(times[k]).
inline MatrixXd sampled_basis_matrix(const BasisSpec& spec,
                                     const VectorXd& times) {
  MatrixXd H(spec.size(), times.size());
  for (Index k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k])) throw Error("sample time is not finite");
    H.col(k) = eval_basis(spec, times[k]);
  }
  return H;
}

/// Composite trapezoid weights on a (possibly non-uniform) grid.
inline VectorXd trapezoid_weights(const VectorXd& times) {
  const Index n = times.size();
  VectorXd w = VectorXd::Zero(n);
  for (Index k = 0; k + 1 < n; ++k) {
    const double half = 0.5 * (times[k + 1] - times[k]);
    w[k] += half;
    w[k + 1] += half;
  }
  return w;
}

/// True when every time lies in [-L, L] (with tolerance) for the basis.
inline bool within_support(const BasisSpec& spec, const VectorXd& times) {
  const double bound = spec.half_width() + kSupportTolerance;
  return times.size() == 0 || times.cwiseAbs().maxCoeff() <= bound;
}

/// Shift the recorded window to be symmetric about zero and compress it onto
/// the effective support of `spec`. Values are untouched.
inline std::pair<SampledSignal, TimeScaling> shift_and_scale(
    const SampledSignal& signal, const BasisSpec& spec) {
  if (signal.samples() < 2)
    throw Error("shift_and_scale needs at least 2 samples");
  const double first = signal.times()[0];
  const double last = signal.times()[signal.samples() - 1];
  if (!(last > first)) throw Error("zero-length experiment");

  TimeScaling scaling;
  scaling.t_mid = 0.5 * (first + last);
  scaling.tau = 0.5 * (last - first);
  scaling.alpha = scaling.tau / spec.half_width();

  VectorXd scaled =
      signal.times().unaryExpr([&](double t) { return scaling.to_scaled(t); });
  // Pin the end points so rounding never leaves the support.
  scaled[0] = -spec.half_width();
  scaled[scaled.size() - 1] = spec.half_width();
  return {SampledSignal(std::move(scaled), signal.values()), scaling};
}

namespace detail {

inline void check_projectable(const SampledSignal& signal,
                              const BasisSpec& spec) {
  if (signal.samples() < 2) throw Error("projection needs at least 2 samples");
  if (!within_support(spec, signal.times())) throw Error("signal not scaled");
}

}  // namespace detail

/// Hermite coefficients <h_n, f_m> by trapezoidal quadrature on the signal's
/// own grid. The signal is taken as zero outside its recorded window.
inline CoefficientMatrix project(const SampledSignal& signal,
                                 const BasisSpec& spec) {
  detail::check_projectable(signal, spec);
  const VectorXd w = trapezoid_weights(signal.times());
  const MatrixXd H = sampled_basis_matrix(spec, signal.times());
  MatrixXd c = signal.values() * (w.asDiagonal() * H.transpose());
  return {std::move(c), spec};
}

/// Evaluate the truncated expansion on `times` (scaled time). Times outside
/// the support are allowed; check `within_support` to detect extrapolation.
inline SampledSignal reconstruct(const CoefficientMatrix& coeffs,
                                 const VectorXd& times) {
  const MatrixXd H = sampled_basis_matrix(coeffs.basis, times);
  return SampledSignal(times, coeffs.coeffs * H);
}

/// Convolution of each channel with h_n evaluated at t = 0, without the
/// parity correction: entry (m, n) is the integral of h_n(-s) f_m(s) ds.
inline MatrixXd raw_convolution_at_zero(const SampledSignal& signal,
                                        const BasisSpec& spec) {
  detail::check_projectable(signal, spec);
  const VectorXd w = trapezoid_weights(signal.times());
  const MatrixXd H = sampled_basis_matrix(spec, -signal.times());
  return signal.values() * (w.asDiagonal() * H.transpose());
}

/// Coefficients obtained by convolution at zero with the (-1)^n parity of
/// h_n removed; equal to `project` up to quadrature error.
inline CoefficientMatrix convolution_coefficients(const SampledSignal& signal,
                                                  const BasisSpec& spec) {
  MatrixXd c = raw_convolution_at_zero(signal, spec);
  for (Index n = 1; n < c.cols(); n += 2) c.col(n) = -c.col(n);
  return {std::move(c), spec};
}

/// Per-channel relative L2 error of the order-n_max expansion of a recorded
/// signal, measured with trapezoid weights on the central `interior`
/// fraction of the window. A channel that is identically zero there scores 0.
inline VectorXd reconstruction_error(const SampledSignal& signal, int n_max,
                                     double interior = 1.0) {
  if (!(interior > 0.0 && interior <= 1.0))
    throw Error("interior fraction must lie in (0, 1]");
  const BasisSpec spec(n_max);
  auto [scaled, scaling] = shift_and_scale(signal, spec);
  const SampledSignal r = reconstruct(project(scaled, spec), scaled.times());
  VectorXd w = trapezoid_weights(signal.times());
  const double half = interior * scaling.tau;
  for (Index k = 0; k < w.size(); ++k)
    if (std::abs(signal.times()[k] - scaling.t_mid) > half * (1.0 + 1e-12)) w[k] = 0.0;
  const MatrixXd diff = r.values() - signal.values();
  VectorXd err(signal.channels());
  for (Index c = 0; c < err.size(); ++c) {
    const double num = diff.row(c).cwiseAbs2().dot(w);
    const double den = signal.values().row(c).cwiseAbs2().dot(w);
    err[c] = den > 0.0 ? std::sqrt(num / den) : (num > 0.0 ? 1.0 : 0.0);
  }
  return err;
}

}  // namespace hdpbsid
