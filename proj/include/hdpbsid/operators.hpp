#pragma once

// Hermite-domain differentiation operator and its shifted/scaled variant.
//
// Coefficient rows multiply operators from the right: if f holds the
// coefficients of a signal, f * D holds the coefficients of its derivative.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "hdpbsid/error.hpp"

namespace hdpbsid {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Condition numbers above this are rejected by the inverse operator.
inline constexpr double kMaxOperatorCondition = 1e12;

/// Truncated derivative operator: zero diagonal, entry (n, n+1) equal to
/// -sqrt((n+1)/2) and entry (n+1, n) equal to +sqrt((n+1)/2).
struct DerivativeOperator {
  MatrixXd matrix;
  Index size() const noexcept { return matrix.rows(); }
};

/// (D / alpha + beta I) / gamma.
struct ModifiedOperator {
  MatrixXd matrix;
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 1.0;
  Index size() const noexcept { return matrix.rows(); }
};

inline DerivativeOperator derivative_operator(Index n_c) {
  if (n_c < 1) throw Error("derivative operator needs at least one basis function");
  MatrixXd d = MatrixXd::Zero(n_c, n_c);
  for (Index n = 0; n + 1 < n_c; ++n) {
    const double v = std::sqrt(static_cast<double>(n + 1) / 2.0);
    d(n, n + 1) = -v;
    d(n + 1, n) = v;
  }
  return {std::move(d)};
}

inline ModifiedOperator modified_operator(const DerivativeOperator& d,
                                          double alpha, double beta,
                                          double gamma) {
  if (!(alpha > 0.0)) throw Error("modified operator requires alpha > 0");
  if (!(gamma > 0.0)) throw Error("modified operator requires gamma > 0");
  if (!(beta >= 0.0)) throw Error("modified operator requires beta >= 0");
  const Index n = d.size();
  MatrixXd m = (d.matrix / alpha + beta * MatrixXd::Identity(n, n)) / gamma;
  return {std::move(m), alpha, beta, gamma};
}

inline MatrixXd operator_power(const ModifiedOperator& m, int k) {
  if (k < 0) throw Error("operator power must be non-negative");
  MatrixXd r = MatrixXd::Identity(m.size(), m.size());
  for (int i = 0; i < k; ++i) r = r * m.matrix;
  return r;
}

/// LU factorization with partial pivoting of a tridiagonal matrix, stored
/// as bands (the same layout as LAPACK's gttrf). A row interchange fills in
/// a second superdiagonal.
class TridiagonalLU {
 public:
  /// Factor the tridiagonal part of `a`; entries outside the band are ignored.
  explicit TridiagonalLU(const MatrixXd& a) : n_(a.rows()) {
    if (a.rows() != a.cols()) throw Error("tridiagonal factorization needs a square matrix");
    d_ = a.diagonal();
    if (n_ > 1) {
      dl_ = a.diagonal(-1);
      du_ = a.diagonal(1);
    }
    du2_ = VectorXd::Zero(std::max<Index>(n_ - 2, 0));
    ipiv_.resize(n_);
    for (Index i = 0; i < n_; ++i) ipiv_[i] = i;
    norm1_ = a.cwiseAbs().colwise().sum().maxCoeff();

    for (Index i = 0; i + 1 < n_; ++i) {
      if (std::abs(d_[i]) >= std::abs(dl_[i])) {
        if (d_[i] != 0.0) {
          const double fact = dl_[i] / d_[i];
          dl_[i] = fact;
          d_[i + 1] -= fact * du_[i];
        }
      } else {
        const double fact = d_[i] / dl_[i];
        d_[i] = dl_[i];
        dl_[i] = fact;
        const double temp = du_[i];
        du_[i] = d_[i + 1];
        d_[i + 1] = temp - fact * d_[i + 1];
        if (i + 2 < n_) {
          du2_[i] = du_[i + 1];
          du_[i + 1] = -fact * du_[i + 1];
        }
        ipiv_[i] = i + 1;
      }
    }
    for (Index i = 0; i < n_; ++i) {
      if (d_[i] == 0.0) {
        singular_ = true;
        break;
      }
    }
  }

  Index size() const noexcept { return n_; }
  bool singular() const noexcept { return singular_; }

  /// Solve A x = b in place.
  void solve_in_place(Eigen::Ref<VectorXd> b) const {
    if (singular_) throw Error("operator ill-conditioned; increase beta");
    for (Index i = 0; i + 1 < n_; ++i) {
      const Index ip = ipiv_[i];
      const double temp = b[2 * i + 1 - ip] - dl_[i] * b[ip];
      b[i] = b[ip];
      b[i + 1] = temp;
    }
    b[n_ - 1] /= d_[n_ - 1];
    if (n_ > 1) b[n_ - 2] = (b[n_ - 2] - du_[n_ - 2] * b[n_ - 1]) / d_[n_ - 2];
    for (Index i = n_ - 3; i >= 0; --i)
      b[i] = (b[i] - du_[i] * b[i + 1] - du2_[i] * b[i + 2]) / d_[i];
  }

  /// Exact 1-norm condition number, from n solves against unit vectors.
  double condition() const {
    if (singular_) return std::numeric_limits<double>::infinity();
    double inv_norm = 0.0;
    VectorXd e(n_);
    for (Index j = 0; j < n_; ++j) {
      e.setZero();
      e[j] = 1.0;
      solve_in_place(e);
      inv_norm = std::max(inv_norm, e.cwiseAbs().sum());
    }
    return norm1_ * inv_norm;
  }

 private:
  Index n_;
  VectorXd d_, dl_, du_, du2_;
  std::vector<Index> ipiv_;
  double norm1_ = 0.0;
  bool singular_ = false;
};

/// Right application of the inverse of a modified operator: X -> X D'^-1.
/// One factorization of D'^T serves every application and every power.
class InverseOperator {
 public:
  explicit InverseOperator(const ModifiedOperator& m)
      : lu_(m.matrix.transpose()) {
    condition_ = lu_.condition();
    if (!std::isfinite(condition_) || condition_ > kMaxOperatorCondition)
      throw Error("operator ill-conditioned; increase beta");
  }

  double condition() const noexcept { return condition_; }
  Index size() const noexcept { return lu_.size(); }

  /// X D'^-1, row by row: (X D'^-1)^T solves D'^T Y^T = X^T.
  MatrixXd apply(const MatrixXd& x) const {
    if (x.cols() != size()) throw Error("operand columns do not match operator size");
    MatrixXd y = x.transpose();
    for (Index r = 0; r < y.cols(); ++r) lu_.solve_in_place(y.col(r));
    return y.transpose();
  }

  /// X D'^-k.
  MatrixXd apply(const MatrixXd& x, int k) const {
    MatrixXd y = x;
    for (int i = 0; i < k; ++i) y = apply(y);
    return y;
  }

 private:
  TridiagonalLU lu_;
  double condition_ = 0.0;
};

struct InversePower {
  MatrixXd matrix;
  double condition = 0.0;  // 1-norm condition number of D'
};

/// (D')^-k from a single banded factorization.
inline InversePower operator_inverse_power(const ModifiedOperator& m, int k) {
  if (k < 1) throw Error("inverse power must be at least 1");
  const InverseOperator inv(m);
  return {inv.apply(MatrixXd::Identity(m.size(), m.size()), k), inv.condition()};
}

}  // namespace hdpbsid
