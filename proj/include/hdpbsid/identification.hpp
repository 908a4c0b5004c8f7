#pragma once

// Continuous-time predictor-based subspace identification in the Hermite
// domain.
//
// Signals are projected onto a truncated Hermite basis after the experiment
// window is mapped onto the basis support. In that domain differentiation is
// right multiplication by a tridiagonal operator, so the predictor
//
//     x D' = A' x + B' z,   A' = (A - K C + beta I) / gamma,
//                           B' = [B - K D, K] / gamma,   z = [u; y],
//
// can be integrated p times with D'^-1, giving x ~= K_p Z where Z stacks
// z D'^-p ... z D'^-1. The pipeline then runs three least-squares problems
// and one SVD:
//
//   1. y = (C K_p) Z + D u + e          -> C K_p, D
//   2. SVD of (Gamma_f K_p) Z           -> state coefficients x
//   3. y - D u = C x + e                -> C, innovation e
//   4. gamma x D' - beta x = A x + B u + K e   -> A, B, K
//
// All matrices come out in continuous time and in seconds; the time scaling
// alpha is folded into D'.

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hdpbsid/error.hpp"
#include "hdpbsid/hermite_basis.hpp"
#include "hdpbsid/lti_sim.hpp"
#include "hdpbsid/operators.hpp"

namespace hdpbsid {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct IdentConfig {
  int n_max = 250;
  double beta = 3.0;
  double gamma = 20.0;
  int past = 10;    // p
  int future = 10;  // f
  std::optional<int> order;  // empty selects the order from the SV gap
  double sv_gap_threshold = 10.0;

  void validate() const {
    if (!(gamma > 0.0)) throw Error("config", "gamma must be positive");
    if (!(beta >= 0.0)) throw Error("config", "beta must be non-negative");
    if (future < 1) throw Error("config", "future window must be at least 1");
    if (past < future) throw Error("config", "past window must be >= future window");
    if (n_max < past) throw Error("config", "n_max must be >= past window");
    if (order && *order < 1) throw Error("config", "model order must be positive");
  }
};

/// Solution of min ||target - X regressors||_F.
struct LeastSquares {
  MatrixXd solution;
  double condition = 0.0;  // ratio of extreme singular values of the regressors
  double residual = 0.0;   // Frobenius norm of the misfit
  Index rank = 0;
};

/// Column-pivoted complete orthogonal decomposition of regressors^T;
/// minimum-norm when rank deficient.
///
/// Without `rank_tolerance` the rows are used as given and the rank decision
/// is Eigen's default (machine precision). With it, rows are first scaled to
/// unit norm and directions below that relative level are discarded.
inline LeastSquares solve_least_squares(const MatrixXd& target,
                                        const MatrixXd& regressors,
                                        std::optional<double> rank_tolerance = {}) {
  if (target.cols() != regressors.cols())
    throw Error("least squares operands have different column counts");
  LeastSquares ls;
  if (regressors.rows() == 0) {
    ls.solution = MatrixXd::Zero(target.rows(), 0);
    ls.residual = target.norm();
    return ls;
  }
  VectorXd scale = VectorXd::Ones(regressors.rows());
  if (rank_tolerance) {
    for (Index i = 0; i < scale.size(); ++i) {
      const double n = regressors.row(i).norm();
      if (n > 0.0) scale[i] = 1.0 / n;
    }
  }
  const MatrixXd rt = (scale.asDiagonal() * regressors).transpose();
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod;
  if (rank_tolerance) cod.setThreshold(*rank_tolerance);
  cod.compute(rt);
  ls.solution = cod.solve(target.transpose()).transpose() * scale.asDiagonal();
  ls.rank = cod.rank();
  ls.residual = (target - ls.solution * regressors).norm();

  const VectorXd sv = Eigen::BDCSVD<MatrixXd>(regressors.transpose()).singularValues();
  const double smin = sv[sv.size() - 1];
  ls.condition = (smin > 0.0 && ls.rank == regressors.rows())
                     ? sv[0] / smin
                     : std::numeric_limits<double>::infinity();
  return ls;
}

/// Relative tolerance for rank decisions on the past-data regressors and on
/// the state/input/innovation regressors. Noise-free data make both nearly
/// degenerate, and a machine-precision rank decision then follows roundoff.
inline constexpr double kRegressorRankTolerance = 1e-10;

inline Index numerical_rank(const MatrixXd& rows,
                            double tolerance = kRegressorRankTolerance) {
  if (rows.size() == 0) return 0;
  VectorXd scale = rows.rowwise().norm();
  for (Index i = 0; i < scale.size(); ++i) scale[i] = scale[i] > 0.0 ? 1.0 / scale[i] : 1.0;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod;
  cod.setThreshold(tolerance);
  cod.compute((scale.asDiagonal() * rows).transpose());
  return cod.rank();
}

/// z = [u; y], u rows first.
inline CoefficientMatrix build_predictor_data(const CoefficientMatrix& u,
                                              const CoefficientMatrix& y) {
  if (u.coeffs.cols() != y.coeffs.cols())
    throw Error("predictor data", "input and output expansions differ in size");
  MatrixXd z(u.channels() + y.channels(), u.coeffs.cols());
  z << u.coeffs, y.coeffs;
  return {std::move(z), u.basis};
}

/// Stack z D'^-p (top) down to z D'^-1 (bottom).
inline MatrixXd build_past_stack(const CoefficientMatrix& z,
                                 const InverseOperator& inv, int p) {
  if (p < 1) throw Error("past stack", "past window must be at least 1");
  const Index w = z.channels();
  MatrixXd stack(p * w, z.coeffs.cols());
  MatrixXd block = z.coeffs;
  for (int k = 1; k <= p; ++k) {
    block = inv.apply(block);
    stack.middleRows((p - k) * w, w) = block;
  }
  return stack;
}

inline MatrixXd build_past_stack(const CoefficientMatrix& z,
                                 const ModifiedOperator& dp, int p) {
  return build_past_stack(z, InverseOperator(dp), p);
}

struct MarkovEstimate {
  MatrixXd ck;     // C K_p, ny x p (nu + ny)
  MatrixXd d_hat;  // ny x nu
  double condition = 0.0;
  double residual = 0.0;
};

/// min over (C K_p, D) of ||y - C K_p Z - D u||_F.
inline MarkovEstimate solve_markov(const CoefficientMatrix& y,
                                   const MatrixXd& past_stack,
                                   const CoefficientMatrix& u) {
  if (past_stack.cols() != y.coeffs.cols() || u.coeffs.cols() != y.coeffs.cols())
    throw Error("markov", "column counts of y, Z and u differ");
  MatrixXd reg(past_stack.rows() + u.channels(), past_stack.cols());
  reg << past_stack, u.coeffs;
  if (reg.cwiseAbs().maxCoeff() == 0.0) throw Error("markov", "unexcited system");

  const LeastSquares ls = solve_least_squares(y.coeffs, reg, kRegressorRankTolerance);
  MarkovEstimate m;
  m.ck = ls.solution.leftCols(past_stack.rows());
  m.d_hat = ls.solution.rightCols(u.channels());
  m.condition = ls.condition;
  m.residual = ls.residual;
  return m;
}

/// Block upper-triangular Gamma_f K_p: block (i, j) is the Markov block
/// j - i of C K_p for j >= i and zero below the diagonal.
inline MatrixXd assemble_gamma_k(const MatrixXd& ck, int p, int f, Index nu,
                                 Index ny) {
  if (f > p) throw Error("gamma_k", "future window exceeds past window");
  if (f < 1) throw Error("gamma_k", "future window must be at least 1");
  const Index w = nu + ny;
  if (ck.rows() != ny || ck.cols() != p * w)
    throw Error("gamma_k", "Markov matrix has the wrong shape");
  MatrixXd gk = MatrixXd::Zero(f * ny, p * w);
  for (int i = 0; i < f; ++i)
    for (int j = i; j < p; ++j)
      gk.block(i * ny, j * w, ny, w) = ck.middleCols((j - i) * w, w);
  return gk;
}

struct StateEstimate {
  MatrixXd x_hat;  // order x n_c
  VectorXd singular_values;
  Index order = 0;
};

/// Index n maximizing sigma_n / sigma_{n+1} among numerically nonzero
/// values; throws when no ratio exceeds the threshold.
inline Index order_from_gap(const VectorXd& sv, double threshold, Index dim) {
  if (sv.size() == 0 || sv[0] <= 0.0)
    throw Error("state estimation", "order undetermined: all singular values are zero");
  // values at roundoff level relative to the largest are clamped to that
  // level, so the step down to them counts as a finite gap
  const double floor =
      std::max(std::numeric_limits<double>::epsilon() * dim, kRegressorRankTolerance) * sv[0];
  Index best = 0;
  double best_ratio = 0.0;
  for (Index i = 0; i + 1 < sv.size() && sv[i] > floor; ++i) {
    const double ratio = sv[i] / std::max(sv[i + 1], floor);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = i + 1;
    }
  }
  if (!(best_ratio > threshold)) {
    std::ostringstream msg;
    msg << "order undetermined; singular values:";
    for (Index i = 0; i < sv.size(); ++i) msg << ' ' << sv[i];
    throw Error("state estimation", msg.str());
  }
  return best;
}

/// x = Sigma_n^1/2 V_n^T from the SVD of Gamma_f K_p Z. Each right singular
/// vector is signed so that its largest-magnitude entry is positive.
inline StateEstimate estimate_states(const MatrixXd& gamma_k,
                                     const MatrixXd& past_stack,
                                     std::optional<int> order,
                                     double sv_gap_threshold) {
  const MatrixXd m = gamma_k * past_stack;
  Eigen::BDCSVD<MatrixXd> svd(m, Eigen::ComputeThinV);
  StateEstimate s;
  s.singular_values = svd.singularValues();
  const Index avail = s.singular_values.size();
  s.order = order ? Index(*order)
                  : order_from_gap(s.singular_values, sv_gap_threshold,
                                   std::max(m.rows(), m.cols()));
  if (s.order > avail) {
    std::ostringstream msg;
    msg << "requested order " << s.order << " exceeds the " << avail
        << " available singular values";
    throw Error("state estimation", msg.str());
  }
  MatrixXd v = svd.matrixV().leftCols(s.order);
  for (Index c = 0; c < v.cols(); ++c) {
    Index imax = 0;
    v.col(c).cwiseAbs().maxCoeff(&imax);
    if (v(imax, c) < 0.0) v.col(c) = -v.col(c);
  }
  s.x_hat = s.singular_values.head(s.order).cwiseSqrt().asDiagonal() *
            v.transpose();
  return s;
}

struct OutputEstimate {
  MatrixXd c_hat;
  double condition = 0.0;
  double residual = 0.0;
  bool rank_deficient = false;
};

/// min over C of ||y - C x - D u||_F with D held fixed.
inline OutputEstimate solve_output(const CoefficientMatrix& y,
                                   const MatrixXd& x_hat, const MatrixXd& d_hat,
                                   const CoefficientMatrix& u) {
  if (x_hat.cols() != y.coeffs.cols() || d_hat.rows() != y.channels() ||
      d_hat.cols() != u.channels())
    throw Error("output", "inconsistent shapes");
  const LeastSquares ls = solve_least_squares(y.coeffs - d_hat * u.coeffs, x_hat);
  return {ls.solution, ls.condition, ls.residual, ls.rank < x_hat.rows()};
}

/// e = y - C x - D u.
inline MatrixXd innovation_estimate(const CoefficientMatrix& y,
                                    const MatrixXd& c_hat, const MatrixXd& x_hat,
                                    const MatrixXd& d_hat,
                                    const CoefficientMatrix& u) {
  return y.coeffs - c_hat * x_hat - d_hat * u.coeffs;
}

struct SystemEstimate {
  MatrixXd a_hat, b_hat, k_hat;
  double condition = 0.0;
  double residual = 0.0;
  bool k_identifiable = true;
};

/// min over (A, B, K) of ||gamma x D' - beta x - A x - B u - K e||_F.
inline SystemEstimate solve_system_matrices(const MatrixXd& x_hat,
                                            const ModifiedOperator& dp,
                                            const CoefficientMatrix& u,
                                            const MatrixXd& e_hat, double beta,
                                            double gamma) {
  const Index nx = x_hat.rows(), nu = u.channels(), ny = e_hat.rows();
  const Index nc = x_hat.cols();
  if (dp.size() != nc || u.coeffs.cols() != nc || e_hat.cols() != nc)
    throw Error("system matrices", "inconsistent shapes");

  MatrixXd reg(nx + nu + ny, nc);
  reg << x_hat, u.coeffs, e_hat;
  if (numerical_rank(x_hat) < nx)
    throw Error("system matrices", "state regressor block is rank deficient");
  if (numerical_rank(reg.topRows(nx + nu)) < nx + nu)
    throw Error("system matrices", "input regressor block is rank deficient");

  const MatrixXd target = gamma * x_hat * dp.matrix - beta * x_hat;
  const LeastSquares ls = solve_least_squares(target, reg, kRegressorRankTolerance);
  SystemEstimate s;
  s.a_hat = ls.solution.leftCols(nx);
  s.b_hat = ls.solution.middleCols(nx, nu);
  s.k_hat = ls.solution.rightCols(ny);
  s.condition = ls.condition;
  s.residual = ls.residual;
  s.k_identifiable = ls.rank == reg.rows();
  return s;
}

struct IdentDiagnostics {
  double alpha = 0.0;
  double operator_condition = 0.0;
  double markov_condition = 0.0, output_condition = 0.0, system_condition = 0.0;
  double markov_residual = 0.0, output_residual = 0.0, system_residual = 0.0;
  double innovation_relative_norm = 0.0;  // ||e|| / ||y|| in coefficients
  bool k_identifiable = true;
  bool output_rank_deficient = false;
  /// Eigenvalues of (A - K C + beta I) / gamma for the identified model.
  std::vector<Complex> predictor_eigenvalues;
  bool predictor_in_unit_circle = false;
  /// Spectral norm of ((A - K C + beta I) / gamma)^p.
  double truncation_bias_proxy = 0.0;
};

struct IdentResult {
  StateSpaceModel model;
  VectorXd singular_values;
  CoefficientMatrix x_hat;
  CoefficientMatrix e_hat;
  MatrixXd markov;  // C K_p
  IdentDiagnostics diagnostics;
};

namespace detail {

inline bool same_instant(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace detail

/// End-to-end identification from sampled input and output. The two grids
/// may differ in their interior but must share the first and last instants.
inline IdentResult identify(const SampledSignal& u, const SampledSignal& y,
                            const IdentConfig& cfg) {
  cfg.validate();
  if (y.channels() < 1) throw Error("data", "output has no channels");
  if (u.samples() < 2 || y.samples() < 2)
    throw Error("data", "input and output need at least 2 samples");
  if (!detail::same_instant(u.times()[0], y.times()[0]) ||
      !detail::same_instant(u.times()[u.samples() - 1], y.times()[y.samples() - 1]))
    throw Error("data", "input and output must share first and last sample instants");

  const BasisSpec basis(cfg.n_max);
  auto [us, scaling] = shift_and_scale(u, basis);
  auto ys = shift_and_scale(y, basis).first;
  const CoefficientMatrix uc = project(us, basis);
  const CoefficientMatrix yc = project(ys, basis);

  const ModifiedOperator dp = modified_operator(
      derivative_operator(basis.size()), scaling.alpha, cfg.beta, cfg.gamma);
  std::optional<InverseOperator> inv;
  try {
    inv.emplace(dp);
  } catch (const Error& e) {
    throw Error("operator", e.what());
  }

  const CoefficientMatrix z = build_predictor_data(uc, yc);
  const MatrixXd past = build_past_stack(z, *inv, cfg.past);
  const MarkovEstimate mk = solve_markov(yc, past, uc);
  const MatrixXd gk =
      assemble_gamma_k(mk.ck, cfg.past, cfg.future, uc.channels(), yc.channels());
  const StateEstimate st = estimate_states(gk, past, cfg.order, cfg.sv_gap_threshold);
  const OutputEstimate out = solve_output(yc, st.x_hat, mk.d_hat, uc);
  const MatrixXd e = innovation_estimate(yc, out.c_hat, st.x_hat, mk.d_hat, uc);
  const SystemEstimate sys =
      solve_system_matrices(st.x_hat, dp, uc, e, cfg.beta, cfg.gamma);

  IdentResult r;
  r.model = StateSpaceModel(sys.a_hat, sys.b_hat, out.c_hat, mk.d_hat, sys.k_hat);
  r.singular_values = st.singular_values;
  r.x_hat = CoefficientMatrix(st.x_hat, basis);
  r.e_hat = CoefficientMatrix(e, basis);
  r.markov = mk.ck;

  IdentDiagnostics& d = r.diagnostics;
  d.alpha = scaling.alpha;
  d.operator_condition = inv->condition();
  d.markov_condition = mk.condition;
  d.output_condition = out.condition;
  d.system_condition = sys.condition;
  d.markov_residual = mk.residual;
  d.output_residual = out.residual;
  d.system_residual = sys.residual;
  const double ynorm = yc.coeffs.norm();
  d.innovation_relative_norm = ynorm > 0.0 ? e.norm() / ynorm : 0.0;
  d.k_identifiable = sys.k_identifiable;
  d.output_rank_deficient = out.rank_deficient;

  const Index nx = st.order;
  const MatrixXd ap =
      (r.model.predictor_a() + cfg.beta * MatrixXd::Identity(nx, nx)) / cfg.gamma;
  d.predictor_eigenvalues = eigenvalues(ap);
  d.predictor_in_unit_circle = true;
  for (const auto& l : d.predictor_eigenvalues)
    if (!(std::abs(l) < 1.0)) d.predictor_in_unit_circle = false;
  MatrixXd apk = MatrixXd::Identity(nx, nx);
  for (int i = 0; i < cfg.past; ++i) apk = apk * ap;
  d.truncation_bias_proxy =
      nx > 0 ? Eigen::BDCSVD<MatrixXd>(apk).singularValues()[0] : 0.0;
  return r;
}

}  // namespace hdpbsid
