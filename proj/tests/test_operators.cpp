#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace hdpbsid;
using namespace testing_support;
using Catch::Approx;

TEST_CASE("derivative operator structure") {
  const MatrixXd d3 = derivative_operator(3).matrix;
  MatrixXd expect(3, 3);
  expect << 0, -std::sqrt(0.5), 0, std::sqrt(0.5), 0, -1, 0, 1, 0;
  CHECK(max_abs(d3 - expect) < 1e-15);

  CHECK(derivative_operator(1).matrix == MatrixXd::Zero(1, 1));
  CHECK_THROWS_AS(derivative_operator(0), Error);

  const MatrixXd d = derivative_operator(60).matrix;
  CHECK(max_abs(d + d.transpose()) == 0.0);
  for (Index i = 0; i < 60; ++i)
    for (Index j = 0; j < 60; ++j)
      if (std::abs(i - j) != 1) CHECK(d(i, j) == 0.0);
}

TEST_CASE("right multiplication differentiates h_3") {
  const BasisSpec spec(30);
  const VectorXd g = VectorXd::LinSpaced(6001, -spec.half_width(), spec.half_width());
  const double step = 1e-5;
  const SampledSignal dh3 = sample(g, [&](double t) {
    return (hermite_fn(3, t + step) - hermite_fn(3, t - step)) / (2.0 * step);
  });
  const MatrixXd projected = project(dh3, spec).coeffs;
  MatrixXd e3 = MatrixXd::Zero(1, spec.size());
  e3(0, 3) = 1.0;
  const MatrixXd via_operator = e3 * derivative_operator(spec.size()).matrix;
  CHECK(max_abs(projected - via_operator) < 1e-6);
}

TEST_CASE("reconstructed f D matches finite differences") {
  std::mt19937_64 rng(5);
  const int n_max = 40;
  const BasisSpec spec(n_max);
  MatrixXd f = random_matrix(rng, 1, spec.size());
  f(0, n_max) = 0.0;
  const MatrixXd df = f * derivative_operator(spec.size()).matrix;
  const double L = spec.half_width();
  const VectorXd g = VectorXd::LinSpaced(801, -0.9 * L, 0.9 * L);
  const double h = 1e-4;
  const MatrixXd exact = reconstruct(CoefficientMatrix(df, spec), g).values();
  const MatrixXd plus = reconstruct(CoefficientMatrix(f, spec), g.array() + h).values();
  const MatrixXd minus = reconstruct(CoefficientMatrix(f, spec), g.array() - h).values();
  const MatrixXd fd = (plus - minus) / (2.0 * h);
  CHECK(max_abs(fd - exact) / max_abs(exact) < 1e-4);
}

TEST_CASE("modified operator") {
  const DerivativeOperator d = derivative_operator(5);
  CHECK(modified_operator(d, 1.0, 0.0, 1.0).matrix == d.matrix);

  MatrixXd expect(2, 2);
  const double off = std::sqrt(0.5) / 40.0;
  expect << 0.15, -off, off, 0.15;
  CHECK(max_abs(modified_operator(derivative_operator(2), 2.0, 3.0, 20.0).matrix - expect) < 1e-15);

  const ModifiedOperator m = modified_operator(derivative_operator(30), 0.7, 3.0, 20.0);
  CHECK(max_abs(m.matrix.diagonal().array() - 0.15) < 1e-15);
  CHECK(m.alpha == 0.7);
  CHECK(m.beta == 3.0);
  CHECK(m.gamma == 20.0);

  CHECK_THROWS_AS(modified_operator(d, 0.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(modified_operator(d, 1.0, 1.0, 0.0), Error);
  CHECK_THROWS_AS(modified_operator(d, 1.0, 1.0, -2.0), Error);
  CHECK_THROWS_AS(modified_operator(d, 1.0, -1.0, 1.0), Error);
}

TEST_CASE("operator powers") {
  const ModifiedOperator m = modified_operator(derivative_operator(3), 1.0, 0.0, 1.0);
  CHECK(operator_power(m, 0) == MatrixXd::Identity(3, 3));
  CHECK(max_abs(operator_power(m, 2) - m.matrix * m.matrix) == 0.0);
  CHECK(operator_power(m, 2)(0, 0) == Approx(-0.5).epsilon(1e-15));
  CHECK_THROWS_AS(operator_power(m, -1), Error);
}

TEST_CASE("inverse powers agree with a dense oracle") {
  const ModifiedOperator m = modified_operator(derivative_operator(40), 0.3, 3.0, 20.0);
  const InversePower inv1 = operator_inverse_power(m, 1);
  CHECK(max_abs(inv1.matrix * m.matrix - MatrixXd::Identity(40, 40)) < 1e-10);
  CHECK(max_abs(m.matrix * inv1.matrix - MatrixXd::Identity(40, 40)) < 1e-10);

  const MatrixXd dense = Eigen::FullPivLU<MatrixXd>(m.matrix).inverse();
  const MatrixXd dense3 = dense * dense * dense;
  const InversePower inv3 = operator_inverse_power(m, 3);
  CHECK(max_abs(inv3.matrix - dense3) / max_abs(dense3) < 1e-12);

  const double cond = m.matrix.cwiseAbs().colwise().sum().maxCoeff() *
                      dense.cwiseAbs().colwise().sum().maxCoeff();
  CHECK(inv3.condition == Approx(cond).epsilon(1e-10));
  CHECK_THROWS_AS(operator_inverse_power(m, 0), Error);
}

TEST_CASE("unshifted operator is singular exactly for odd sizes") {
  for (Index n_c = 1; n_c <= 12; ++n_c) {
    const MatrixXd d = derivative_operator(n_c).matrix;
    const Index rank = Eigen::FullPivLU<MatrixXd>(d).rank();
    const ModifiedOperator m = modified_operator(derivative_operator(n_c), 1.0, 0.0, 1.0);
    INFO("n_c=" << n_c);
    if (n_c % 2 == 0) {
      CHECK(rank == n_c);
      CHECK_NOTHROW(operator_inverse_power(m, 1));
    } else {
      CHECK(rank == n_c - 1);
      CHECK_THROWS_WITH(operator_inverse_power(m, 1),
                        Catch::Matchers::ContainsSubstring("operator ill-conditioned; increase beta"));
    }
  }
}

TEST_CASE("working configuration is well conditioned") {
  const double alpha = 5.0 / std::sqrt(501.0);
  const ModifiedOperator m = modified_operator(derivative_operator(251), alpha, 3.0, 20.0);
  const InverseOperator inv(m);
  CHECK(std::isfinite(inv.condition()));
  CHECK(inv.condition() < kMaxOperatorCondition);
  std::mt19937_64 rng(2);
  const MatrixXd x = random_matrix(rng, 3, 251);
  CHECK(max_abs(inv.apply(x) * m.matrix - x) < 1e-10 * max_abs(x));
  CHECK(max_abs(inv.apply(x, 2) - inv.apply(inv.apply(x))) == 0.0);
}

TEST_CASE("tridiagonal LU matches dense solves") {
  std::mt19937_64 rng(9);
  for (Index n : {1, 2, 3, 7, 30}) {
    MatrixXd a = MatrixXd::Zero(n, n);
    std::normal_distribution<double> nd;
    for (Index i = 0; i < n; ++i) {
      a(i, i) = 0.1 * nd(rng);  // weak diagonal forces row interchanges
      if (i + 1 < n) {
        a(i, i + 1) = nd(rng);
        a(i + 1, i) = nd(rng);
      }
    }
    const TridiagonalLU lu(a);
    VectorXd b = random_matrix(rng, n, 1);
    VectorXd x = b;
    lu.solve_in_place(x);
    INFO("n=" << n);
    CHECK((a * x - b).norm() < 1e-9 * (1.0 + b.norm()) * lu.condition());
    const double cond = a.cwiseAbs().colwise().sum().maxCoeff() *
                        a.inverse().cwiseAbs().colwise().sum().maxCoeff();
    CHECK(lu.condition() == Approx(cond).epsilon(1e-8));
  }
}

TEST_CASE("stable spectra map into the unit circle") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double beta = 3.0, gamma = 20.0;
  for (int trial = 0; trial < 100; ++trial) {
    // eigenvalues inside the ball centred at -beta of radius gamma
    VectorXd re(5), im(5);
    MatrixXd blocks = MatrixXd::Zero(5, 5);
    Index i = 0;
    while (i < 5) {
      const double r = gamma * 0.999 * std::sqrt(u(rng));
      const double th = 2.0 * M_PI * u(rng);
      const double a = -beta + r * std::cos(th), b = std::abs(r * std::sin(th));
      if (i + 1 < 5 && u(rng) < 0.5) {
        blocks(i, i) = a;
        blocks(i + 1, i + 1) = a;
        blocks(i, i + 1) = b;
        blocks(i + 1, i) = -b;
        i += 2;
      } else {
        blocks(i, i) = -beta + r * (u(rng) < 0.5 ? -1.0 : 1.0);
        i += 1;
      }
    }
    MatrixXd t = random_matrix(rng, 5, 5) + 3.0 * MatrixXd::Identity(5, 5);
    const MatrixXd a = t * blocks * t.inverse();
    const MatrixXd mapped = (a + beta * MatrixXd::Identity(5, 5)) / gamma;
    for (const auto& l : eigenvalues(mapped)) CHECK(std::abs(l) < 1.0);
  }
}
