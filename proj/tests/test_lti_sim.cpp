#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace hdpbsid;
using namespace testing_support;
using Catch::Approx;

TEST_CASE("sine sweep values") {
  const SweepSpec s{10.0, 0.0, 8.0};
  VectorXd t(2);
  t << 0.0, 0.5;
  const SampledSignal u = sine_sweep(s, t);
  CHECK(u.values()(0, 0) == 0.0);
  CHECK(u.values()(0, 1) == Approx(std::sin(0.2 * M_PI)).epsilon(1e-14));
  CHECK(u.values()(0, 1) == Approx(0.587785).margin(1e-6));

  VectorXd q(1);
  q << 0.25;
  CHECK(sine_sweep({10.0, 1.0, 1.0}, q).values()(0, 0) == Approx(1.0).epsilon(1e-15));

  q << 10.5;
  CHECK_THROWS_AS(sine_sweep(s, q), Error);
  CHECK_THROWS_AS(sine_sweep({0.0, 0.0, 1.0}, t), Error);
  CHECK_THROWS_AS(sine_sweep({1.0, 2.0, 1.0}, t), Error);
}

TEST_CASE("band-limiting through the expansion") {
  // Idempotence on h_0 holds to quadrature accuracy once the window covers its
  // tail; on the order-5 window h_0 is cut off at sqrt(11), where it is still
  // 4e-3, and the truncated tail bounds the deviation.
  const BasisSpec forty(40);
  const VectorXd gw = VectorXd::LinSpaced(801, -forty.half_width(), forty.half_width());
  const SampledSignal h0w = sample(gw, [](double t) { return hermite_fn(0, t); });
  CHECK(max_abs(bandlimit_via_hermite(h0w, 40).values() - h0w.values()) < 1e-6);

  const BasisSpec five(5);
  const VectorXd g = VectorXd::LinSpaced(801, -five.half_width(), five.half_width());
  const SampledSignal h0 = sample(g, [](double t) { return hermite_fn(0, t); });
  const double tail = std::sqrt(std::erfc(five.half_width()));
  CHECK(max_abs(bandlimit_via_hermite(h0, 5).values() - h0.values()) < 6.0 * tail);
  CHECK(max_abs(bandlimit_via_hermite(h0, 5).values() - h0.values()) < 1e-3);

  const SampledSignal sw = sine_sweep({10.0, 0.0, 8.0}, uniform_grid(0.0, 10.0, 2000));
  const SampledSignal b = bandlimit_via_hermite(sw, 250);
  CHECK(b.times() == sw.times());
  const double dev = (b.values() - sw.values()).norm() / sw.values().norm();
  // the 8 Hz end of the sweep lies at the window edge, beyond what order 250 resolves
  CHECK(dev < 0.3);
  CHECK(dev == Approx(reconstruction_error(sw, 250)[0]).epsilon(1e-3));

  const SampledSignal bell = bandlimit_via_hermite(sw, 0);
  const double mid = 5.0, alpha = 5.0;
  for (Index k = 0; k < 2000; k += 97) {
    const double s = (sw.times()[k] - mid) / alpha;
    CHECK(bell.values()(0, k) == Approx(bell.values()(0, 1000) / std::exp(-0.5 * std::pow((sw.times()[1000] - mid) / alpha, 2)) *
                                        std::exp(-0.5 * s * s)).epsilon(1e-9));
  }
}

TEST_CASE("zero input gives zero output") {
  const StateSpaceModel m = benchmarks::second_order();
  const SampledSignal u(uniform_grid(0, 5, 100), MatrixXd::Zero(1, 100));
  CHECK(max_abs(simulate(m, u, NoiseSpec::noise_free()).values()) == 0.0);
}

TEST_CASE("step response settles at the DC gain") {
  const StateSpaceModel m = benchmarks::second_order();
  const VectorXd dc = -m.C * m.A.fullPivLu().solve(m.B) + m.D;
  CHECK(dc[0] == Approx(1.375).epsilon(1e-14));
  CHECK(dc[1] == Approx(1.0).epsilon(1e-14));
  const SampledSignal u(uniform_grid(0, 20, 400), MatrixXd::Ones(1, 400));
  const SampledSignal y = simulate_noise_free(m, u);
  CHECK((y.values().col(399) - dc).norm() < 1e-8);

  const auto g = frequency_response(m, {0.0});
  CHECK(std::abs(g[0](0, 0) - 1.375) < 1e-14);
  CHECK(std::abs(g[0](1, 0) - 1.0) < 1e-14);
}

TEST_CASE("first-order hold is exact on piecewise-linear inputs") {
  MatrixXd a(1, 1), b(1, 1), c(1, 1), d(1, 1);
  a << -1.0;
  b << 1.0;
  c << 1.0;
  d << 0.0;
  const StateSpaceModel m(a, b, c, d);
  const VectorXd t = uniform_grid(0, 3, 7);
  const SampledSignal y = simulate_noise_free(m, SampledSignal(t, t.transpose()));
  for (Index k = 0; k < t.size(); ++k)
    CHECK(y.values()(0, k) == Approx(t[k] - 1.0 + std::exp(-t[k])).margin(1e-13));

  VectorXd tn(5);
  tn << 0.0, 0.1, 0.7, 0.8, 2.0;
  const SampledSignal yn = simulate_noise_free(m, SampledSignal(tn, tn.transpose()));
  for (Index k = 0; k < tn.size(); ++k)
    CHECK(yn.values()(0, k) == Approx(tn[k] - 1.0 + std::exp(-tn[k])).margin(1e-13));
}

TEST_CASE("simulation converges at second order on the sweep") {
  const StateSpaceModel m = benchmarks::second_order();
  const SweepSpec s{10.0, 0.0, 8.0};
  auto run = [&](Index n) {
    const VectorXd t = uniform_grid(0, 10, n);
    return simulate_noise_free(m, sine_sweep(s, t)).values();
  };
  const Index n0 = 501;
  const MatrixXd ref = run((n0 - 1) * 64 + 1);
  double err[3];
  for (int level = 0; level < 3; ++level) {
    const Index n = (n0 - 1) * (Index(1) << level) + 1;
    const MatrixXd y = run(n);
    double e = 0.0;
    for (Index k = 0; k < n0; ++k)
      e = std::max(e, (y.col(k << level) - ref.col(k * 64)).cwiseAbs().maxCoeff());
    err[level] = e;
  }
  CHECK(std::log2(err[0] / err[1]) >= 1.8);
  CHECK(std::log2(err[1] / err[2]) >= 1.8);
}

TEST_CASE("noise-free simulation is linear in the input") {
  std::mt19937_64 rng(4);
  const StateSpaceModel m = benchmarks::third_order();
  const VectorXd t = uniform_grid(0, 2, 300);
  const MatrixXd u1 = random_matrix(rng, 1, 300), u2 = random_matrix(rng, 1, 300);
  const MatrixXd y = simulate_noise_free(m, SampledSignal(t, 2.0 * u1 - 0.5 * u2)).values();
  const MatrixXd y1 = simulate_noise_free(m, SampledSignal(t, u1)).values();
  const MatrixXd y2 = simulate_noise_free(m, SampledSignal(t, u2)).values();
  CHECK(max_abs(y - (2.0 * y1 - 0.5 * y2)) < 1e-10 * max_abs(y));
}

TEST_CASE("output noise hits the requested SNR and is reproducible") {
  const StateSpaceModel m = benchmarks::second_order();
  const VectorXd t = uniform_grid(0, 10, 10000);
  const SampledSignal u = sine_sweep({10.0, 0.0, 8.0}, t);
  const SampledSignal clean = simulate_noise_free(m, u);
  const SampledSignal noisy = simulate(m, u, NoiseSpec::snr(50.0, 77));
  for (Index r = 0; r < 2; ++r) {
    const double ps = clean.values().row(r).squaredNorm();
    const double pn = (noisy.values().row(r) - clean.values().row(r)).squaredNorm();
    CHECK(std::abs(10.0 * std::log10(ps / pn) - 50.0) < 0.5);
  }
  const SampledSignal again = simulate(m, u, NoiseSpec::snr(50.0, 77));
  CHECK(again.values() == noisy.values());
  const SampledSignal other = simulate(m, u, NoiseSpec::snr(50.0, 78));
  CHECK(other.values() != noisy.values());

  NoiseSpec cov;
  cov.mode = NoiseMode::covariance;
  CHECK_THROWS_AS(simulate(m, u, cov), Error);
  CHECK_THROWS_AS(add_output_noise(clean.values(), std::numeric_limits<double>::infinity(), 1), Error);
}

TEST_CASE("model validation and dimension checks") {
  const StateSpaceModel m = benchmarks::second_order();
  CHECK(m.K.rows() == 2);
  CHECK(m.K.cols() == 2);
  CHECK(m.K.isZero());
  CHECK_THROWS_AS(StateSpaceModel(MatrixXd::Zero(2, 3), MatrixXd::Zero(2, 1),
                                  MatrixXd::Zero(1, 2), MatrixXd::Zero(1, 1)),
                  Error);
  CHECK_THROWS_AS(StateSpaceModel(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1),
                                  MatrixXd::Zero(1, 2), MatrixXd::Zero(2, 1)),
                  Error);
  const SampledSignal u2(uniform_grid(0, 1, 10), MatrixXd::Zero(2, 10));
  CHECK_THROWS_AS(simulate_noise_free(m, u2), Error);

  CHECK(m.observability_rank() == 2);
  CHECK(m.controllability_rank() == 2);
  const StateSpaceModel unobs(m.A, m.B, MatrixXd::Zero(2, 2), m.D);
  CHECK(unobs.observability_rank() == 0);

  MatrixXd k(2, 2);
  k << 1, 0, 0, 2;
  const StateSpaceModel mk(m.A, m.B, m.C, m.D, k);
  CHECK(mk.predictor_a() == m.A - k * m.C);
  CHECK(mk.predictor_b().cols() == 3);
  CHECK(mk.predictor_b().rightCols(2) == k);
}

TEST_CASE("eigenvalues of the benchmark plants") {
  const auto e1 = eigenvalues(benchmarks::second_order());
  REQUIRE(e1.size() == 2);
  CHECK(std::abs(e1[0] - Complex(-4, 0)) < 1e-12);
  CHECK(std::abs(e1[1] - Complex(-2, 0)) < 1e-12);

  const auto e2 = eigenvalues(benchmarks::third_order());
  REQUIRE(e2.size() == 3);
  CHECK(std::abs(e2[0] - Complex(-5, 0)) < 1e-4);
  CHECK(std::abs(e2[1] - Complex(-1, -1)) < 1e-4);
  CHECK(std::abs(e2[2] - Complex(-1, 1)) < 1e-4);

  const auto e3 = eigenvalues(MatrixXd::Identity(2, 2));
  CHECK(e3 == std::vector<Complex>{1.0, 1.0});
}

TEST_CASE("frequency response") {
  const StateSpaceModel m = benchmarks::second_order();
  const StateSpaceModel donly(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1), MatrixXd::Zero(1, 2),
                              MatrixXd::Constant(1, 1, 3.5));
  for (const auto& g : frequency_response(donly, {0.5, 2.0, 100.0}))
    CHECK(std::abs(g(0, 0) - 3.5) == 0.0);

  const auto far = frequency_response(m, {1e6});
  CHECK(far[0].cwiseAbs().maxCoeff() < 1e-4);

  // independent evaluation through the eigen-decomposition of A
  const double f = 0.7;
  const Complex s(0.0, 2.0 * M_PI * f);
  Eigen::EigenSolver<MatrixXd> es(m.A);
  const MatrixXcd v = es.eigenvectors();
  const MatrixXcd res = v * (s - es.eigenvalues().array()).inverse().matrix().asDiagonal() * v.inverse();
  const MatrixXcd expect = m.C.cast<Complex>() * res * m.B.cast<Complex>();
  CHECK((frequency_response(m, {f})[0] - expect).norm() < 1e-12);

  MatrixXd a(2, 2);
  a << 0, 2 * M_PI, -2 * M_PI, 0;
  const StateSpaceModel osc(a, MatrixXd::Ones(2, 1), MatrixXd::Ones(1, 2), MatrixXd::Zero(1, 1));
  CHECK_THROWS_WITH(frequency_response(osc, {0.5, 1.0}),
                    Catch::Matchers::ContainsSubstring("resolvent singular at 1 Hz"));
}

TEST_CASE("log frequency grid") {
  const auto f = log_frequency_grid(0.01, 100.0, 200);
  REQUIRE(f.size() == 200);
  CHECK(f.front() == Approx(0.01).epsilon(1e-14));
  CHECK(f.back() == Approx(100.0).epsilon(1e-14));
  CHECK(f[1] / f[0] == Approx(f[199] / f[198]).epsilon(1e-10));
}
