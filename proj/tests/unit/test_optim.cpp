#include <doctest.h>

#include "optim.hpp"
#include "random.hpp"

#include <cmath>
#include <limits>

using namespace enz;
using namespace enz::optim;

TEST_CASE("minimize_smooth finds the center of a shifted quadratic") {
  Vector a(5);
  a << 1, -2, 3, 0.5, 10;
  QuasiNewtonConfig cfg;
  const auto r = minimize_smooth(
      [&](const Vector& x, Vector& g) {
        g = x - a;
        return 0.5 * (x - a).squaredNorm();
      },
      Vector::Zero(5), cfg);
  CHECK(r.status == Status::Converged);
  CHECK((r.x - a).lpNorm<Eigen::Infinity>() <= cfg.grad_tol);
  CHECK(r.value <= 0.5 * a.squaredNorm());
}

TEST_CASE("minimize_smooth solves Rosenbrock") {
  QuasiNewtonConfig cfg;
  cfg.grad_tol = 1e-10;
  cfg.max_inner_iters = 2000;
  Vector x0(2);
  x0 << -1.2, 1.0;
  const auto r = minimize_smooth(
      [](const Vector& v, Vector& g) {
        const double x = v(0), y = v(1);
        g(0) = -2 * (1 - x) - 400 * x * (y - x * x);
        g(1) = 200 * (y - x * x);
        return (1 - x) * (1 - x) + 100 * (y - x * x) * (y - x * x);
      },
      x0, cfg);
  CHECK(std::abs(r.x(0) - 1.0) <= 1e-6);
  CHECK(std::abs(r.x(1) - 1.0) <= 1e-6);
}

TEST_CASE("minimize_smooth solves a random strongly convex quadratic") {
  Rng rng(31);
  const Index n = 30;
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = rng.normal();
  const Matrix h = m.transpose() * m / n + Matrix::Identity(n, n);
  Vector b(n);
  for (Index i = 0; i < n; ++i) b(i) = rng.normal();
  QuasiNewtonConfig cfg;
  cfg.grad_tol = 1e-7;
  const auto r = minimize_smooth(
      [&](const Vector& x, Vector& g) {
        g = h * x - b;
        return 0.5 * x.dot(h * x) - b.dot(x);
      },
      Vector::Zero(n), cfg);
  CHECK(r.status == Status::Converged);
  const Vector exact = h.ldlt().solve(b);
  CHECK((r.x - exact).norm() <= 1e-6 * exact.norm());
}

TEST_CASE("minimize_smooth has a superlinear tail on a small quadratic") {
  Vector d(2), b(2);
  d << 1.0, 4.0;
  b << 1.0, 1.0;
  QuasiNewtonConfig cfg;
  cfg.grad_tol = 1e-7;
  const auto r = minimize_smooth(
      [&](const Vector& x, Vector& g) {
        g = d.cwiseProduct(x) - b;
        return 0.5 * x.dot(d.cwiseProduct(x)) - b.dot(x);
      },
      Vector::Zero(2), cfg);
  const auto& gt = r.grad_trace;
  REQUIRE(gt.size() >= 4);
  const size_t e = gt.size();
  CHECK(gt[e - 1] <= gt[e - 2] / 5);
  CHECK(gt[e - 2] <= gt[e - 3] / 5);
  CHECK(gt[e - 3] <= gt[e - 4] / 5);
}

TEST_CASE("minimize_smooth trace is nonincreasing and starts at f(x0)") {
  Vector x0(3);
  x0 << 3, -1, 2;
  const auto r = minimize_smooth(
      [](const Vector& x, Vector& g) {
        double f = 0;
        for (Index i = 0; i < x.size(); ++i) {
          f += std::cosh(x(i)) + 0.1 * x(i) * x(i) * x(i) * x(i);
          g(i) = std::sinh(x(i)) + 0.4 * x(i) * x(i) * x(i);
        }
        return f;
      },
      x0, QuasiNewtonConfig{});
  REQUIRE(!r.trace.empty());
  double f0 = 0;
  for (Index i = 0; i < 3; ++i) f0 += std::cosh(x0(i)) + 0.1 * std::pow(x0(i), 4);
  CHECK(r.trace.front() == doctest::Approx(f0));
  for (size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
  CHECK(r.value == r.trace.back());
}

TEST_CASE("minimize_smooth rejects a non-finite start") {
  try {
    minimize_smooth(
        [](const Vector&, Vector& g) {
          g.setZero();
          return std::numeric_limits<double>::quiet_NaN();
        },
        Vector::Zero(2), QuasiNewtonConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonFiniteObjective);
  }
}

TEST_CASE("minimize_smooth reports a line search failure with the best iterate") {
  // Gradient that points the wrong way: no step can decrease f.
  Vector x0(1);
  x0 << 1.0;
  const auto r = minimize_smooth(
      [](const Vector& x, Vector& g) {
        g(0) = -x(0);
        return x(0) * x(0);
      },
      x0, QuasiNewtonConfig{});
  CHECK(r.status == Status::LineSearchFailure);
  CHECK(r.value <= 1.0);
}

TEST_CASE("QuasiNewtonConfig validation") {
  QuasiNewtonConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.memory = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = QuasiNewtonConfig{};
  cfg.grad_tol = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
