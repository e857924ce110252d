#include <doctest.h>

#include "random.hpp"
#include "sensing.hpp"
#include "solvers.hpp"

#include <cmath>
#include <numeric>

using namespace enz;
using namespace enz::solvers;

namespace {

struct Instance {
  Matrix a;
  Vector x;
  Vector b;
};

Instance desk_instance(std::uint64_t seed, Index m = 32, Index n = 128, Index k = 4, double eta = 0.01) {
  Instance in;
  in.a = sensing::correlated_gaussian_matrix({m, n, 0.1, derive_seed(seed, 1)});
  in.x = sensing::sparse_signal({n, k, 3.0, derive_seed(seed, 2)});
  in.b = sensing::add_noise(in.a * in.x, eta, derive_seed(seed, 3)).noisy;
  return in;
}

SurrogateSpec entropy_spec() {
  SurrogateSpec s;
  s.kind = surrogates::Kind::EntropyU;
  return s;
}

Matrix gaussian(Rng& rng, Index m, Index n) {
  Matrix a(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = rng.normal();
  return a;
}

void check_blocks_nonincreasing(const SolveResult& r) {
  for (size_t s = 0; s < r.stage_offsets.size(); ++s) {
    const size_t lo = r.stage_offsets[s];
    const size_t hi = s + 1 < r.stage_offsets.size() ? r.stage_offsets[s + 1] : r.objective_trace.size();
    for (size_t i = lo + 1; i < hi; ++i) CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
  }
}

}  // namespace

TEST_CASE("solvers::minimize_smooth returns the analytic minimizer") {
  Vector a(3);
  a << 4, -1, 0.25;
  QuasiNewtonConfig cfg;
  const Vector x = solvers::minimize_smooth(
      [&](const Vector& v, Vector& g) {
        g = v - a;
        return 0.5 * (v - a).squaredNorm();
      },
      Vector(Vector::Zero(3)), cfg);
  CHECK((x - a).lpNorm<Eigen::Infinity>() <= cfg.grad_tol);
}

TEST_CASE("solve_entropy with identity A and vanishing lambda returns b") {
  const Index n = 20;
  Vector b = Vector::Zero(n);
  b(2) = 1.5;
  b(7) = -0.3;
  b(15) = 0.02;
  const Matrix a = Matrix::Identity(n, n);
  const auto r = solve_entropy({a, b, 1e-9, entropy_spec()}, ContinuationSchedule{}, QuasiNewtonConfig{});
  CHECK((r.x_hat - b).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("solve_entropy trace is nonincreasing in every inner stage") {
  const Instance in = desk_instance(5);
  const auto r = solve_entropy({in.a, in.b, 0.1, entropy_spec()}, ContinuationSchedule{}, QuasiNewtonConfig{});
  REQUIRE(!r.stage_offsets.empty());
  check_blocks_nonincreasing(r);
  for (double c : r.c_trace) CHECK(std::isfinite(c));
}

TEST_CASE("solve_entropy outer scale reaches a fixed point") {
  const Instance in = desk_instance(6);
  ContinuationSchedule sched;
  const auto r = solve_entropy({in.a, in.b, 0.1, entropy_spec()}, sched, QuasiNewtonConfig{});
  REQUIRE(r.converged);
  REQUIRE(r.c_trace.size() >= 2);
  const double last_used = r.c_trace[r.c_trace.size() - 2];
  const double norm = r.x_hat.norm();
  CHECK(std::abs(last_used - norm) / norm <= sched.outer_c_tol);
  CHECK(r.c_trace.back() == doctest::Approx(norm).epsilon(1e-14));
}

TEST_CASE("solve_entropy with lambda zero is a least-squares solve") {
  Rng rng(41);
  const Matrix a = gaussian(rng, 40, 20);
  Vector b(40);
  for (Index i = 0; i < 40; ++i) b(i) = rng.normal();
  const auto r = solve_entropy({a, b, 0.0, entropy_spec()}, ContinuationSchedule{}, QuasiNewtonConfig{});
  const Vector atb = a.transpose() * b;
  CHECK((a.transpose() * (a * r.x_hat - b)).lpNorm<Eigen::Infinity>() <= 1e-6 * atb.lpNorm<Eigen::Infinity>());
}

TEST_CASE("solve_entropy rejects a zero start and bad inputs") {
  const Matrix a = Matrix::Identity(3, 3);
  const Vector b = Vector::Zero(3);
  try {
    solve_entropy({a, b, 1.0, entropy_spec()}, ContinuationSchedule{}, QuasiNewtonConfig{});
    FAIL("expected ZeroIterate");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ZeroIterate);
  }
  const Vector b2 = Vector::Ones(2);
  CHECK_THROWS_AS(solve_entropy({a, b2, 1.0, entropy_spec()}, ContinuationSchedule{}, QuasiNewtonConfig{}), Error);
  SurrogateSpec l1;
  l1.kind = surrogates::Kind::L1;
  const Vector b3 = Vector::Ones(3);
  CHECK_THROWS_AS(solve_entropy({a, b3, 1.0, l1}, ContinuationSchedule{}, QuasiNewtonConfig{}), Error);
}

TEST_CASE("solve_entropy recovers desk-scale signals on most seeds") {
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance in = desk_instance(100 + seed);
    const auto g = lambda_grid_search(
        [&](double lambda) {
          return solve_entropy({in.a, in.b, lambda, entropy_spec()}, ContinuationSchedule{}, QuasiNewtonConfig{});
        },
        1e-3, 1e5, 17, [&](const Vector& x) { return sensing::relative_error(x, in.x); });
    successes += g.best_error <= sensing::kSuccessThreshold;
  }
  CHECK(successes >= 16);
}

TEST_CASE("solve_entropy is deterministic") {
  const Instance in = desk_instance(7);
  const auto r1 = solve_entropy({in.a, in.b, 0.3, entropy_spec()}, ContinuationSchedule{}, QuasiNewtonConfig{});
  const auto r2 = solve_entropy({in.a, in.b, 0.3, entropy_spec()}, ContinuationSchedule{}, QuasiNewtonConfig{});
  CHECK(r1.x_hat == r2.x_hat);
  CHECK(r1.objective_trace == r2.objective_trace);
}

TEST_CASE("solve_entropy accepts the Renyi surrogate") {
  const Instance in = desk_instance(8);
  SurrogateSpec s;
  s.kind = surrogates::Kind::RenyiU;
  s.alpha = 2.0;
  const auto r = solve_entropy({in.a, in.b, 0.1, s}, ContinuationSchedule{}, QuasiNewtonConfig{});
  CHECK(r.x_hat.allFinite());
  check_blocks_nonincreasing(r);
}

TEST_CASE("solve_ista examples") {
  Rng rng(42);
  const Matrix a = gaussian(rng, 15, 30);
  Vector b(15);
  for (Index i = 0; i < 15; ++i) b(i) = rng.normal();
  const double lmax = (a.transpose() * b).lpNorm<Eigen::Infinity>();
  CHECK(solve_ista(a, b, lmax, IstaConfig{}).x_hat.norm() <= 1e-5);
  CHECK(solve_ista(a, b, 1.5 * lmax, IstaConfig{}).x_hat.isZero(0.0));
  CHECK(solve_ista(a, b, 1e6 * lmax, IstaConfig{}).x_hat.isZero(0.0));

  Vector b2(2);
  b2 << 3, 0;
  const auto r = solve_ista(Matrix::Identity(2, 2), b2, 1.0, IstaConfig{});
  CHECK(r.x_hat(0) == doctest::Approx(2.0));
  CHECK(r.x_hat(1) == 0.0);

  const auto mid = solve_ista(a, b, 0.1 * lmax, IstaConfig{});
  for (size_t i = 1; i < mid.objective_trace.size(); ++i)
    CHECK(mid.objective_trace[i] <= mid.objective_trace[i - 1] + 1e-12 * std::abs(mid.objective_trace[i - 1]));
}

TEST_CASE("solve_iht recovers noiseless sparse signals") {
  int exact = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(500 + seed);
    const Index m = 32, n = 64, k = 3;
    // orthonormal rows
    const Matrix g = gaussian(rng, n, m);
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(n, m);
    const Matrix a = q.transpose();
    const Vector x = sensing::sparse_signal({n, k, 1.0, seed});
    const auto r = solve_iht(a, a * x, k, IhtConfig{});
    std::vector<Index> found, truth;
    for (Index i = 0; i < n; ++i) {
      if (r.x_hat(i) != 0) found.push_back(i);
      if (x(i) != 0) truth.push_back(i);
    }
    exact += found == truth && (r.x_hat - x).norm() <= 1e-6;
  }
  CHECK(exact >= 18);
}

TEST_CASE("solve_iht degenerate cases") {
  Rng rng(43);
  const Matrix a = gaussian(rng, 30, 10);
  Vector b(30);
  for (Index i = 0; i < 30; ++i) b(i) = rng.normal();
  IhtConfig cfg;
  cfg.max_iters = 20000;
  cfg.tol = 1e-14;
  const auto full = solve_iht(a, b, 10, cfg);
  CHECK((a.transpose() * (a * full.x_hat - b)).norm() <= 1e-8 * (a.transpose() * b).norm());

  IhtConfig one;
  one.max_iters = 1;
  const double step = 1.0 / std::pow(spectral_norm(a), 2);
  const auto r = solve_iht(a, b, 3, one);
  CHECK((r.x_hat - surrogates::hard_threshold_topk(step * (a.transpose() * b), 3)).norm() <= 1e-14);

  CHECK_THROWS_AS(solve_iht(a, b, 0, cfg), Error);
  CHECK_THROWS_AS(solve_iht(a, b, 11, cfg), Error);
}

TEST_CASE("solve_irl1 with one round is ISTA at a scaled lambda") {
  const Instance in = desk_instance(9);
  Irl1Config cfg;
  cfg.rounds = 1;
  const double lambda = 0.02;
  const auto r = solve_irl1(in.a, in.b, lambda, cfg);
  const auto ista = solve_ista(in.a, in.b, lambda / cfg.eps_w, cfg.inner);
  CHECK((r.x_hat - ista.x_hat).norm() <= 1e-12 * std::max(1.0, ista.x_hat.norm()));
}

TEST_CASE("solve_irl1 objective decreases across rounds") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance in = desk_instance(20 + seed);
    Irl1Config cfg;
    cfg.inner.tol = 1e-10;
    cfg.inner.max_iters = 20000;
    const auto r = solve_irl1(in.a, in.b, 0.01, cfg);
    REQUIRE(r.objective_trace.size() == static_cast<size_t>(cfg.rounds));
    for (size_t i = 1; i < r.objective_trace.size(); ++i)
      CHECK(r.objective_trace[i] <= r.objective_trace[i - 1] + 1e-9 * std::abs(r.objective_trace[i - 1]));
  }
}

TEST_CASE("solve_irl1 beats ISTA at desk scale") {
  int better = 0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    const Instance in = desk_instance(300 + seed);
    auto err = [&](const Vector& x) { return sensing::relative_error(x, in.x); };
    const auto ista = lambda_grid_search([&](double l) { return solve_ista(in.a, in.b, l, IstaConfig{}); }, 1e-3,
                                         1e5, 17, err);
    const auto irl1 = lambda_grid_search([&](double l) { return solve_irl1(in.a, in.b, l, Irl1Config{}); }, 1e-3,
                                         1e5, 17, err);
    better += irl1.best_error < ista.best_error;
  }
  CHECK(better >= 12);
}

TEST_CASE("spectral_norm examples") {
  CHECK(spectral_norm(Matrix::Identity(5, 5)) == doctest::Approx(1.0).epsilon(1e-12));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  CHECK(spectral_norm(d) == doctest::Approx(3.0).epsilon(1e-12));
  Rng rng(44);
  for (int t = 0; t < 5; ++t) {
    const Matrix a = gaussian(rng, 10, 20);
    const double svd = Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
    CHECK(std::abs(spectral_norm(a) - svd) <= 1e-6 * svd);
  }
}

TEST_CASE("log_grid and lambda_grid_search") {
  const auto g = log_grid(1e-3, 1e5, 17);
  REQUIRE(g.size() == 17);
  CHECK(g.front() == doctest::Approx(1e-3));
  CHECK(g.back() == doctest::Approx(1e5));
  CHECK(g[2] == doctest::Approx(1e-2));

  auto fake = [](double lambda) {
    SolveResult r;
    r.x_hat = Vector::Constant(1, lambda);
    return r;
  };
  auto inc = lambda_grid_search(fake, 1e-4, 1e2, 13, [](const Vector& x) { return x(0); });
  CHECK(inc.best_lambda == doctest::Approx(1e-4));
  auto dec = lambda_grid_search(fake, 1e-4, 1e2, 13, [](const Vector& x) { return -x(0); });
  CHECK(dec.best_lambda == doctest::Approx(1e2));
  auto tie = lambda_grid_search(fake, 1e-4, 1e2, 13, [](const Vector&) { return 1.0; });
  CHECK(tie.best_lambda == doctest::Approx(1e-4));
  auto bowl = lambda_grid_search(fake, 1e-4, 1e2, 13,
                                 [](const Vector& x) { return std::abs(std::log10(x(0)) + 1.0); });
  CHECK(bowl.best_lambda == doctest::Approx(0.1));
  CHECK(bowl.errors.size() == 13);
}

TEST_CASE("lambda grid search over recovery is reproducible") {
  const Instance in = desk_instance(10);
  auto run = [&] {
    return lambda_grid_search(
        [&](double l) {
          return solve_entropy({in.a, in.b, l, entropy_spec()}, ContinuationSchedule{}, QuasiNewtonConfig{});
        },
        1e-3, 1e5, 17, [&](const Vector& x) { return sensing::relative_error(x, in.x); });
  };
  const auto a = run(), b = run();
  CHECK(a.best_lambda == b.best_lambda);
  CHECK(a.errors == b.errors);
}
