#include <doctest.h>

#include "sensing.hpp"

#include <cmath>
#include <set>
#include <sstream>

using namespace enz;
using namespace enz::sensing;

namespace {

Matrix sample_covariance(const Matrix& rows) {
  const Vector mean = rows.colwise().mean();
  const Matrix centered = rows.rowwise() - mean.transpose();
  return centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc{};
}

std::string csv_of(const SweepResult& r) {
  std::ostringstream a;
  write_trials_csv(r, a);
  write_summary_csv(r, a);
  return a.str();
}

}  // namespace

TEST_CASE("correlated_gaussian_matrix covariance") {
  const Matrix iid = correlated_gaussian_matrix({5000, 8, 0.0, 1});
  const Matrix c0 = sample_covariance(iid);
  CHECK((c0 - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() <= 0.06);

  // Per-entry sampling sd at m = 5000 is about 0.014, so 0.02 per entry is
  // checked on the pooled means there and entrywise at m = 100000.
  const Matrix c = sample_covariance(correlated_gaussian_matrix({5000, 8, 0.1, 2}));
  const double diag_mean = c.diagonal().mean();
  const double off_mean = (c.sum() - c.trace()) / 56.0;
  CHECK(std::abs(diag_mean - 1.0) <= 0.05);
  CHECK(std::abs(off_mean - 0.1) <= 0.02);
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) CHECK(std::abs(c(i, j) - (i == j ? 1.0 : 0.1)) <= 0.08);

  const Matrix big = sample_covariance(correlated_gaussian_matrix({100000, 8, 0.1, 3}));
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) {
      if (i == j) CHECK(std::abs(big(i, j) - 1.0) <= 0.05);
      else CHECK(std::abs(big(i, j) - 0.1) <= 0.02);
    }
}

TEST_CASE("correlated_gaussian_matrix determinism and errors") {
  CHECK(correlated_gaussian_matrix({10, 20, 0.1, 7}) == correlated_gaussian_matrix({10, 20, 0.1, 7}));
  CHECK(correlated_gaussian_matrix({10, 20, 0.1, 7}) != correlated_gaussian_matrix({10, 20, 0.1, 8}));
  CHECK(code_of([] { correlated_gaussian_matrix({4, 4, 1.0, 0}); }) == Errc::BadCorrelation);
  CHECK(code_of([] { correlated_gaussian_matrix({4, 4, -0.1, 0}); }) == Errc::BadCorrelation);
}

TEST_CASE("sparse_signal dynamic range") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Vector x = sparse_signal({100, 8, 3.0, seed});
    double lo = INFINITY, hi = 0.0;
    int nnz = 0;
    for (Index i = 0; i < x.size(); ++i)
      if (x(i) != 0) {
        ++nnz;
        lo = std::min(lo, std::abs(x(i)));
        hi = std::max(hi, std::abs(x(i)));
      }
    CHECK(nnz == 8);
    CHECK(hi / lo == doctest::Approx(1000.0).epsilon(1e-9));
  }
  const Vector flat = sparse_signal({50, 6, 0.0, 3});
  double mag = 0.0;
  for (Index i = 0; i < flat.size(); ++i)
    if (flat(i) != 0) {
      if (mag == 0.0) mag = std::abs(flat(i));
      CHECK(std::abs(flat(i)) == doctest::Approx(mag).epsilon(1e-14));
    }
  const Vector full = sparse_signal({20, 20, 2.0, 4});
  for (Index i = 0; i < 20; ++i) CHECK(full(i) != 0.0);
}

TEST_CASE("sparse_signal support is spread and deterministic") {
  std::set<Index> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Vector x = sparse_signal({32, 2, 1.0, seed});
    for (Index i = 0; i < 32; ++i)
      if (x(i) != 0) seen.insert(i);
  }
  CHECK(seen.size() == 32);
  CHECK(sparse_signal({64, 5, 3.0, 9}) == sparse_signal({64, 5, 3.0, 9}));
  CHECK(code_of([] { sparse_signal({10, 0, 3.0, 0}); }) == Errc::BadK);
  CHECK(code_of([] { sparse_signal({10, 11, 3.0, 0}); }) == Errc::BadK);
}

TEST_CASE("add_noise scaling") {
  Vector clean(50);
  for (Index i = 0; i < 50; ++i) clean(i) = std::sin(0.3 * static_cast<double>(i)) + 0.1;
  const auto none = add_noise(clean, 0.0, 1);
  CHECK(none.noisy == clean);
  for (double eta : {0.01, 0.02, 0.03, 0.5}) {
    const auto o = add_noise(clean, eta, 2);
    CHECK(std::abs(o.noise.norm() / clean.norm() - eta) <= 1e-12);
    CHECK((o.noisy - clean - o.noise).norm() <= 1e-15 * clean.norm());
  }
  CHECK(add_noise(clean, 0.02, 5).noise == add_noise(clean, 0.02, 5).noise);
}

TEST_CASE("relative_error examples") {
  Vector x(3);
  x << 1, -2, 3;
  CHECK(relative_error(x, x) == 0.0);
  CHECK(relative_error(Vector::Zero(3), x) == doctest::Approx(1.0));
  CHECK(relative_error(2 * x, x) == doctest::Approx(1.0));
  CHECK(code_of([&] { relative_error(x, Vector::Zero(3)); }) == Errc::ZeroVector);
  CHECK(code_of([&] { relative_error(Vector::Zero(2), x); }) == Errc::DimensionMismatch);
}

TEST_CASE("method names round-trip") {
  for (Method m : {Method::Entropy, Method::Ista, Method::Iht, Method::Irl1}) CHECK(parse_method(to_string(m)) == m);
  CHECK(parse_method("l1") == Method::Ista);
  CHECK_THROWS_AS(parse_method("bogus"), Error);
}

TEST_CASE("easy cell succeeds for every method") {
  SweepConfig cfg;
  cfg.k_grid = {1};
  cfg.eta_grid = {0.0};
  cfg.trials = 3;
  cfg.m = 64;
  cfg.n = 128;
  const auto r = success_sweep(cfg);
  REQUIRE(r.cells.size() == 4);
  for (const auto& c : r.cells) CHECK(c.success_rate == 1.0);
}

TEST_CASE("impossible cell fails for every method") {
  SweepConfig cfg;
  cfg.k_grid = {16};
  cfg.eta_grid = {0.01};
  cfg.trials = 3;
  cfg.m = 16;
  cfg.n = 64;
  cfg.lambda_points = 9;
  const auto r = success_sweep(cfg);
  for (const auto& c : r.cells) CHECK(c.success_rate <= 1.0 / 3.0);
}

TEST_CASE("sweep output is ordered, consistent and thread independent") {
  SweepConfig cfg;
  cfg.k_grid = {2, 6};
  cfg.eta_grid = {0.01, 0.03};
  cfg.trials = 2;
  cfg.m = 24;
  cfg.n = 64;
  cfg.base_seed = 40;
  cfg.lambda_points = 9;
  const auto one = success_sweep(cfg);
  cfg.threads = 3;
  const auto three = success_sweep(cfg);
  CHECK(csv_of(one) == csv_of(three));

  REQUIRE(one.outcomes.size() == 4 * 2 * 2 * 2);
  size_t i = 0;
  for (Method m : cfg.methods)
    for (Index k : cfg.k_grid)
      for (double eta : cfg.eta_grid)
        for (int t = 0; t < cfg.trials; ++t) {
          const auto& o = one.outcomes[i++];
          CHECK(o.method == m);
          CHECK(o.k == k);
          CHECK(o.eta == eta);
          CHECK(o.trial == t);
          CHECK(o.seed == cfg.base_seed + static_cast<std::uint64_t>(t));
          CHECK(o.success == (o.rel_error <= kSuccessThreshold));
          CHECK(o.wall_time == 0.0);
          if (m == Method::Iht) CHECK(std::isnan(o.best_lambda));
        }

  std::ostringstream trials, summary;
  write_trials_csv(one, trials);
  write_summary_csv(one, summary);
  CHECK(trials.str().rfind("method,k,eta,trial,seed,rel_error,success,best_lambda,wall_time_s\n", 0) == 0);
  CHECK(summary.str().rfind("method,k,eta,success_rate\n", 0) == 0);
  CHECK(trials.str().find("\nentropy,2,0.01,0,40,") != std::string::npos);
}

TEST_CASE("run_trial shares the instance across methods") {
  SweepConfig cfg;
  cfg.m = 24;
  cfg.n = 64;
  cfg.lambda_points = 5;
  cfg.methods = {Method::Ista, Method::Ista};
  const auto outcomes = run_trial(cfg, 3, 0.01, 4);
  REQUIRE(outcomes.size() == 2);
  CHECK(outcomes[0].rel_error == outcomes[1].rel_error);
  CHECK(outcomes[0].seed == 4);
}

TEST_CASE("SweepConfig validation") {
  SweepConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.trials = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SweepConfig{};
  cfg.k_grid = {600};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SweepConfig{};
  cfg.r = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
