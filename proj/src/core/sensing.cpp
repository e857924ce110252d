#include "sensing.hpp"

#include "io.hpp"
#include "random.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace enz::sensing {

namespace {

constexpr std::uint64_t kMatrixStream = 1;
constexpr std::uint64_t kSignalStream = 2;
constexpr std::uint64_t kNoiseStream = 3;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::Entropy: return "entropy";
    case Method::Ista: return "ista";
    case Method::Iht: return "iht";
    case Method::Irl1: return "irl1";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "entropy") return Method::Entropy;
  if (name == "ista" || name == "l1") return Method::Ista;
  if (name == "iht" || name == "l0") return Method::Iht;
  if (name == "irl1" || name == "logsum") return Method::Irl1;
  throw Error(Errc::InvalidArgument, "unknown method: " + name);
}

Matrix correlated_gaussian_matrix(const SensingConfig& cfg) {
  require(cfg.r >= 0.0 && cfg.r < 1.0, Errc::BadCorrelation, "correlation r must lie in [0, 1)");
  require(cfg.m >= 1 && cfg.n >= 1, Errc::InvalidArgument, "matrix dimensions must be positive");
  // Sigma = (1 - r) I + r 11^T factors as L = [sqrt(1 - r) I | sqrt(r) 1], so a
  // row is sqrt(1 - r) z + sqrt(r) g 1 with independent z ~ N(0, I), g ~ N(0, 1).
  const double a = std::sqrt(1.0 - cfg.r), c = std::sqrt(cfg.r);
  Rng rng(cfg.seed);
  Matrix out(cfg.m, cfg.n);
  for (Index i = 0; i < cfg.m; ++i) {
    const double shared = c * rng.normal();
    for (Index j = 0; j < cfg.n; ++j) out(i, j) = a * rng.normal() + shared;
  }
  return out;
}

Vector sparse_signal(const SignalConfig& cfg) {
  require(cfg.k >= 1 && cfg.k <= cfg.n, Errc::BadK, "k must satisfy 1 <= k <= n");
  require(cfg.dynamic_range >= 0.0 && std::isfinite(cfg.dynamic_range), Errc::InvalidArgument,
          "dynamic range must be a finite nonnegative number");
  Rng rng(cfg.seed);

  std::vector<Index> perm(static_cast<std::size_t>(cfg.n));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index j = 0; j < cfg.k; ++j) {
    const auto pick = j + static_cast<Index>(rng.below(static_cast<std::uint64_t>(cfg.n - j)));
    std::swap(perm[static_cast<std::size_t>(j)], perm[static_cast<std::size_t>(pick)]);
  }

  Vector draws(cfg.k);
  for (Index j = 0; j < cfg.k; ++j) {
    double g = 0.0;
    while (g == 0.0) g = rng.normal();
    draws(j) = g;
  }

  const Vector mags = draws.cwiseAbs();
  const double hi = mags.maxCoeff(), lo = mags.minCoeff();
  Vector scaled(cfg.k);
  if (cfg.k == 1) {
    scaled = mags;
  } else if (cfg.dynamic_range == 0.0) {
    scaled.setConstant(hi);
  } else if (hi > lo) {
    // |x| -> hi (|x| / hi)^gamma keeps the order and the largest magnitude;
    // the exponent that sends lo to hi 10^{-Cr} is available in closed form.
    const double gamma = cfg.dynamic_range / std::log10(hi / lo);
    for (Index j = 0; j < cfg.k; ++j) scaled(j) = hi * std::pow(mags(j) / hi, gamma);
    scaled(std::distance(mags.data(), std::min_element(mags.data(), mags.data() + cfg.k))) =
        hi * std::pow(10.0, -cfg.dynamic_range);
  } else {
    // Tied draws: spread geometrically by position.
    for (Index j = 0; j < cfg.k; ++j)
      scaled(j) = hi * std::pow(10.0, -cfg.dynamic_range * static_cast<double>(j) / static_cast<double>(cfg.k - 1));
  }

  Vector x = Vector::Zero(cfg.n);
  for (Index j = 0; j < cfg.k; ++j) x(perm[static_cast<std::size_t>(j)]) = std::copysign(scaled(j), draws(j));
  return x;
}

NoisyObservation add_noise(const VectorRef& clean, double eta, std::uint64_t seed) {
  require(eta >= 0.0 && std::isfinite(eta), Errc::InvalidArgument, "eta must be a finite nonnegative number");
  NoisyObservation out;
  out.noise = Vector::Zero(clean.size());
  const double target = eta * clean.norm();
  if (target > 0.0) {
    Rng rng(seed);
    Vector dir(clean.size());
    double norm = 0.0;
    while (norm == 0.0) {
      for (Index i = 0; i < dir.size(); ++i) dir(i) = rng.normal();
      norm = dir.norm();
    }
    out.noise = dir * (target / norm);
  }
  out.noisy = clean + out.noise;
  return out;
}

double relative_error(const VectorRef& x_hat, const VectorRef& x_star) {
  require(x_hat.size() == x_star.size(), Errc::DimensionMismatch, "relative_error: size mismatch");
  const double denom = x_star.norm();
  require(denom > 0.0, Errc::ZeroVector, "relative_error: reference vector is zero");
  return (x_hat - x_star).norm() / denom;
}

void SweepConfig::validate() const {
  require(!methods.empty(), Errc::InvalidArgument, "sweep needs at least one method");
  require(!k_grid.empty() && !eta_grid.empty(), Errc::InvalidArgument, "sweep grids must be nonempty");
  require(trials >= 1, Errc::InvalidArgument, "trials must be >= 1");
  require(m >= 1 && n >= 1, Errc::InvalidArgument, "problem dimensions must be positive");
  require(r >= 0.0 && r < 1.0, Errc::BadCorrelation, "correlation r must lie in [0, 1)");
  require(dynamic_range >= 0.0, Errc::InvalidArgument, "dynamic range must be nonnegative");
  for (Index k : k_grid) require(k >= 1 && k <= n, Errc::BadK, "every k must satisfy 1 <= k <= n");
  for (double e : eta_grid) require(e >= 0.0 && std::isfinite(e), Errc::InvalidArgument, "eta must be >= 0");
  require(lambda_lo > 0.0 && lambda_hi >= lambda_lo && lambda_points >= 1, Errc::InvalidArgument,
          "lambda grid needs 0 < lo <= hi and at least one point");
  require(threads >= 1, Errc::InvalidArgument, "threads must be >= 1");
  schedule.validate();
  qn.validate();
}

std::vector<TrialOutcome> run_trial(const SweepConfig& cfg, Index k, double eta, int trial) {
  const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(trial);
  const Matrix a = correlated_gaussian_matrix({cfg.m, cfg.n, cfg.r, derive_seed(seed, kMatrixStream)});
  const Vector x_star = sparse_signal({cfg.n, k, cfg.dynamic_range, derive_seed(seed, kSignalStream)});
  const Vector clean = a * x_star;
  const Vector b = add_noise(clean, eta, derive_seed(seed, kNoiseStream)).noisy;

  const double sigma = solvers::spectral_norm(a);
  const double step = 1.0 / (sigma * sigma);
  const auto error_fn = [&](const Vector& x) { return relative_error(x, x_star); };

  std::vector<TrialOutcome> out;
  out.reserve(cfg.methods.size());
  for (Method method : cfg.methods) {
    TrialOutcome o;
    o.method = method;
    o.k = k;
    o.eta = eta;
    o.trial = trial;
    o.seed = seed;
    o.best_lambda = std::numeric_limits<double>::quiet_NaN();
    const double start = cfg.record_timing ? now_seconds() : 0.0;
    try {
      std::function<solvers::SolveResult(double)> solve;
      switch (method) {
        case Method::Entropy:
          solve = [&](double lambda) {
            surrogates::SurrogateSpec spec;
            spec.kind = surrogates::Kind::EntropyU;
            return solvers::solve_entropy({a, b, lambda, spec}, cfg.schedule, cfg.qn);
          };
          break;
        case Method::Ista:
          solve = [&](double lambda) {
            solvers::IstaConfig ista = cfg.ista;
            ista.step = step;
            return solvers::solve_ista(a, b, lambda, ista);
          };
          break;
        case Method::Irl1:
          solve = [&](double lambda) {
            solvers::Irl1Config irl1 = cfg.irl1;
            irl1.inner.step = step;
            return solvers::solve_irl1(a, b, lambda, irl1);
          };
          break;
        case Method::Iht: break;
      }
      if (method == Method::Iht) {
        solvers::IhtConfig iht = cfg.iht;
        iht.step = step;
        o.rel_error = error_fn(solvers::solve_iht(a, b, k, iht).x_hat);
      } else {
        const auto grid = solvers::lambda_grid_search(solve, cfg.lambda_lo, cfg.lambda_hi, cfg.lambda_points, error_fn);
        o.rel_error = grid.best_error;
        o.best_lambda = grid.best_lambda;
      }
      o.success = o.rel_error <= kSuccessThreshold;
    } catch (const std::exception& e) {
      o.failed = true;
      o.failure = e.what();
      o.success = false;
      o.rel_error = std::numeric_limits<double>::quiet_NaN();
    }
    if (cfg.record_timing) o.wall_time = now_seconds() - start;
    out.push_back(std::move(o));
  }
  return out;
}

SweepResult success_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const std::size_t nk = cfg.k_grid.size(), ne = cfg.eta_grid.size(), nt = static_cast<std::size_t>(cfg.trials);
  const std::size_t tasks = nk * ne * nt;
  std::vector<std::vector<TrialOutcome>> per_task(tasks);

  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  const auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t trial = t % nt, ie = (t / nt) % ne, ik = t / (nt * ne);
      try {
        per_task[t] = run_trial(cfg, cfg.k_grid[ik], cfg.eta_grid[ie], static_cast<int>(trial));
      } catch (...) {
        std::lock_guard<std::mutex> lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  const int nthreads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), tasks));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  SweepResult result;
  result.outcomes.reserve(cfg.methods.size() * tasks);
  for (std::size_t im = 0; im < cfg.methods.size(); ++im) {
    for (std::size_t ik = 0; ik < nk; ++ik) {
      for (std::size_t ie = 0; ie < ne; ++ie) {
        SweepCell cell;
        cell.method = cfg.methods[im];
        cell.k = cfg.k_grid[ik];
        cell.eta = cfg.eta_grid[ie];
        for (std::size_t trial = 0; trial < nt; ++trial) {
          const TrialOutcome& o = per_task[(ik * ne + ie) * nt + trial][im];
          result.outcomes.push_back(o);
          ++cell.trials;
          cell.successes += o.success ? 1 : 0;
        }
        cell.success_rate = static_cast<double>(cell.successes) / static_cast<double>(cell.trials);
        result.cells.push_back(cell);
      }
    }
  }
  return result;
}

void write_trials_csv(const SweepResult& result, std::ostream& out) {
  out << "method,k,eta,trial,seed,rel_error,success,best_lambda,wall_time_s\n";
  for (const auto& o : result.outcomes) {
    out << to_string(o.method) << ',' << o.k << ',' << io::format_double(o.eta) << ',' << o.trial << ',' << o.seed
        << ',' << io::format_double(o.rel_error) << ',' << (o.success ? 1 : 0) << ','
        << io::format_double(o.best_lambda) << ',' << io::format_double(o.wall_time) << '\n';
  }
}

void write_summary_csv(const SweepResult& result, std::ostream& out) {
  out << "method,k,eta,success_rate\n";
  for (const auto& c : result.cells) {
    out << to_string(c.method) << ',' << c.k << ',' << io::format_double(c.eta) << ','
        << io::format_double(c.success_rate) << '\n';
  }
}

}  // namespace enz::sensing
