#include "solvers.hpp"

#include "random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace enz::solvers {

namespace {

void check_system(const Matrix& a, const Vector& b) {
  require(a.rows() == b.size(), Errc::DimensionMismatch, "A rows must match b length");
  require(a.cols() > 0 && a.rows() > 0, Errc::DimensionMismatch, "A must be non-empty");
}

double resolve_step(const Matrix& a, double step) {
  if (step > 0.0) return step;
  const double sigma = spectral_norm(a);
  require(sigma > 0.0, Errc::InvalidArgument, "A must be nonzero");
  return 1.0 / (sigma * sigma);
}

double scale_of(const Vector& x, const SurrogateSpec& spec) {
  switch (spec.scale_policy) {
    case surrogates::ScalePolicy::Fixed: return spec.fixed_scale;
    case surrogates::ScalePolicy::L2OfIterate: return x.norm();
    case surrogates::ScalePolicy::L1OfIterate: return x.lpNorm<1>();
  }
  return 0.0;
}

surrogates::ValueGrad regularizer(const Vector& x, const SurrogateSpec& spec, double scale, double eps) {
  if (spec.kind == surrogates::Kind::RenyiU)
    return surrogates::smoothed_renyi_value_grad(x, scale, spec.alpha, eps, true);
  return surrogates::smoothed_entropy_value_grad(x, scale, eps, true);
}

}  // namespace

void ContinuationSchedule::validate() const {
  require(eps0 > 0.0, Errc::NonPositiveEps, "eps0 must be positive");
  require(decay > 0.0 && decay < 1.0, Errc::InvalidArgument, "decay must lie in (0, 1)");
  require(stages >= 1, Errc::InvalidArgument, "stages must be >= 1");
  require(outer_c_tol > 0.0, Errc::InvalidArgument, "outer_c_tol must be positive");
  require(max_outer >= 1, Errc::InvalidArgument, "max_outer must be >= 1");
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::ZeroIterate: return "zero_iterate";
  }
  return "unknown";
}

Vector minimize_smooth(const optim::Oracle& oracle, const Vector& x0, const QuasiNewtonConfig& cfg) {
  return optim::minimize_smooth(oracle, x0, cfg).x;
}

SolveResult solve_entropy(const RecoveryProblem& problem, const ContinuationSchedule& schedule,
                          const QuasiNewtonConfig& cfg) {
  return solve_entropy(problem, schedule, cfg, problem.a.transpose() * problem.b);
}

SolveResult solve_entropy(const RecoveryProblem& problem, const ContinuationSchedule& schedule,
                          const QuasiNewtonConfig& cfg, const Vector& x0) {
  const Matrix& a = problem.a;
  const Vector& b = problem.b;
  check_system(a, b);
  require(x0.size() == a.cols(), Errc::DimensionMismatch, "x0 length must match A columns");
  require(problem.lambda >= 0.0 && std::isfinite(problem.lambda), Errc::InvalidArgument, "lambda must be >= 0");
  require(problem.surrogate.kind == surrogates::Kind::EntropyU || problem.surrogate.kind == surrogates::Kind::RenyiU,
          Errc::InvalidArgument, "solve_entropy needs an entropy_u or renyi_u surrogate");
  problem.surrogate.validate();
  schedule.validate();
  cfg.validate();

  SolveResult result;
  Vector x = x0;
  double scale = scale_of(x, problem.surrogate);
  require(scale > 0.0, Errc::ZeroIterate, "initial iterate gives a zero scale C");

  const double lambda = problem.lambda;
  Vector residual(a.rows());
  for (int outer = 0; outer < schedule.max_outer; ++outer) {
    result.c_trace.push_back(scale);
    double eps = schedule.eps0;
    for (int stage = 0; stage < schedule.stages; ++stage, eps *= schedule.decay) {
      auto oracle = [&](const Vector& v, Vector& grad) {
        residual.noalias() = a * v - b;
        const surrogates::ValueGrad reg = regularizer(v, problem.surrogate, scale, eps);
        grad.noalias() = a.transpose() * residual;
        grad += lambda * reg.grad;
        return 0.5 * residual.squaredNorm() + lambda * reg.value;
      };
      const optim::MinimizeResult inner = optim::minimize_smooth(oracle, x, cfg);
      result.stage_offsets.push_back(result.objective_trace.size());
      result.objective_trace.insert(result.objective_trace.end(), inner.trace.begin(), inner.trace.end());
      result.inner_iterations += inner.iterations;
      result.line_search_failures += inner.status == optim::Status::LineSearchFailure;
      x = inner.x;
    }

    const double next = scale_of(x, problem.surrogate);
    if (!(next > 0.0)) {
      result.status = SolveStatus::ZeroIterate;
      break;
    }
    if (std::abs(next - scale) <= schedule.outer_c_tol * std::min(next, scale)) {
      result.status = SolveStatus::Converged;
      result.c_trace.push_back(next);
      break;
    }
    scale = next;
  }
  result.converged = result.status == SolveStatus::Converged;
  result.x_hat = std::move(x);
  return result;
}

SolveResult solve_weighted_ista(const Matrix& a, const Vector& b, const Vector& weights, double lambda,
                                const IstaConfig& cfg, const Vector& x0) {
  check_system(a, b);
  require(weights.size() == a.cols() && x0.size() == a.cols(), Errc::DimensionMismatch,
          "weights and x0 must match A columns");
  require(lambda >= 0.0, Errc::InvalidArgument, "lambda must be >= 0");
  const double step = resolve_step(a, cfg.step);
  const Vector thresholds = step * lambda * weights;

  SolveResult result;
  result.stage_offsets.push_back(0);
  Vector x = x0;
  Vector residual = a * x - b;
  auto objective = [&](const Vector& v, const Vector& r) {
    return 0.5 * r.squaredNorm() + lambda * weights.cwiseProduct(v.cwiseAbs()).sum();
  };
  result.objective_trace.push_back(objective(x, residual));
  for (int it = 0; it < cfg.max_iters; ++it) {
    Vector next = x - step * (a.transpose() * residual);
    for (Index i = 0; i < next.size(); ++i) next[i] = surrogates::soft_threshold(next[i], thresholds[i]);
    const double moved = (next - x).norm();
    const double ref = std::max(1.0, x.norm());
    x = std::move(next);
    residual.noalias() = a * x - b;
    result.objective_trace.push_back(objective(x, residual));
    ++result.inner_iterations;
    if (moved <= cfg.tol * ref) {
      result.status = SolveStatus::Converged;
      break;
    }
  }
  result.converged = result.status == SolveStatus::Converged;
  result.x_hat = std::move(x);
  return result;
}

SolveResult solve_ista(const Matrix& a, const Vector& b, double lambda, const IstaConfig& cfg) {
  check_system(a, b);
  return solve_ista(a, b, lambda, cfg, a.transpose() * b);
}

SolveResult solve_ista(const Matrix& a, const Vector& b, double lambda, const IstaConfig& cfg, const Vector& x0) {
  return solve_weighted_ista(a, b, Vector::Ones(a.cols()), lambda, cfg, x0);
}

SolveResult solve_iht(const Matrix& a, const Vector& b, Index k, const IhtConfig& cfg) {
  return solve_iht(a, b, k, cfg, Vector::Zero(a.cols()));
}

SolveResult solve_iht(const Matrix& a, const Vector& b, Index k, const IhtConfig& cfg, const Vector& x0) {
  check_system(a, b);
  require(k >= 1 && k <= a.cols(), Errc::BadK, "IHT sparsity k must lie in [1, n]");
  require(x0.size() == a.cols(), Errc::DimensionMismatch, "x0 length must match A columns");
  const double step = resolve_step(a, cfg.step);

  SolveResult result;
  result.stage_offsets.push_back(0);
  Vector x = x0;
  Vector residual = a * x - b;
  result.objective_trace.push_back(0.5 * residual.squaredNorm());
  for (int it = 0; it < cfg.max_iters; ++it) {
    Vector next = surrogates::hard_threshold_topk(x - step * (a.transpose() * residual), k);
    const double moved = (next - x).norm();
    const double ref = std::max(1.0, x.norm());
    x = std::move(next);
    residual.noalias() = a * x - b;
    result.objective_trace.push_back(0.5 * residual.squaredNorm());
    ++result.inner_iterations;
    if (moved <= cfg.tol * ref) {
      result.status = SolveStatus::Converged;
      break;
    }
  }
  result.converged = result.status == SolveStatus::Converged;
  result.x_hat = std::move(x);
  return result;
}

SolveResult solve_irl1(const Matrix& a, const Vector& b, double lambda, const Irl1Config& cfg) {
  check_system(a, b);
  require(cfg.rounds >= 1, Errc::InvalidArgument, "IRL1 needs at least one round");
  require(cfg.eps_w > 0.0, Errc::InvalidArgument, "eps_w must be positive");
  IstaConfig inner = cfg.inner;
  inner.step = resolve_step(a, inner.step);

  SolveResult result;
  result.stage_offsets.push_back(0);
  Vector x = a.transpose() * b;
  Vector weights = surrogates::logsum_weights(Vector::Zero(a.cols()), cfg.eps_w);
  auto objective = [&](const Vector& v) {
    double penalty = 0.0;
    for (Index i = 0; i < v.size(); ++i) penalty += std::log(std::abs(v[i]) + cfg.eps_w);
    return 0.5 * (a * v - b).squaredNorm() + lambda * penalty;
  };
  bool all_converged = true;
  for (int round = 0; round < cfg.rounds; ++round) {
    SolveResult step = solve_weighted_ista(a, b, weights, lambda, inner, x);
    result.inner_iterations += step.inner_iterations;
    all_converged = all_converged && step.converged;
    x = std::move(step.x_hat);
    result.objective_trace.push_back(objective(x));
    weights = surrogates::logsum_weights(x, cfg.eps_w);
  }
  result.status = all_converged ? SolveStatus::Converged : SolveStatus::MaxIterations;
  result.converged = all_converged;
  result.x_hat = std::move(x);
  return result;
}

double spectral_norm(const Matrix& a) {
  require(a.size() > 0, Errc::InvalidArgument, "empty matrix");
  Rng rng(0x5EC7'0A11ULL);
  Vector v(a.cols());
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < 100000; ++it) {
    Vector w = a.transpose() * (a * v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double rayleigh = v.dot(w);
    v = w / norm;
    if (it > 0 && std::abs(rayleigh - estimate) <= 1e-15 * rayleigh) {
      estimate = rayleigh;
      break;
    }
    estimate = rayleigh;
  }
  return std::sqrt(estimate);
}

std::vector<double> log_grid(double lo, double hi, int points) {
  require(lo > 0.0 && lo < hi, Errc::InvalidArgument, "grid needs 0 < lo < hi");
  require(points >= 2, Errc::InvalidArgument, "grid needs at least two points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double llo = std::log10(lo), lhi = std::log10(hi);
  for (int j = 0; j < points; ++j) grid[j] = std::pow(10.0, llo + (lhi - llo) * j / (points - 1));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

GridSearchResult lambda_grid_search(const std::function<SolveResult(double)>& solve, double lo, double hi,
                                    int points, const std::function<double(const Vector&)>& error_fn) {
  GridSearchResult out;
  out.lambdas = log_grid(lo, hi, points);
  out.best_error = std::numeric_limits<double>::infinity();
  bool found = false;
  std::string last_failure;
  for (double lambda : out.lambdas) {
    double err = std::numeric_limits<double>::infinity();
    try {
      SolveResult r = solve(lambda);
      err = error_fn(r.x_hat);
      if (std::isnan(err)) err = std::numeric_limits<double>::infinity();
      if (!found || err < out.best_error) {
        out.best_error = err;
        out.best_lambda = lambda;
        out.best = std::move(r);
        found = true;
      }
    } catch (const Error& e) {
      last_failure = e.what();
    }
    out.errors.push_back(err);
  }
  if (!found) throw Error(Errc::InvalidArgument, "every grid point failed: " + last_failure);
  return out;
}

}  // namespace enz::solvers
