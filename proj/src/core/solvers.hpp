#pragma once

#include "optim.hpp"
#include "surrogates.hpp"
#include "types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace enz::solvers {

using optim::QuasiNewtonConfig;
using surrogates::SurrogateSpec;

/// J(x) = 1/2 ||Ax - b||^2 + lambda R(x). The matrix and data are borrowed.
struct RecoveryProblem {
  const Matrix& a;
  const Vector& b;
  double lambda;
  SurrogateSpec surrogate;
};

/// Smoothing schedule eps_j = eps0 * decay^j for j < stages, run inside every
/// outer rescaling step; the outer loop stops once C moves by less than
/// outer_c_tol (relative).
struct ContinuationSchedule {
  double eps0 = 1e-2;
  double decay = 0.1;
  int stages = 6;
  double outer_c_tol = 1e-3;
  int max_outer = 20;

  void validate() const;
};

enum class SolveStatus { Converged, MaxIterations, ZeroIterate };

struct SolveResult {
  Vector x_hat;
  std::vector<double> objective_trace;
  // Start offsets into objective_trace of each block over which the trace
  // must be nonincreasing (one per inner stage; a single block for ISTA/IHT).
  std::vector<std::size_t> stage_offsets;
  std::vector<double> c_trace;
  int inner_iterations = 0;
  bool converged = false;
  SolveStatus status = SolveStatus::MaxIterations;
  int line_search_failures = 0;
};

struct IstaConfig {
  double step = 0.0;  // <= 0 selects 1 / sigma_max(A)^2
  int max_iters = 5000;
  double tol = 1e-7;
};

struct IhtConfig {
  double step = 0.0;  // <= 0 selects 1 / sigma_max(A)^2
  int max_iters = 3000;
  double tol = 1e-9;
};

struct Irl1Config {
  double eps_w = 0.1;
  int rounds = 10;
  IstaConfig inner{};
};

/// Generic smooth minimizer (limited-memory BFGS with a strong Wolfe search).
Vector minimize_smooth(const optim::Oracle& oracle, const Vector& x0, const QuasiNewtonConfig& cfg);

/// Entropy-regularized recovery: frozen-C outer loop around eps-continuation
/// inner solves. surrogate.kind must be EntropyU or RenyiU. lambda = 0 is
/// accepted and reduces to least squares.
SolveResult solve_entropy(const RecoveryProblem& problem, const ContinuationSchedule& schedule,
                          const QuasiNewtonConfig& cfg, const Vector& x0);
SolveResult solve_entropy(const RecoveryProblem& problem, const ContinuationSchedule& schedule,
                          const QuasiNewtonConfig& cfg);

/// Proximal gradient for 1/2||Ax-b||^2 + lambda sum_i weights_i |x_i|.
SolveResult solve_weighted_ista(const Matrix& a, const Vector& b, const Vector& weights, double lambda,
                                const IstaConfig& cfg, const Vector& x0);

SolveResult solve_ista(const Matrix& a, const Vector& b, double lambda, const IstaConfig& cfg);
SolveResult solve_ista(const Matrix& a, const Vector& b, double lambda, const IstaConfig& cfg, const Vector& x0);

/// Iterative hard thresholding, starting from x0 = 0 unless given.
SolveResult solve_iht(const Matrix& a, const Vector& b, Index k, const IhtConfig& cfg);
SolveResult solve_iht(const Matrix& a, const Vector& b, Index k, const IhtConfig& cfg, const Vector& x0);

/// Reweighted l1 for the log-sum penalty. objective_trace holds the log-sum
/// objective 1/2||Ax-b||^2 + lambda sum log(|x_i| + eps_w) after each round.
SolveResult solve_irl1(const Matrix& a, const Vector& b, double lambda, const Irl1Config& cfg);

/// Largest singular value by power iteration on A^T A.
double spectral_norm(const Matrix& a);

struct GridSearchResult {
  double best_lambda = 0.0;
  double best_error = 0.0;
  SolveResult best;
  std::vector<double> lambdas;
  std::vector<double> errors;  // +inf where the solver threw
};

std::vector<double> log_grid(double lo, double hi, int points);

/// Evaluates `solve` on a log-uniform grid and keeps the lambda with the
/// smallest error_fn(x_hat); ties keep the smaller lambda.
GridSearchResult lambda_grid_search(const std::function<SolveResult(double)>& solve, double lo, double hi,
                                    int points, const std::function<double(const Vector&)>& error_fn);

const char* to_string(SolveStatus s);

}  // namespace enz::solvers
