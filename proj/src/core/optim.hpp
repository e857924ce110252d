#pragma once

#include "types.hpp"

#include <functional>
#include <vector>

namespace enz::optim {

/// Limited-memory BFGS settings. The line search enforces the strong Wolfe
/// conditions with constants (wolfe_c1, wolfe_c2).
struct QuasiNewtonConfig {
  int memory = 10;
  double grad_tol = 1e-8;
  int max_inner_iters = 500;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search = 40;
  // Stop once an accepted step lowers f by less than rel_decrease_tol * max(1, |f|).
  // Zero disables the test.
  double rel_decrease_tol = 0.0;

  void validate() const;
};

enum class Status { Converged, MaxIterations, LineSearchFailure, Stalled };

/// Returns f(x) and writes grad f(x) into `grad` (already sized to x).
using Oracle = std::function<double(const Vector& x, Vector& grad)>;

struct MinimizeResult {
  Vector x;
  double value = 0.0;
  double grad_inf = 0.0;
  int iterations = 0;
  int evaluations = 0;
  Status status = Status::MaxIterations;
  std::vector<double> trace;       // f after every accepted iterate, f(x0) first
  std::vector<double> grad_trace;  // ||grad||_2 alongside `trace`
};

/// Minimizes a smooth function from x0. Throws NonFiniteObjective if f(x0) or
/// its gradient is not finite; a failed line search ends the run with
/// Status::LineSearchFailure and the best iterate found so far.
MinimizeResult minimize_smooth(const Oracle& oracle, const Vector& x0, const QuasiNewtonConfig& cfg);

const char* to_string(Status s);

}  // namespace enz::optim
