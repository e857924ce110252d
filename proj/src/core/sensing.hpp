#pragma once

#include "solvers.hpp"
#include "types.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace enz::sensing {

/// A trial succeeds when the relative reconstruction error is at most this.
inline constexpr double kSuccessThreshold = 0.05;

/// Rows of A are i.i.d. N(0, Sigma) with Sigma = (1 - r) I + r 11^T.
struct SensingConfig {
  Index m = 64;
  Index n = 512;
  double r = 0.1;
  std::uint64_t seed = 0;
};

/// k-sparse ground truth whose nonzero magnitudes span exactly
/// dynamic_range decades (log10 max/min).
struct SignalConfig {
  Index n = 512;
  Index k = 8;
  double dynamic_range = 3.0;
  std::uint64_t seed = 0;
};

enum class Method { Entropy, Ista, Iht, Irl1 };

const char* to_string(Method m);
Method parse_method(const std::string& name);

struct TrialOutcome {
  Method method = Method::Entropy;
  Index k = 0;
  double eta = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  double rel_error = 0.0;
  bool success = false;
  double best_lambda = 0.0;  // NaN for methods without a lambda (IHT)
  double wall_time = 0.0;
  bool failed = false;
  std::string failure;
};

Matrix correlated_gaussian_matrix(const SensingConfig& cfg);

Vector sparse_signal(const SignalConfig& cfg);

struct NoisyObservation {
  Vector noisy;
  Vector noise;
};

/// Gaussian noise direction rescaled so ||noise||_2 = eta ||clean||_2.
NoisyObservation add_noise(const VectorRef& clean, double eta, std::uint64_t seed);

double relative_error(const VectorRef& x_hat, const VectorRef& x_star);

struct SweepConfig {
  std::vector<Method> methods{Method::Entropy, Method::Ista, Method::Iht, Method::Irl1};
  std::vector<Index> k_grid{2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30, 32};
  std::vector<double> eta_grid{0.01, 0.02, 0.03};
  int trials = 50;
  std::uint64_t base_seed = 0;
  Index m = 64;
  Index n = 512;
  double r = 0.1;
  double dynamic_range = 3.0;
  double lambda_lo = 1e-3;
  double lambda_hi = 1e5;
  int lambda_points = 17;
  solvers::ContinuationSchedule schedule{};
  solvers::QuasiNewtonConfig qn{};
  solvers::IstaConfig ista{};
  solvers::IhtConfig iht{};
  solvers::Irl1Config irl1{};
  int threads = 1;
  // Wall times are nondeterministic; when false the column is written as 0
  // so that sweep output is reproducible byte for byte.
  bool record_timing = false;

  void validate() const;
};

struct SweepCell {
  Method method = Method::Entropy;
  Index k = 0;
  double eta = 0.0;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
};

struct SweepResult {
  std::vector<TrialOutcome> outcomes;  // ordered by (method, k, eta, trial)
  std::vector<SweepCell> cells;        // ordered by (method, k, eta)
};

/// Runs one Monte Carlo trial for every configured method: builds (A, x*, b)
/// from the trial seed base_seed + trial and tunes lambda by oracle error.
std::vector<TrialOutcome> run_trial(const SweepConfig& cfg, Index k, double eta, int trial);

SweepResult success_sweep(const SweepConfig& cfg);

/// `method,k,eta,trial,seed,rel_error,success,best_lambda,wall_time_s`
void write_trials_csv(const SweepResult& result, std::ostream& out);

/// `method,k,eta,success_rate`
void write_summary_csv(const SweepResult& result, std::ostream& out);

}  // namespace enz::sensing
