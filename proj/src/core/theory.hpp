#pragma once

#include "types.hpp"

#include <cstdint>
#include <ostream>
#include <vector>

namespace enz::theory {

enum class RipMethod { Exhaustive, Sampled };

struct RipEstimate {
  Index order = 0;
  double delta = 0.0;
  RipMethod method = RipMethod::Exhaustive;
  std::uint64_t supports = 0;  // supports enumerated or sampled
  bool is_lower_bound = false;
  std::vector<Index> worst_support;
};

inline constexpr std::uint64_t kDefaultRipBudget = 1'000'000;

/// Number of size-k subsets of n items, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// delta_s = max over |T| = s of max(sigma_max(A_T)^2 - 1, 1 - sigma_min(A_T)^2).
/// Exact when C(n, s) <= budget, otherwise the maximum over `budget` random
/// supports (a lower bound). A is used as given, without column scaling.
RipEstimate estimate_rip_constant(const Matrix& a, Index s, std::uint64_t budget = kDefaultRipBudget,
                                  std::uint64_t seed = 0, int threads = 1);

/// delta of one support (columns listed in `support`).
double support_delta(const Matrix& a, const std::vector<Index>& support);

struct Prop1Report {
  int lower_checks = 0;
  int lower_violations = 0;
  double min_sigma = 0.0;  // smallest sigma_min(A_T) seen
  int cross_checks = 0;
  int cross_violations = 0;
  double max_cross_ratio = 0.0;  // largest |<Au, Av>| / (||u|| ||v||) seen
  int violations() const { return lower_violations + cross_violations; }
};

/// Checks sigma_min(A_T) >= sqrt(1 - delta) on random supports of size s and
/// |<Au, Av>| <= delta ||u|| ||v|| on random disjoint support pairs with total
/// size <= s. Each pair is tested at its worst-case (u, v), the top singular
/// pair of A_U^T A_V.
Prop1Report check_prop1(const Matrix& a, Index s, double delta, int trials, std::uint64_t seed);

struct StabilityInputs {
  Index n = 0;
  Index k = 0;
  double delta_2k = 0.0;
  double eps_x = 0.0;
  double eps_y = 0.0;
  double e_norm = 0.0;
};

struct StabilityBounds {
  double bound_hT = 0.0;
  double bound_effective = 0.0;
};

/// Right-hand sides of the noisy stability bounds for ||h_T|| and
/// ||x_{S_x} - y_{S_y}||. Requires 0 < delta_2k < 1 and 2k <= n.
StabilityBounds stability_bound(const StabilityInputs& inp);

struct StabilityReport {
  double lhs_hT = 0.0;
  double bound_hT = 0.0;
  double lhs_eff = 0.0;
  double bound_eff = 0.0;
  double delta = 0.0;
  double eps_x = 0.0;
  double eps_y = 0.0;
  double e_norm = 0.0;
  bool holds_hT = false;
  bool holds_eff = false;
  bool holds() const { return holds_hT && holds_eff; }
  double margin_hT() const { return bound_hT - lhs_hT; }
  double margin_eff() const { return bound_eff - lhs_eff; }
};

/// Evaluates both sides for the pair (x, y) with e = A(y - x) and the true
/// top-k tails. delta_2k = 0 (an exact isometry) is accepted as the limit of
/// the bound. Throws DeltaUnavailable unless 0 <= delta_2k < 1.
StabilityReport verify_stability(const Matrix& a, const VectorRef& x, const VectorRef& y, Index k, double delta_2k);

/// Same, with delta_2k computed exhaustively (budget permitting).
StabilityReport verify_stability(const Matrix& a, const VectorRef& x, const VectorRef& y, Index k,
                                 std::uint64_t budget = kDefaultRipBudget, int threads = 1);

enum class Ensemble {
  OrthonormalBases,  // columns drawn from concatenated random orthonormal bases of R^m
  Gaussian,          // i.i.d. N(0, 1/m)
};

struct InstanceConfig {
  Index m = 20;
  Index n = 40;
  Index k = 3;
  Ensemble ensemble = Ensemble::OrthonormalBases;
  bool normalize_columns = false;
  double tail_scale = 1e-2;    // std of the off-support entries
  double perturbation = 0.1;   // relative std of the dominant-entry change between x and y
};

Matrix random_matrix(const InstanceConfig& cfg, std::uint64_t seed);

/// Scales every nonzero column to unit l2 norm.
Matrix normalize_columns(const Matrix& a);

struct SignalPair {
  Vector x;
  Vector y;
};

/// x: k dominant N(0,1) entries plus a dense small tail. y: the same dominant
/// entries perturbed (one support index swapped) plus an independent tail.
SignalPair random_signal_pair(const InstanceConfig& cfg, std::uint64_t seed);

struct StabilityBatchConfig {
  InstanceConfig instance{};
  int instances = 200;
  int matrices = 0;  // distinct matrices drawn; 0 draws one per instance
  std::uint64_t budget = 5'000'000;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct StabilityBatch {
  std::vector<StabilityReport> reports;
  std::vector<RipEstimate> estimates;  // one per distinct matrix
  int skipped = 0;                     // instances whose delta_2k >= 1
};

/// Draws instances, computes delta_2k exhaustively per matrix and verifies
/// both bounds. Instances with delta_2k >= 1 are counted in `skipped`.
StabilityBatch run_stability_batch(const StabilityBatchConfig& cfg);

/// `lhs_hT,bound_hT,lhs_eff,bound_eff,delta,holds`
void write_stability_csv(const std::vector<StabilityReport>& reports, std::ostream& out);

const char* to_string(RipMethod m);
const char* to_string(Ensemble e);

}  // namespace enz::theory
