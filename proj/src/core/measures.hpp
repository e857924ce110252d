#pragma once

#include "types.hpp"

#include <limits>
#include <utility>
#include <vector>

namespace enz::measures {

inline constexpr double kInfiniteOrder = std::numeric_limits<double>::infinity();

/// pi_i = |x_i| / ||x||_1 together with the support it lives on.
struct MagnitudeDistribution {
  Vector probs;
  std::vector<Index> support;
  double source_l1 = 0.0;
};

struct ShannonEnz {
  double entropy_bits = 0.0;
  double enz = 1.0;
};

/// ENZ = ||x||_0 * 2^-divergence, with entropy = log2 ||x||_0 - divergence.
struct DecompositionReport {
  std::int64_t l0 = 0;
  double entropy_bits = 0.0;
  double divergence_bits = 0.0;
  double enz = 1.0;
  double efficiency = 1.0;
};

struct HierarchyProfile {
  std::int64_t l0 = 0;
  double enz_shannon = 0.0;
  double enz_renyi2 = 0.0;
  double enz_renyi_inf = 0.0;
  std::vector<std::pair<double, double>> renyi_curve;
};

/// Throws Errc::ZeroVector when every entry is exactly zero.
MagnitudeDistribution normalize_magnitudes(const VectorRef& x);

ShannonEnz shannon_enz(const VectorRef& x);

/// Renyi ENZ of order alpha >= 0. alpha = 0 gives ||x||_0, alpha = 1 the
/// Shannon ENZ and alpha = +inf the ratio ||x||_1 / ||x||_inf.
double renyi_enz(const VectorRef& x, double alpha);

/// Renyi entropy in bits (Shannon entropy at alpha = 1).
double renyi_entropy_bits(const VectorRef& x, double alpha);

/// Entropy/divergence split against the uniform law on supp(x). alpha = 1 is
/// the Shannon/KL case; other orders use the Renyi divergence.
DecompositionReport decompose(const VectorRef& x, double alpha = 1.0);

/// ENZ along an ascending alpha grid plus the landmark orders 1, 2 and inf.
HierarchyProfile hierarchy(const VectorRef& x, const std::vector<double>& alpha_grid);

std::int64_t count_nonzeros(const VectorRef& x);

}  // namespace enz::measures
