#include "measures.hpp"

#include <algorithm>
#include <cmath>

namespace enz::measures {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

/// Log-probabilities of the normalized magnitudes over the support. Computed
/// as log|x_i| - log||x||_1 so that tiny entries never underflow to -inf.
struct LogSupport {
  std::vector<double> log_probs;
  std::vector<double> probs;
  double l1 = 0.0;
};

LogSupport log_support(const VectorRef& x) {
  LogSupport out;
  double l1 = 0.0;
  for (Index i = 0; i < x.size(); ++i) l1 += std::abs(x[i]);
  require(l1 > 0.0, Errc::ZeroVector, "ENZ is undefined on the zero vector");
  require(std::isfinite(l1), Errc::InvalidArgument, "vector has non-finite entries");
  const double log_l1 = std::log(l1);
  for (Index i = 0; i < x.size(); ++i) {
    const double a = std::abs(x[i]);
    if (a == 0.0) continue;
    out.log_probs.push_back(std::log(a) - log_l1);
    out.probs.push_back(a / l1);
  }
  out.l1 = l1;
  return out;
}

double log_sum_exp(const std::vector<double>& terms) {
  const double peak = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - peak);
  return peak + std::log(acc);
}

/// ln sum_i pi_i^alpha over the support.
double log_power_sum(const LogSupport& s, double alpha) {
  const double t = alpha - 1.0;
  if (std::abs(t) < 0.5) {
    // sum pi^alpha = 1 + sum pi (pi^t - 1); expm1/log1p keep the small
    // exponent accurate where the direct sum would cancel.
    double worst = 0.0;
    for (double lp : s.log_probs) worst = std::max(worst, std::abs(t * lp));
    if (worst < 700.0) {
      double acc = 0.0;
      for (std::size_t i = 0; i < s.probs.size(); ++i) acc += s.probs[i] * std::expm1(t * s.log_probs[i]);
      return std::log1p(acc);
    }
  }
  std::vector<double> terms(s.log_probs.size());
  for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = alpha * s.log_probs[i];
  return log_sum_exp(terms);
}

double shannon_nats(const LogSupport& s) {
  double h = 0.0;
  for (std::size_t i = 0; i < s.probs.size(); ++i) h -= s.probs[i] * s.log_probs[i];
  return std::max(h, 0.0);
}

double max_log_prob(const LogSupport& s) {
  return *std::max_element(s.log_probs.begin(), s.log_probs.end());
}

void check_order(double alpha) {
  require(!std::isnan(alpha) && alpha >= 0.0, Errc::InvalidArgument, "Renyi order must be >= 0");
}

/// Renyi entropy in nats, dispatching the limit orders explicitly.
double renyi_nats(const LogSupport& s, double alpha) {
  if (alpha == 0.0) return std::log(static_cast<double>(s.probs.size()));
  if (alpha == 1.0) return shannon_nats(s);
  if (std::isinf(alpha)) return -max_log_prob(s);
  return log_power_sum(s, alpha) / (1.0 - alpha);
}

}  // namespace

std::int64_t count_nonzeros(const VectorRef& x) {
  std::int64_t n = 0;
  for (Index i = 0; i < x.size(); ++i) n += (x[i] != 0.0);
  return n;
}

MagnitudeDistribution normalize_magnitudes(const VectorRef& x) {
  double l1 = 0.0;
  for (Index i = 0; i < x.size(); ++i) l1 += std::abs(x[i]);
  require(l1 > 0.0, Errc::ZeroVector, "ENZ is undefined on the zero vector");
  MagnitudeDistribution d;
  d.source_l1 = l1;
  d.probs = x.cwiseAbs() / l1;
  for (Index i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) d.support.push_back(i);
  return d;
}

ShannonEnz shannon_enz(const VectorRef& x) {
  const LogSupport s = log_support(x);
  const double h = shannon_nats(s);
  return {h / kLn2, std::exp(h)};
}

double renyi_entropy_bits(const VectorRef& x, double alpha) {
  check_order(alpha);
  return renyi_nats(log_support(x), alpha) / kLn2;
}

double renyi_enz(const VectorRef& x, double alpha) {
  check_order(alpha);
  const LogSupport s = log_support(x);
  if (alpha == 0.0) return static_cast<double>(s.probs.size());
  if (std::isinf(alpha)) return s.l1 / x.cwiseAbs().maxCoeff();
  return std::exp(renyi_nats(s, alpha));
}

DecompositionReport decompose(const VectorRef& x, double alpha) {
  check_order(alpha);
  const LogSupport s = log_support(x);
  const auto l0 = static_cast<std::int64_t>(s.probs.size());
  const double log_l0 = std::log(static_cast<double>(l0));

  // The divergence is evaluated from its own definition, never as
  // log2(l0) - entropy, so the identity between the two is a real check.
  double divergence_nats = 0.0;
  if (alpha == 1.0) {
    for (std::size_t i = 0; i < s.probs.size(); ++i) divergence_nats += s.probs[i] * (s.log_probs[i] + log_l0);
  } else if (alpha == 0.0) {
    // D_0(pi||u) = -log u(supp pi), and u lives on supp pi.
    divergence_nats = 0.0;
  } else if (std::isinf(alpha)) {
    divergence_nats = max_log_prob(s) + log_l0;
  } else {
    std::vector<double> terms(s.log_probs.size());
    for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = alpha * s.log_probs[i] - (1.0 - alpha) * log_l0;
    divergence_nats = log_sum_exp(terms) / (alpha - 1.0);
  }

  DecompositionReport r;
  r.l0 = l0;
  r.entropy_bits = renyi_nats(s, alpha) / kLn2;
  r.divergence_bits = divergence_nats / kLn2;
  r.enz = std::exp2(r.entropy_bits);
  r.efficiency = std::exp2(-r.divergence_bits);
  return r;
}

HierarchyProfile hierarchy(const VectorRef& x, const std::vector<double>& alpha_grid) {
  require(std::is_sorted(alpha_grid.begin(), alpha_grid.end()), Errc::InvalidArgument,
          "alpha grid must be sorted ascending");
  for (double a : alpha_grid) check_order(a);
  HierarchyProfile p;
  p.l0 = count_nonzeros(x);
  p.enz_shannon = renyi_enz(x, 1.0);
  p.enz_renyi2 = renyi_enz(x, 2.0);
  p.enz_renyi_inf = renyi_enz(x, kInfiniteOrder);
  p.renyi_curve.reserve(alpha_grid.size());
  for (double a : alpha_grid) p.renyi_curve.emplace_back(a, renyi_enz(x, a));
  return p;
}

}  // namespace enz::measures
