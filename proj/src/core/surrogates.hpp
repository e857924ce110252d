#pragma once

#include "types.hpp"

#include <vector>

namespace enz::surrogates {

enum class LogBase { Two, E };

enum class Kind { EntropyU, RenyiU, L1, L0TopK, LogSum };

enum class ScalePolicy { Fixed, L2OfIterate, L1OfIterate };

/// Regularizer selection plus the scale C and smoothing parameter it uses.
struct SurrogateSpec {
  Kind kind = Kind::EntropyU;
  double alpha = 1.0;      // renyi_u order
  Index topk = 1;          // l0_topk
  double eps_w = 0.1;      // logsum stabilizer
  ScalePolicy scale_policy = ScalePolicy::L2OfIterate;
  double fixed_scale = 1.0;
  double smoothing_eps = 1e-2;

  void validate() const;
};

struct ValueGrad {
  double value = 0.0;
  Vector grad;
};

/// H_u(x) = -sum (|x_i|/C) log(|x_i|/C) + ||x||_1 / C.
double unnormalized_entropy(const VectorRef& x, double scale, LogBase base = LogBase::Two);

/// Separable Renyi surrogate (1/(1-a)) (C^(1-a) ||x||_a^a - ||x||_1), with the
/// a = 0 and a = 1 limits dispatched explicitly.
double unnormalized_renyi(const VectorRef& x, double scale, double alpha);

/// Natural-log H_u with |x_i| replaced by s_i = sqrt(x_i^2 + eps). With
/// clamp_at_peak, s_i is capped at C, where the kernel peaks, so the penalty
/// stays bounded below when iterates leave |x_i| <= C.
ValueGrad smoothed_entropy_value_grad(const VectorRef& x, double scale, double eps, bool clamp_at_peak = false);

/// q at which the separable Renyi kernel peaks (1 for a = 0).
double renyi_kernel_peak(double alpha);

/// Renyi surrogate with the same sqrt(x^2 + eps) smoothing and optional cap
/// at renyi_kernel_peak(alpha) * C.
ValueGrad smoothed_renyi_value_grad(const VectorRef& x, double scale, double alpha, double eps,
                                    bool clamp_at_peak = false);

/// Charbonnier l1: sum sqrt(z_i^2 + eps).
ValueGrad smoothed_l1_value_grad(const VectorRef& z, double eps);

/// sum log(1 + s_i / eps_w) with s_i = sqrt(z_i^2 + eps).
ValueGrad smoothed_logsum_value_grad(const VectorRef& z, double eps_w, double eps);

double soft_threshold(double v, double t);

/// Keeps the k largest magnitudes; ties go to the lower index.
Vector hard_threshold_topk(const VectorRef& v, Index k);

/// Indices of the k largest magnitudes in ascending index order.
std::vector<Index> topk_indices(const VectorRef& v, Index k);

/// w_i = 1 / (|x_i| + eps_w).
Vector logsum_weights(const VectorRef& x, double eps_w);

/// sum log(1 + |x_i| / eps_w).
double logsum_penalty(const VectorRef& x, double eps_w);

}  // namespace enz::surrogates
