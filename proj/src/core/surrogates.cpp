#include "surrogates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace enz::surrogates {

namespace {

void check_scale(double scale) {
  require(scale > 0.0 && std::isfinite(scale), Errc::NonPositiveScale, "scale C must be positive");
}

void check_eps(double eps) {
  require(eps > 0.0 && std::isfinite(eps), Errc::NonPositiveEps, "smoothing eps must be positive");
}

}  // namespace

void SurrogateSpec::validate() const {
  if (scale_policy == ScalePolicy::Fixed) check_scale(fixed_scale);
  check_eps(smoothing_eps);
  if (kind == Kind::RenyiU) require(alpha >= 0.0, Errc::InvalidArgument, "renyi_u order must be >= 0");
  if (kind == Kind::L0TopK) require(topk >= 1, Errc::BadK, "l0_topk needs k >= 1");
  if (kind == Kind::LogSum) require(eps_w > 0.0, Errc::InvalidArgument, "logsum eps_w must be positive");
}

double unnormalized_entropy(const VectorRef& x, double scale, LogBase base) {
  check_scale(scale);
  const double log_factor = base == LogBase::Two ? 1.0 / std::log(2.0) : 1.0;
  double acc = 0.0;
  double l1 = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double z = std::abs(x[i]) / scale;
    if (z == 0.0) continue;
    acc -= z * std::log(z) * log_factor;
    l1 += std::abs(x[i]);
  }
  return acc + l1 / scale;
}

double unnormalized_renyi(const VectorRef& x, double scale, double alpha) {
  check_scale(scale);
  require(alpha >= 0.0, Errc::InvalidArgument, "Renyi order must be >= 0");
  double l1 = 0.0;
  for (Index i = 0; i < x.size(); ++i) l1 += std::abs(x[i]);
  if (alpha == 0.0) {
    double l0 = 0.0;
    for (Index i = 0; i < x.size(); ++i) l0 += (x[i] != 0.0);
    return scale * l0 - l1;
  }
  if (alpha == 1.0) {
    double acc = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
      const double a = std::abs(x[i]);
      if (a > 0.0) acc -= a * std::log(a / scale);
    }
    return acc;
  }
  // C^(1-a) |x_i|^a written as C (|x_i|/C)^a to stay in range.
  double power_sum = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double a = std::abs(x[i]);
    if (a > 0.0) power_sum += scale * std::pow(a / scale, alpha);
  }
  return (power_sum - l1) / (1.0 - alpha);
}

ValueGrad smoothed_entropy_value_grad(const VectorRef& x, double scale, double eps, bool clamp_at_peak) {
  check_scale(scale);
  check_eps(eps);
  ValueGrad out;
  out.grad.resize(x.size());
  double value = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double s = std::sqrt(x[i] * x[i] + eps);
    if (clamp_at_peak && s >= scale) {
      value += scale;
      out.grad[i] = 0.0;
      continue;
    }
    const double log_ratio = std::log(s / scale);
    value += -s * log_ratio + s;
    out.grad[i] = -log_ratio * (x[i] / s) / scale;
  }
  out.value = value / scale;
  return out;
}

double renyi_kernel_peak(double alpha) {
  if (alpha == 0.0) return 1.0;
  if (alpha == 1.0) return std::exp(-1.0);
  return std::pow(alpha, 1.0 / (1.0 - alpha));
}

ValueGrad smoothed_renyi_value_grad(const VectorRef& x, double scale, double alpha, double eps, bool clamp_at_peak) {
  check_scale(scale);
  check_eps(eps);
  require(alpha >= 0.0, Errc::InvalidArgument, "Renyi order must be >= 0");
  const double cap = clamp_at_peak ? renyi_kernel_peak(alpha) * scale : std::numeric_limits<double>::infinity();
  ValueGrad out;
  out.grad.resize(x.size());
  double value = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double raw = std::sqrt(x[i] * x[i] + eps);
    const bool capped = raw >= cap;
    const double s = capped ? cap : raw;
    const double ratio = s / scale;
    double ds;
    if (alpha == 1.0) {
      value += -s * std::log(ratio);
      ds = -(std::log(ratio) + 1.0);
    } else {
      value += (scale * std::pow(ratio, alpha) - s) / (1.0 - alpha);
      ds = (alpha * std::pow(ratio, alpha - 1.0) - 1.0) / (1.0 - alpha);
    }
    out.grad[i] = capped ? 0.0 : ds * x[i] / s;
  }
  out.value = value;
  return out;
}

ValueGrad smoothed_l1_value_grad(const VectorRef& z, double eps) {
  check_eps(eps);
  ValueGrad out;
  out.grad.resize(z.size());
  double value = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double s = std::sqrt(z[i] * z[i] + eps);
    value += s;
    out.grad[i] = z[i] / s;
  }
  out.value = value;
  return out;
}

ValueGrad smoothed_logsum_value_grad(const VectorRef& z, double eps_w, double eps) {
  check_eps(eps);
  require(eps_w > 0.0, Errc::InvalidArgument, "logsum eps_w must be positive");
  ValueGrad out;
  out.grad.resize(z.size());
  double value = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double s = std::sqrt(z[i] * z[i] + eps);
    value += std::log1p(s / eps_w);
    out.grad[i] = (z[i] / s) / (eps_w + s);
  }
  out.value = value;
  return out;
}

double soft_threshold(double v, double t) {
  const double mag = std::abs(v) - t;
  if (mag <= 0.0) return 0.0;
  return v > 0.0 ? mag : -mag;
}

std::vector<Index> topk_indices(const VectorRef& v, Index k) {
  require(k >= 1 && k <= v.size(), Errc::BadK, "k must lie in [1, n]");
  std::vector<Index> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), Index{0});
  auto by_magnitude = [&](Index a, Index b) {
    const double ma = std::abs(v[a]), mb = std::abs(v[b]);
    return ma != mb ? ma > mb : a < b;
  };
  std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), by_magnitude);
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

Vector hard_threshold_topk(const VectorRef& v, Index k) {
  Vector out = Vector::Zero(v.size());
  for (Index i : topk_indices(v, k)) out[i] = v[i];
  return out;
}

Vector logsum_weights(const VectorRef& x, double eps_w) {
  require(eps_w > 0.0, Errc::InvalidArgument, "eps_w must be positive");
  return (x.cwiseAbs().array() + eps_w).inverse().matrix();
}

double logsum_penalty(const VectorRef& x, double eps_w) {
  double acc = 0.0;
  for (Index i = 0; i < x.size(); ++i) acc += std::log1p(std::abs(x[i]) / eps_w);
  return acc;
}

}  // namespace enz::surrogates
