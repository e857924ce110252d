#include "optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace enz::optim {

namespace {

struct Trial {
  double step = 0.0;
  double f = 0.0;
  double slope = 0.0;  // directional derivative g(x + step p) . p
  Vector x;
  Vector g;
};

bool finite_trial(const Trial& t) { return std::isfinite(t.f) && std::isfinite(t.slope); }

/// Minimizer of the cubic matching (f, slope) at both ends, or NaN.
double cubic_step(const Trial& lo, const Trial& hi) {
  const double d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (lo.step - hi.step);
  const double disc = d1 * d1 - lo.slope * hi.slope;
  if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), hi.step - lo.step);
  const double denom = hi.slope - lo.slope + 2.0 * d2;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return hi.step - (hi.step - lo.step) * (hi.slope + d2 - d1) / denom;
}

class WolfeSearch {
 public:
  WolfeSearch(const Oracle& oracle, const QuasiNewtonConfig& cfg, const Vector& x, const Vector& p, double f0,
              double slope0)
      : oracle_(oracle), cfg_(cfg), x_(x), p_(p), f0_(f0), slope0_(slope0) {}

  /// Returns true with `out` set to an accepted point. A point satisfying only
  /// sufficient decrease is accepted when the budget runs out.
  bool run(double step0, Trial& out) {
    Trial prev{0.0, f0_, slope0_, x_, Vector()};
    double step = step0;
    for (int i = 0; i < cfg_.max_line_search; ++i) {
      Trial cur = evaluate(step);
      if (!finite_trial(cur) || cur.f > f0_ + cfg_.wolfe_c1 * step * slope0_ || (i > 0 && cur.f >= prev.f))
        return zoom(prev, cur, out);
      if (std::abs(cur.slope) <= -cfg_.wolfe_c2 * slope0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, out);
      prev = std::move(cur);
      step *= 2.0;
    }
    return accept_armijo(prev, out);
  }

  int evaluations() const { return evaluations_; }

 private:
  Trial evaluate(double step) {
    Trial t;
    t.step = step;
    t.x = x_ + step * p_;
    t.g.resize(x_.size());
    t.f = oracle_(t.x, t.g);
    t.slope = t.g.dot(p_);
    ++evaluations_;
    return t;
  }

  bool sufficient(const Trial& t) const {
    return t.step > 0.0 && finite_trial(t) && t.f <= f0_ + cfg_.wolfe_c1 * t.step * slope0_;
  }

  bool accept_armijo(Trial& t, Trial& out) {
    if (!sufficient(t) || !(t.f < f0_)) return false;
    out = std::move(t);
    return true;
  }

  bool zoom(Trial lo, Trial hi, Trial& out) {
    while (evaluations_ < cfg_.max_line_search) {
      const double left = std::min(lo.step, hi.step), right = std::max(lo.step, hi.step);
      const double width = right - left;
      if (width <= 1e-16 * std::max(1.0, right)) break;
      double step = finite_trial(hi) ? cubic_step(lo, hi) : std::numeric_limits<double>::quiet_NaN();
      if (!std::isfinite(step) || step < left + 0.1 * width || step > right - 0.1 * width)
        step = 0.5 * (lo.step + hi.step);
      Trial cur = evaluate(step);
      if (!finite_trial(cur) || cur.f > f0_ + cfg_.wolfe_c1 * step * slope0_ || cur.f >= lo.f) {
        hi = std::move(cur);
        continue;
      }
      if (std::abs(cur.slope) <= -cfg_.wolfe_c2 * slope0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope * (hi.step - lo.step) >= 0.0) hi = lo;
      lo = std::move(cur);
    }
    return accept_armijo(lo, out);
  }

  const Oracle& oracle_;
  const QuasiNewtonConfig& cfg_;
  const Vector& x_;
  const Vector& p_;
  double f0_;
  double slope0_;
  int evaluations_ = 0;
};

struct Pair {
  Vector s;
  Vector y;
  double rho;
};

Vector two_loop(const std::deque<Pair>& memory, const Vector& g) {
  Vector q = g;
  std::vector<double> alpha(memory.size());
  for (std::size_t i = memory.size(); i-- > 0;) {
    alpha[i] = memory[i].rho * memory[i].s.dot(q);
    q -= alpha[i] * memory[i].y;
  }
  if (!memory.empty()) {
    const Pair& last = memory.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t i = 0; i < memory.size(); ++i) {
    const double beta = memory[i].rho * memory[i].y.dot(q);
    q += (alpha[i] - beta) * memory[i].s;
  }
  return -q;
}

}  // namespace

void QuasiNewtonConfig::validate() const {
  require(memory >= 1, Errc::InvalidArgument, "quasi-Newton memory must be >= 1");
  require(grad_tol > 0.0, Errc::InvalidArgument, "grad_tol must be positive");
  require(max_inner_iters >= 1, Errc::InvalidArgument, "max_inner_iters must be >= 1");
  require(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0, Errc::InvalidArgument,
          "line search needs 0 < c1 < c2 < 1");
  require(max_line_search >= 1, Errc::InvalidArgument, "max_line_search must be >= 1");
  require(rel_decrease_tol >= 0.0, Errc::InvalidArgument, "rel_decrease_tol must be >= 0");
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Converged: return "converged";
    case Status::MaxIterations: return "max_iterations";
    case Status::LineSearchFailure: return "line_search_failure";
    case Status::Stalled: return "stalled";
  }
  return "unknown";
}

MinimizeResult minimize_smooth(const Oracle& oracle, const Vector& x0, const QuasiNewtonConfig& cfg) {
  cfg.validate();
  MinimizeResult r;
  r.x = x0;
  Vector g(x0.size());
  double f = oracle(r.x, g);
  r.evaluations = 1;
  require(std::isfinite(f) && g.allFinite(), Errc::NonFiniteObjective, "objective not finite at the start point");
  r.trace.push_back(f);
  r.grad_trace.push_back(g.norm());

  std::deque<Pair> memory;
  r.status = Status::MaxIterations;
  if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) r.status = Status::Converged;

  while (r.status == Status::MaxIterations && r.iterations < cfg.max_inner_iters) {
    Vector p = two_loop(memory, g);
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      memory.clear();
      p = -g;
      slope = -g.squaredNorm();
    }
    const double step0 = memory.empty() ? std::min(1.0, 1.0 / p.norm()) : 1.0;

    WolfeSearch search(oracle, cfg, r.x, p, f, slope);
    Trial next;
    bool ok = search.run(step0, next);
    r.evaluations += search.evaluations();
    if (!ok && !memory.empty()) {
      // Curvature pairs can go stale on nonconvex problems; retry downhill.
      memory.clear();
      p = -g;
      slope = -g.squaredNorm();
      WolfeSearch retry(oracle, cfg, r.x, p, f, slope);
      ok = retry.run(std::min(1.0, 1.0 / p.norm()), next);
      r.evaluations += retry.evaluations();
    }
    if (!ok) {
      r.status = Status::LineSearchFailure;
      break;
    }

    Pair pair{next.x - r.x, next.g - g, 0.0};
    const double sy = pair.s.dot(pair.y);
    if (sy > 1e-12 * pair.s.norm() * pair.y.norm() && sy > 0.0) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (static_cast<int>(memory.size()) > cfg.memory) memory.pop_front();
    }

    const double decrease = f - next.f;
    r.x = std::move(next.x);
    g = std::move(next.g);
    f = next.f;
    ++r.iterations;
    r.trace.push_back(f);
    r.grad_trace.push_back(g.norm());

    if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
      r.status = Status::Converged;
    } else if (cfg.rel_decrease_tol > 0.0 && decrease <= cfg.rel_decrease_tol * std::max(1.0, std::abs(f))) {
      r.status = Status::Stalled;
    }
  }
  r.value = f;
  r.grad_inf = g.lpNorm<Eigen::Infinity>();
  return r;
}

}  // namespace enz::optim
