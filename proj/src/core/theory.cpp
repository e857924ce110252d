#include "theory.hpp"

#include "io.hpp"
#include "random.hpp"
#include "surrogates.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace enz::theory {

namespace {

constexpr double kBoundRelTol = 1e-12;

struct Worst {
  double delta = -1.0;
  std::vector<Index> support;

  void offer(double d, const std::vector<Index>& s) {
    if (d > delta || (d == delta && s < support)) {
      delta = d;
      support = s;
    }
  }
};

/// Exact delta of the principal submatrix of the Gram matrix on `support`,
/// skipping the eigen solve when a Gershgorin bound shows it cannot exceed
/// `floor`. Returns a negative value when skipped.
class SupportEvaluator {
 public:
  SupportEvaluator(const Matrix& gram, Index s) : gram_(gram), sub_(s, s), chol_(s, s), solver_(s) {}

  double evaluate(const std::vector<Index>& support, double floor) {
    const Index s = static_cast<Index>(support.size());
    double bound = 0.0;
    for (Index i = 0; i < s; ++i) {
      double radius = 0.0;
      for (Index j = 0; j < s; ++j) {
        const double g = gram_(support[i], support[j]);
        sub_(i, j) = g;
        if (i != j) radius += std::abs(g);
      }
      const double diag = sub_(i, i);
      bound = std::max(bound, std::max(diag + radius - 1.0, 1.0 - diag + radius));
    }
    if (bound < floor) return -1.0;
    // delta_T < floor iff both (1 + floor) I - G_T and G_T - (1 - floor) I are
    // positive definite; two small Cholesky attempts are far cheaper than an
    // eigen solve and settle most supports.
    if (floor > 0.0 && positive_definite_shift(-1.0, 1.0 + floor, s) && positive_definite_shift(1.0, floor - 1.0, s))
      return -1.0;
    return exact(s);
  }

  /// Cholesky on sign * G_T + shift * I; false at the first nonpositive pivot.
  bool positive_definite_shift(double sign, double shift, Index s) {
    for (Index j = 0; j < s; ++j) {
      for (Index i = j; i < s; ++i) {
        double v = sign * sub_(i, j) + (i == j ? shift : 0.0);
        for (Index q = 0; q < j; ++q) v -= chol_(i, q) * chol_(j, q);
        if (i == j) {
          if (!(v > 0.0)) return false;
          chol_(j, j) = std::sqrt(v);
        } else {
          chol_(i, j) = v / chol_(j, j);
        }
      }
    }
    return true;
  }

  double exact(Index s) {
    if (s == 1) return std::abs(sub_(0, 0) - 1.0);
    solver_.compute(sub_, Eigen::EigenvaluesOnly);
    const auto& ev = solver_.eigenvalues();
    return std::max(ev(s - 1) - 1.0, 1.0 - ev(0));
  }

 private:
  const Matrix& gram_;
  Matrix sub_;
  Matrix chol_;
  Eigen::SelfAdjointEigenSolver<Matrix> solver_;
};

/// Depth-first enumeration of all s-subsets in lexicographic order. Gershgorin
/// radii are carried down the tree, so a leaf costs O(s) unless its bound
/// reaches the current maximum and the exact eigenvalues are needed.
class ExhaustiveWalker {
 public:
  ExhaustiveWalker(const Matrix& gram, const Matrix& abs_gram, Index s, Worst& worst, std::atomic<double>& floor)
      : abs_(abs_gram), n_(gram.rows()), s_(s), worst_(worst), shared_floor_(floor),
        eval_(gram, s), idx_(static_cast<std::size_t>(s)), rad_(Matrix::Zero(s + 1, s)),
        dev_((gram.diagonal().array() - 1.0).abs().matrix()) {}

  void run(const std::vector<Index>& prefix) {
    const Index p = static_cast<Index>(prefix.size());
    for (Index d = 0; d < p; ++d) add(d, prefix[static_cast<std::size_t>(d)]);
    if (p == s_) {
      leaf();
    } else {
      descend(p, prefix.back() + 1);
    }
  }

 private:
  void add(Index d, Index j) {
    idx_[static_cast<std::size_t>(d)] = j;
    double sum = 0.0;
    for (Index i = 0; i < d; ++i) {
      const double a = abs_(idx_[static_cast<std::size_t>(i)], j);
      rad_(d + 1, i) = rad_(d, i) + a;
      sum += a;
    }
    rad_(d + 1, d) = sum;
  }

  void descend(Index d, Index start) {
    for (Index j = start; j <= n_ - (s_ - d); ++j) {
      add(d, j);
      if (d + 1 == s_) {
        leaf();
      } else {
        descend(d + 1, j + 1);
      }
    }
  }

  void leaf() {
    double bound = 0.0;
    for (Index i = 0; i < s_; ++i) bound = std::max(bound, dev_(idx_[static_cast<std::size_t>(i)]) + rad_(s_, i));
    // Strict '<' pruning keeps every maximizer, so the result does not depend
    // on how the shared floor evolved across threads.
    const double floor = std::max(worst_.delta, shared_floor_.load(std::memory_order_relaxed));
    if (bound < floor) return;
    const double d = eval_.evaluate(idx_, floor);
    if (d < 0.0 || d < worst_.delta) return;
    worst_.offer(d, idx_);
    double cur = shared_floor_.load(std::memory_order_relaxed);
    while (d > cur && !shared_floor_.compare_exchange_weak(cur, d, std::memory_order_relaxed)) {
    }
  }

  const Matrix& abs_;
  Index n_;
  Index s_;
  Worst& worst_;
  std::atomic<double>& shared_floor_;
  SupportEvaluator eval_;
  std::vector<Index> idx_;
  Matrix rad_;
  Vector dev_;
};

/// Advances a strictly increasing index tuple over [lo, n) starting at
/// position `from`; false once exhausted.
bool next_combination(std::vector<Index>& c, std::size_t from, Index n) {
  const std::size_t s = c.size();
  for (std::size_t i = s; i-- > from;) {
    if (c[i] < n - static_cast<Index>(s - i)) {
      ++c[i];
      for (std::size_t j = i + 1; j < s; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

/// Partial Fisher-Yates: perm[0, s) becomes a uniform random s-subset.
void shuffle_prefix(Rng& rng, std::vector<Index>& perm, Index s) {
  const Index n = static_cast<Index>(perm.size());
  for (Index j = 0; j < s; ++j) {
    const auto pick = j + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - j)));
    std::swap(perm[static_cast<std::size_t>(j)], perm[static_cast<std::size_t>(pick)]);
  }
}

std::vector<Index> sorted_sample(Rng& rng, std::vector<Index>& perm, Index s) {
  shuffle_prefix(rng, perm, s);
  std::vector<Index> out(perm.begin(), perm.begin() + s);
  std::sort(out.begin(), out.end());
  return out;
}

Matrix columns(const Matrix& a, const std::vector<Index>& idx) {
  Matrix out(a.rows(), static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Index>(j)) = a.col(idx[j]);
  return out;
}

StabilityBounds bounds_unchecked(Index n, Index k, double delta, double tails, double e_norm) {
  const double coef = std::sqrt(2.0 * static_cast<double>(n - 2 * k)) * delta /
                      ((1.0 - delta) * std::sqrt(static_cast<double>(k)));
  const double noise = std::sqrt(1.0 + delta) / (1.0 - delta) * e_norm;
  return {coef * tails + noise, (coef + 1.0) * tails + noise};
}

bool within(double lhs, double bound) { return lhs <= bound * (1.0 + kBoundRelTol); }

}  // namespace

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t num = n - k + i;
    // r * num / i is exact at every step; guard the multiplication.
    const std::uint64_t g = std::gcd(r, i);
    const std::uint64_t rr = r / g, ii = i / g;
    const std::uint64_t nn = num / ii;
    if (rr != 0 && nn > std::numeric_limits<std::uint64_t>::max() / rr) return std::numeric_limits<std::uint64_t>::max();
    r = rr * nn;
  }
  return r;
}

double support_delta(const Matrix& a, const std::vector<Index>& support) {
  require(!support.empty(), Errc::BadOrder, "support must be nonempty");
  for (Index j : support) require(j >= 0 && j < a.cols(), Errc::InvalidArgument, "support index out of range");
  const Matrix sub = columns(a, support);
  const Matrix gram = sub.transpose() * sub;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(ev(ev.size() - 1) - 1.0, 1.0 - ev(0));
}

RipEstimate estimate_rip_constant(const Matrix& a, Index s, std::uint64_t budget, std::uint64_t seed, int threads) {
  require(s >= 1 && s <= a.cols(), Errc::BadOrder, "RIP order must satisfy 1 <= s <= n");
  require(budget >= 1, Errc::InvalidArgument, "budget must be >= 1");
  const Index n = a.cols();
  const Matrix gram = a.transpose() * a;
  const std::uint64_t total = binomial(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(s));

  RipEstimate est;
  est.order = s;
  if (total > budget) {
    est.method = RipMethod::Sampled;
    est.is_lower_bound = true;
    est.supports = budget;
    Rng rng(seed);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    SupportEvaluator eval(gram, s);
    Worst worst;
    for (std::uint64_t t = 0; t < budget; ++t) {
      const auto support = sorted_sample(rng, perm, s);
      const double d = eval.evaluate(support, worst.delta);
      if (d >= 0.0) worst.offer(d, support);
    }
    est.delta = worst.delta;
    est.worst_support = worst.support;
    return est;
  }

  est.method = RipMethod::Exhaustive;
  est.is_lower_bound = false;
  est.supports = total;

  // Work items are fixed prefixes of length p; each worker enumerates the
  // completions of the prefixes it claims.
  const std::size_t p = static_cast<std::size_t>(std::min<Index>(2, s));
  std::vector<std::vector<Index>> prefixes;
  {
    std::vector<Index> c(p);
    std::iota(c.begin(), c.end(), Index{0});
    do {
      prefixes.push_back(c);
    } while (next_combination(c, 0, n - (s - static_cast<Index>(p))));
  }

  std::atomic<std::size_t> next{0};
  std::atomic<double> shared_floor{-1.0};
  const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(prefixes.size())));
  std::vector<Worst> per_thread(static_cast<std::size_t>(nthreads));

  const Matrix abs_gram = gram.cwiseAbs();
  const auto worker = [&](int tid) {
    ExhaustiveWalker walker(gram, abs_gram, s, per_thread[static_cast<std::size_t>(tid)], shared_floor);
    for (std::size_t t = next++; t < prefixes.size(); t = next++) walker.run(prefixes[t]);
  };

  if (nthreads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker, i);
    for (auto& th : pool) th.join();
  }
  Worst best;
  for (const auto& w : per_thread)
    if (w.delta >= 0.0) best.offer(w.delta, w.support);
  est.delta = best.delta;
  est.worst_support = best.support;
  return est;
}

Prop1Report check_prop1(const Matrix& a, Index s, double delta, int trials, std::uint64_t seed) {
  require(s >= 1 && s <= a.cols(), Errc::BadOrder, "order must satisfy 1 <= s <= n");
  require(trials >= 0, Errc::InvalidArgument, "trials must be >= 0");
  Prop1Report rep;
  rep.min_sigma = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  std::vector<Index> perm(static_cast<std::size_t>(a.cols()));
  std::iota(perm.begin(), perm.end(), Index{0});

  const double floor_sq = 1.0 - delta;
  for (int t = 0; t < trials; ++t) {
    const auto support = sorted_sample(rng, perm, s);
    const Eigen::JacobiSVD<Matrix> svd(columns(a, support));
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    rep.min_sigma = std::min(rep.min_sigma, smin);
    ++rep.lower_checks;
    if (floor_sq > 0.0 && smin * smin < floor_sq * (1.0 - kBoundRelTol) - kBoundRelTol) ++rep.lower_violations;
  }

  if (s >= 2) {
    for (int t = 0; t < trials; ++t) {
      const Index pu = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(s - 1)));
      const Index pv = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(s - pu)));
      shuffle_prefix(rng, perm, pu + pv);
      const std::vector<Index> u(perm.begin(), perm.begin() + pu), v(perm.begin() + pu, perm.begin() + pu + pv);
      const Matrix cross = columns(a, u).transpose() * columns(a, v);
      const Eigen::JacobiSVD<Matrix> svd(cross);
      const double ratio = svd.singularValues()(0);
      rep.max_cross_ratio = std::max(rep.max_cross_ratio, ratio);
      ++rep.cross_checks;
      if (ratio > delta * (1.0 + kBoundRelTol) + kBoundRelTol) ++rep.cross_violations;
    }
  }
  if (rep.lower_checks == 0) rep.min_sigma = 0.0;
  return rep;
}

StabilityBounds stability_bound(const StabilityInputs& inp) {
  require(inp.delta_2k > 0.0 && inp.delta_2k < 1.0, Errc::BadDelta, "delta_2k must lie in (0, 1)");
  require(inp.k >= 1 && 2 * inp.k <= inp.n, Errc::InvalidArgument, "need 1 <= k and 2k <= n");
  require(inp.eps_x >= 0.0 && inp.eps_y >= 0.0 && inp.e_norm >= 0.0, Errc::InvalidArgument,
          "tail and noise norms must be nonnegative");
  return bounds_unchecked(inp.n, inp.k, inp.delta_2k, inp.eps_x + inp.eps_y, inp.e_norm);
}

StabilityReport verify_stability(const Matrix& a, const VectorRef& x, const VectorRef& y, Index k, double delta_2k) {
  require(x.size() == a.cols() && y.size() == a.cols(), Errc::DimensionMismatch, "signal length must match A");
  require(k >= 1 && 2 * k <= a.cols(), Errc::InvalidArgument, "need 1 <= k and 2k <= n");
  require(std::isfinite(delta_2k) && delta_2k >= 0.0 && delta_2k < 1.0, Errc::DeltaUnavailable,
          "delta_2k must be certified below 1");

  const auto sx = surrogates::topk_indices(x, k);
  const auto sy = surrogates::topk_indices(y, k);
  const Index n = a.cols();

  Vector x_top = Vector::Zero(n), y_top = Vector::Zero(n);
  std::vector<char> in_t(static_cast<std::size_t>(n), 0);
  for (Index i : sx) {
    x_top(i) = x(i);
    in_t[static_cast<std::size_t>(i)] = 1;
  }
  for (Index i : sy) {
    y_top(i) = y(i);
    in_t[static_cast<std::size_t>(i)] = 1;
  }
  const Vector h = y - x;
  Vector h_t = Vector::Zero(n);
  for (Index i = 0; i < n; ++i)
    if (in_t[static_cast<std::size_t>(i)]) h_t(i) = h(i);

  StabilityReport rep;
  rep.delta = delta_2k;
  rep.eps_x = (x - x_top).norm();
  rep.eps_y = (y - y_top).norm();
  rep.e_norm = (a * h).norm();
  rep.lhs_hT = h_t.norm();
  rep.lhs_eff = (x_top - y_top).norm();
  const auto b = bounds_unchecked(n, k, delta_2k, rep.eps_x + rep.eps_y, rep.e_norm);
  rep.bound_hT = b.bound_hT;
  rep.bound_eff = b.bound_effective;
  rep.holds_hT = within(rep.lhs_hT, rep.bound_hT);
  rep.holds_eff = within(rep.lhs_eff, rep.bound_eff);
  return rep;
}

StabilityReport verify_stability(const Matrix& a, const VectorRef& x, const VectorRef& y, Index k,
                                 std::uint64_t budget, int threads) {
  require(k >= 1 && 2 * k <= a.cols(), Errc::InvalidArgument, "need 1 <= k and 2k <= n");
  const RipEstimate est = estimate_rip_constant(a, 2 * k, budget, 0, threads);
  require(!est.is_lower_bound, Errc::DeltaUnavailable, "delta_2k cannot be certified within the budget");
  return verify_stability(a, x, y, k, est.delta);
}

Matrix normalize_columns(const Matrix& a) {
  Matrix out = a;
  for (Index j = 0; j < out.cols(); ++j) {
    const double norm = out.col(j).norm();
    if (norm > 0.0) out.col(j) /= norm;
  }
  return out;
}

Matrix random_matrix(const InstanceConfig& cfg, std::uint64_t seed) {
  require(cfg.m >= 1 && cfg.n >= 1, Errc::InvalidArgument, "matrix dimensions must be positive");
  Rng rng(seed);
  Matrix a(cfg.m, cfg.n);
  if (cfg.ensemble == Ensemble::Gaussian) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.m));
    for (Index i = 0; i < cfg.m; ++i)
      for (Index j = 0; j < cfg.n; ++j) a(i, j) = scale * rng.normal();
  } else {
    for (Index start = 0; start < cfg.n; start += cfg.m) {
      Matrix g(cfg.m, cfg.m);
      for (Index i = 0; i < cfg.m; ++i)
        for (Index j = 0; j < cfg.m; ++j) g(i, j) = rng.normal();
      const Eigen::HouseholderQR<Matrix> qr(g);
      Matrix q = qr.householderQ() * Matrix::Identity(cfg.m, cfg.m);
      const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
      for (Index j = 0; j < cfg.m; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
      const Index width = std::min(cfg.m, cfg.n - start);
      a.middleCols(start, width) = q.leftCols(width);
    }
  }
  return cfg.normalize_columns ? normalize_columns(a) : a;
}

SignalPair random_signal_pair(const InstanceConfig& cfg, std::uint64_t seed) {
  require(cfg.k >= 1 && cfg.k <= cfg.n, Errc::BadK, "k must satisfy 1 <= k <= n");
  Rng rng(seed);
  std::vector<Index> perm(static_cast<std::size_t>(cfg.n));
  std::iota(perm.begin(), perm.end(), Index{0});
  const auto support = sorted_sample(rng, perm, cfg.k);

  SignalPair out{Vector(cfg.n), Vector(cfg.n)};
  for (Index i = 0; i < cfg.n; ++i) out.x(i) = cfg.tail_scale * rng.normal();
  for (Index i = 0; i < cfg.n; ++i) out.y(i) = cfg.tail_scale * rng.normal();
  for (Index i : support) {
    const double v = rng.normal();
    out.x(i) = v;
    out.y(i) = v * (1.0 + cfg.perturbation * rng.normal());
  }
  if (cfg.k < cfg.n) {
    // Move the weakest dominant entry of y to an index outside the support.
    Index weakest = support.front();
    for (Index i : support)
      if (std::abs(out.y(i)) < std::abs(out.y(weakest))) weakest = i;
    const Index target = perm[static_cast<std::size_t>(cfg.k + static_cast<Index>(rng.below(
                                  static_cast<std::uint64_t>(cfg.n - cfg.k))))];
    std::swap(out.y(weakest), out.y(target));
  }
  return out;
}

StabilityBatch run_stability_batch(const StabilityBatchConfig& cfg) {
  require(cfg.instances >= 1, Errc::InvalidArgument, "instances must be >= 1");
  require(cfg.matrices >= 0, Errc::InvalidArgument, "matrices must be >= 0");
  const InstanceConfig& ic = cfg.instance;
  require(ic.k >= 1 && 2 * ic.k <= ic.n, Errc::InvalidArgument, "need 1 <= k and 2k <= n");
  const int matrix_count = cfg.matrices > 0 ? cfg.matrices : cfg.instances;

  StabilityBatch batch;
  std::vector<Matrix> mats;
  for (int j = 0; j < matrix_count; ++j) {
    mats.push_back(random_matrix(ic, derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(j))));
    batch.estimates.push_back(estimate_rip_constant(mats.back(), 2 * ic.k, cfg.budget,
                                                    derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(j) + 1),
                                                    cfg.threads));
  }
  for (int i = 0; i < cfg.instances; ++i) {
    const auto j = static_cast<std::size_t>(i % matrix_count);
    const RipEstimate& est = batch.estimates[j];
    if (est.is_lower_bound || est.delta >= 1.0) {
      ++batch.skipped;
      continue;
    }
    const auto pair = random_signal_pair(ic, derive_seed(cfg.seed ^ 0x5157AB1E5EEDULL, static_cast<std::uint64_t>(i)));
    batch.reports.push_back(verify_stability(mats[j], pair.x, pair.y, ic.k, est.delta));
  }
  return batch;
}

void write_stability_csv(const std::vector<StabilityReport>& reports, std::ostream& out) {
  out << "lhs_hT,bound_hT,lhs_eff,bound_eff,delta,holds\n";
  for (const auto& r : reports) {
    out << io::format_double(r.lhs_hT) << ',' << io::format_double(r.bound_hT) << ',' << io::format_double(r.lhs_eff)
        << ',' << io::format_double(r.bound_eff) << ',' << io::format_double(r.delta) << ',' << (r.holds() ? 1 : 0)
        << '\n';
  }
}

const char* to_string(RipMethod m) { return m == RipMethod::Exhaustive ? "exhaustive" : "sampled"; }

const char* to_string(Ensemble e) { return e == Ensemble::Gaussian ? "gaussian" : "orthonormal_bases"; }

}  // namespace enz::theory
