#include "enz/enz.h"

#include "denoise.hpp"
#include "io.hpp"
#include "measures.hpp"
#include "sensing.hpp"
#include "solvers.hpp"
#include "surrogates.hpp"
#include "theory.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <iterator>
#include <limits>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

using namespace enz;

struct enz_table {
  std::vector<std::vector<double>> rows;
};

struct enz_matrix {
  Matrix a;
};

struct enz_result {
  solvers::SolveResult solve;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> grid_lambdas;
  std::vector<double> grid_errors;
};

struct enz_sweep {
  sensing::SweepResult result;
};

struct enz_image {
  denoise::Image img;
};

struct enz_denoise_grid {
  denoise::GridResult grid;
  enz_image best;
};

struct enz_decay_table {
  denoise::DecayTable table;
};

struct enz_stability_batch {
  theory::StabilityBatch batch;
};

namespace {

thread_local std::string g_last_error;

enz_status fail(enz_status code, const char* what) {
  g_last_error = what;
  return code;
}

/// Runs `body`, translating exceptions into status codes.
template <class F>
enz_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return ENZ_OK;
  } catch (const Error& e) {
    return fail(static_cast<enz_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(ENZ_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ENZ_E_INTERNAL, e.what());
  } catch (...) {
    return fail(ENZ_E_INTERNAL, "unknown failure");
  }
}

void need(const void* p, const char* what) {
  if (!p) throw Error(Errc::InvalidArgument, std::string("null pointer: ") + what);
}

Eigen::Map<const Vector> view(const double* x, size_t n) {
  need(x, "vector");
  return Eigen::Map<const Vector>(x, static_cast<Index>(n));
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

solvers::ContinuationSchedule schedule_from(const enz_solver_options& o) {
  solvers::ContinuationSchedule s;
  s.eps0 = o.eps0;
  s.decay = o.decay;
  s.stages = o.stages;
  s.outer_c_tol = o.outer_c_tol;
  s.max_outer = o.max_outer;
  return s;
}

optim::QuasiNewtonConfig qn_from(int memory, double grad_tol, int max_inner) {
  optim::QuasiNewtonConfig q;
  q.memory = memory;
  q.grad_tol = grad_tol;
  q.max_inner_iters = max_inner;
  return q;
}

solvers::IstaConfig ista_from(const enz_solver_options& o) { return {o.step, o.ista_max_iters, o.ista_tol}; }
solvers::IhtConfig iht_from(const enz_solver_options& o) { return {o.step, o.iht_max_iters, o.iht_tol}; }
solvers::Irl1Config irl1_from(const enz_solver_options& o) { return {o.irl1_eps_w, o.irl1_rounds, ista_from(o)}; }

sensing::Method method_from(enz_method m) {
  switch (m) {
    case ENZ_METHOD_ENTROPY: return sensing::Method::Entropy;
    case ENZ_METHOD_ISTA: return sensing::Method::Ista;
    case ENZ_METHOD_IHT: return sensing::Method::Iht;
    case ENZ_METHOD_IRL1: return sensing::Method::Irl1;
  }
  throw Error(Errc::InvalidArgument, "unknown method");
}

enz_method method_to(sensing::Method m) {
  switch (m) {
    case sensing::Method::Entropy: return ENZ_METHOD_ENTROPY;
    case sensing::Method::Ista: return ENZ_METHOD_ISTA;
    case sensing::Method::Iht: return ENZ_METHOD_IHT;
    case sensing::Method::Irl1: return ENZ_METHOD_IRL1;
  }
  return ENZ_METHOD_ENTROPY;
}

denoise::Regularizer reg_from(enz_regularizer r) {
  switch (r) {
    case ENZ_REG_TV: return denoise::Regularizer::Tv;
    case ENZ_REG_LOGSUM: return denoise::Regularizer::LogSum;
    case ENZ_REG_ENTROPY: return denoise::Regularizer::Entropy;
  }
  throw Error(Errc::InvalidArgument, "unknown regularizer");
}

denoise::DenoiseConfig denoise_from(const enz_denoise_options* o) {
  enz_denoise_options d;
  if (!o) {
    enz_denoise_options_default(&d);
    o = &d;
  }
  denoise::DenoiseConfig c;
  c.eps0 = o->eps0;
  c.decay = o->decay;
  c.stages = o->stages;
  c.eps_w = o->eps_w;
  c.scale = o->scale;
  c.qn = qn_from(o->memory, o->grad_tol, o->max_inner_iters);
  return c;
}

enz_solver_options options_or_default(const enz_solver_options* o) {
  enz_solver_options d;
  enz_solver_options_default(&d);
  return o ? *o : d;
}

solvers::SolveResult solve_one(const Matrix& a, const Vector& b, enz_method method, double parameter,
                               const enz_solver_options& o) {
  switch (method) {
    case ENZ_METHOD_ENTROPY: {
      surrogates::SurrogateSpec spec;
      spec.kind = surrogates::Kind::EntropyU;
      return solvers::solve_entropy({a, b, parameter, spec}, schedule_from(o),
                                    qn_from(o.memory, o.grad_tol, o.max_inner_iters));
    }
    case ENZ_METHOD_ISTA: return solvers::solve_ista(a, b, parameter, ista_from(o));
    case ENZ_METHOD_IHT: {
      require(parameter >= 1.0 && parameter == std::floor(parameter), Errc::BadK, "IHT needs an integer k >= 1");
      return solvers::solve_iht(a, b, static_cast<Index>(parameter), iht_from(o));
    }
    case ENZ_METHOD_IRL1: return solvers::solve_irl1(a, b, parameter, irl1_from(o));
  }
  throw Error(Errc::InvalidArgument, "unknown method");
}

void fill_report(const theory::StabilityReport& r, enz_stability_report* out) {
  out->lhs_hT = r.lhs_hT;
  out->bound_hT = r.bound_hT;
  out->lhs_eff = r.lhs_eff;
  out->bound_eff = r.bound_eff;
  out->delta = r.delta;
  out->eps_x = r.eps_x;
  out->eps_y = r.eps_y;
  out->e_norm = r.e_norm;
  out->holds_hT = r.holds_hT ? 1 : 0;
  out->holds_eff = r.holds_eff ? 1 : 0;
}

void fill_estimate(const theory::RipEstimate& e, enz_rip_estimate* out) {
  out->order = static_cast<size_t>(e.order);
  out->delta = e.delta;
  out->exhaustive = e.method == theory::RipMethod::Exhaustive ? 1 : 0;
  out->lower_bound = e.is_lower_bound ? 1 : 0;
  out->supports = e.supports;
}

const enz_method kDefaultMethods[] = {ENZ_METHOD_ENTROPY, ENZ_METHOD_ISTA, ENZ_METHOD_IHT, ENZ_METHOD_IRL1};
const size_t kDefaultK[] = {2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30, 32};
const double kDefaultEta[] = {0.01, 0.02, 0.03};

}  // namespace

extern "C" {

const char* enz_version(void) { return "0.1.0"; }

const char* enz_last_error(void) { return g_last_error.c_str(); }

const char* enz_status_name(enz_status status) {
  switch (status) {
    case ENZ_OK: return "ok";
    case ENZ_E_ZERO_VECTOR: return "ZeroVector";
    case ENZ_E_INVALID_ARGUMENT: return "InvalidArgument";
    case ENZ_E_DIMENSION_MISMATCH: return "DimensionMismatch";
    case ENZ_E_NONPOSITIVE_SCALE: return "NonPositiveScale";
    case ENZ_E_NONPOSITIVE_EPS: return "NonPositiveEps";
    case ENZ_E_BAD_K: return "BadK";
    case ENZ_E_BAD_CORRELATION: return "BadCorrelation";
    case ENZ_E_BAD_DELTA: return "BadDelta";
    case ENZ_E_BAD_ORDER: return "BadOrder";
    case ENZ_E_DELTA_UNAVAILABLE: return "DeltaUnavailable";
    case ENZ_E_LINE_SEARCH: return "LineSearchFailure";
    case ENZ_E_NONFINITE: return "NonFiniteObjective";
    case ENZ_E_ZERO_ITERATE: return "ZeroIterate";
    case ENZ_E_EMPTY_INPUT: return "EmptyInput";
    case ENZ_E_IMAGE_FORMAT: return "ImageFormatError";
    case ENZ_E_IO: return "IoError";
    case ENZ_E_PARSE: return "ParseError";
    case ENZ_E_INTERNAL: return "InternalError";
  }
  return "unknown";
}

void enz_free(void* p) { std::free(p); }

size_t enz_format_double(double v, char* buf, size_t cap) {
  if (!buf) return 0;
  const std::string s = io::format_double(v);
  if (s.size() + 1 > cap) return 0;
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return s.size();
}

/* measures */

enz_status enz_count_nonzeros(const double* x, size_t n, size_t* out) {
  return guarded([&] {
    need(out, "out");
    *out = static_cast<size_t>(measures::count_nonzeros(view(x, n)));
  });
}

enz_status enz_normalize(const double* x, size_t n, double* probs) {
  return guarded([&] {
    need(probs, "probs");
    const auto d = measures::normalize_magnitudes(view(x, n));
    std::copy(d.probs.data(), d.probs.data() + d.probs.size(), probs);
  });
}

enz_status enz_shannon(const double* x, size_t n, double* entropy_bits, double* enz_out) {
  return guarded([&] {
    const auto r = measures::shannon_enz(view(x, n));
    if (entropy_bits) *entropy_bits = r.entropy_bits;
    if (enz_out) *enz_out = r.enz;
  });
}

enz_status enz_renyi(const double* x, size_t n, double alpha, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = measures::renyi_enz(view(x, n), alpha);
  });
}

enz_status enz_decompose(const double* x, size_t n, double alpha, enz_decomposition* out) {
  return guarded([&] {
    need(out, "out");
    const auto r = measures::decompose(view(x, n), alpha);
    out->l0 = static_cast<size_t>(r.l0);
    out->entropy_bits = r.entropy_bits;
    out->divergence_bits = r.divergence_bits;
    out->enz = r.enz;
    out->efficiency = r.efficiency;
  });
}

enz_status enz_unnormalized_entropy(const double* x, size_t n, double scale, int base2, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = surrogates::unnormalized_entropy(view(x, n), scale,
                                            base2 ? surrogates::LogBase::Two : surrogates::LogBase::E);
  });
}

enz_status enz_unnormalized_renyi(const double* x, size_t n, double scale, double alpha, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = surrogates::unnormalized_renyi(view(x, n), scale, alpha);
  });
}

/* tables */

enz_status enz_table_read(const char* path, enz_table** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto t = std::make_unique<enz_table>();
    t->rows = io::read_numeric_table_file(path);
    *out = t.release();
  });
}

size_t enz_table_rows(const enz_table* t) { return t ? t->rows.size() : 0; }

size_t enz_table_row_length(const enz_table* t, size_t row) {
  return (t && row < t->rows.size()) ? t->rows[row].size() : 0;
}

const double* enz_table_row(const enz_table* t, size_t row) {
  return (t && row < t->rows.size()) ? t->rows[row].data() : nullptr;
}

void enz_table_destroy(enz_table* t) { delete t; }

/* matrices */

enz_status enz_matrix_create(size_t rows, size_t cols, const double* row_major, enz_matrix** out) {
  return guarded([&] {
    need(row_major, "data");
    need(out, "out");
    require(rows >= 1 && cols >= 1, Errc::InvalidArgument, "matrix dimensions must be positive");
    auto m = std::make_unique<enz_matrix>();
    m->a = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        row_major, static_cast<Index>(rows), static_cast<Index>(cols));
    *out = m.release();
  });
}

enz_status enz_matrix_correlated_gaussian(size_t m, size_t n, double r, uint64_t seed, enz_matrix** out) {
  return guarded([&] {
    need(out, "out");
    auto h = std::make_unique<enz_matrix>();
    h->a = sensing::correlated_gaussian_matrix({static_cast<Index>(m), static_cast<Index>(n), r, seed});
    *out = h.release();
  });
}

enz_status enz_matrix_random(size_t m, size_t n, enz_ensemble ensemble, int normalize_columns, uint64_t seed,
                             enz_matrix** out) {
  return guarded([&] {
    need(out, "out");
    theory::InstanceConfig cfg;
    cfg.m = static_cast<Index>(m);
    cfg.n = static_cast<Index>(n);
    cfg.ensemble = ensemble == ENZ_ENSEMBLE_GAUSSIAN ? theory::Ensemble::Gaussian : theory::Ensemble::OrthonormalBases;
    cfg.normalize_columns = normalize_columns != 0;
    auto h = std::make_unique<enz_matrix>();
    h->a = theory::random_matrix(cfg, seed);
    *out = h.release();
  });
}

size_t enz_matrix_rows(const enz_matrix* a) { return a ? static_cast<size_t>(a->a.rows()) : 0; }

size_t enz_matrix_cols(const enz_matrix* a) { return a ? static_cast<size_t>(a->a.cols()) : 0; }

enz_status enz_matrix_copy(const enz_matrix* a, double* row_major) {
  return guarded([&] {
    need(a, "matrix");
    need(row_major, "out");
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(row_major, a->a.rows(),
                                                                                       a->a.cols()) = a->a;
  });
}

enz_status enz_matrix_apply(const enz_matrix* a, const double* x, size_t n, double* y, size_t m) {
  return guarded([&] {
    need(a, "matrix");
    need(y, "y");
    require(static_cast<Index>(n) == a->a.cols() && static_cast<Index>(m) == a->a.rows(), Errc::DimensionMismatch,
            "matrix_apply: size mismatch");
    Eigen::Map<Vector>(y, static_cast<Index>(m)) = a->a * view(x, n);
  });
}

void enz_matrix_destroy(enz_matrix* a) { delete a; }

enz_status enz_sparse_signal(size_t n, size_t k, double dynamic_range, uint64_t seed, double* out) {
  return guarded([&] {
    need(out, "out");
    const Vector x = sensing::sparse_signal({static_cast<Index>(n), static_cast<Index>(k), dynamic_range, seed});
    std::copy(x.data(), x.data() + x.size(), out);
  });
}

enz_status enz_add_noise(const double* clean, size_t m, double eta, uint64_t seed, double* noisy, double* noise) {
  return guarded([&] {
    need(noisy, "noisy");
    const auto r = sensing::add_noise(view(clean, m), eta, seed);
    std::copy(r.noisy.data(), r.noisy.data() + r.noisy.size(), noisy);
    if (noise) std::copy(r.noise.data(), r.noise.data() + r.noise.size(), noise);
  });
}

enz_status enz_relative_error(const double* x_hat, const double* x_star, size_t n, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = sensing::relative_error(view(x_hat, n), view(x_star, n));
  });
}

/* recovery */

void enz_solver_options_default(enz_solver_options* o) {
  if (!o) return;
  const solvers::ContinuationSchedule s;
  const optim::QuasiNewtonConfig q;
  const solvers::IstaConfig ista;
  const solvers::IhtConfig iht;
  const solvers::Irl1Config irl1;
  o->eps0 = s.eps0;
  o->decay = s.decay;
  o->stages = s.stages;
  o->outer_c_tol = s.outer_c_tol;
  o->max_outer = s.max_outer;
  o->memory = q.memory;
  o->grad_tol = q.grad_tol;
  o->max_inner_iters = q.max_inner_iters;
  o->step = 0.0;
  o->ista_max_iters = ista.max_iters;
  o->ista_tol = ista.tol;
  o->iht_max_iters = iht.max_iters;
  o->iht_tol = iht.tol;
  o->irl1_eps_w = irl1.eps_w;
  o->irl1_rounds = irl1.rounds;
}

enz_status enz_recover(const enz_matrix* a, const double* b, size_t m, enz_method method, double parameter,
                       const enz_solver_options* opts, enz_result** out) {
  return guarded([&] {
    need(a, "matrix");
    need(out, "out");
    require(static_cast<Index>(m) == a->a.rows(), Errc::DimensionMismatch, "observation length must equal rows(A)");
    const Vector bv = view(b, m);
    auto r = std::make_unique<enz_result>();
    r->solve = solve_one(a->a, bv, method, parameter, options_or_default(opts));
    if (method != ENZ_METHOD_IHT) r->lambda = parameter;
    *out = r.release();
  });
}

enz_status enz_recover_grid(const enz_matrix* a, const double* b, size_t m, enz_method method, double lo, double hi,
                            int points, const double* x_true, size_t n, const enz_solver_options* opts,
                            enz_result** out) {
  return guarded([&] {
    need(a, "matrix");
    need(out, "out");
    require(method != ENZ_METHOD_IHT, Errc::InvalidArgument, "IHT takes k, not a lambda grid");
    require(static_cast<Index>(m) == a->a.rows(), Errc::DimensionMismatch, "observation length must equal rows(A)");
    require(static_cast<Index>(n) == a->a.cols(), Errc::DimensionMismatch, "ground truth length must equal cols(A)");
    const Vector bv = view(b, m);
    const Vector truth = view(x_true, n);
    enz_solver_options o = options_or_default(opts);
    if (method != ENZ_METHOD_ENTROPY && o.step <= 0.0) {
      const double sigma = solvers::spectral_norm(a->a);
      o.step = 1.0 / (sigma * sigma);
    }
    const auto grid = solvers::lambda_grid_search(
        [&](double lambda) { return solve_one(a->a, bv, method, lambda, o); }, lo, hi, points,
        [&](const Vector& x) { return sensing::relative_error(x, truth); });
    auto r = std::make_unique<enz_result>();
    r->solve = grid.best;
    r->lambda = grid.best_lambda;
    r->grid_lambdas = grid.lambdas;
    r->grid_errors = grid.errors;
    *out = r.release();
  });
}

size_t enz_result_size(const enz_result* r) { return r ? static_cast<size_t>(r->solve.x_hat.size()) : 0; }
const double* enz_result_x(const enz_result* r) { return r ? r->solve.x_hat.data() : nullptr; }
size_t enz_result_trace_size(const enz_result* r) { return r ? r->solve.objective_trace.size() : 0; }
const double* enz_result_trace(const enz_result* r) { return r ? r->solve.objective_trace.data() : nullptr; }
double enz_result_lambda(const enz_result* r) { return r ? r->lambda : std::numeric_limits<double>::quiet_NaN(); }
int enz_result_converged(const enz_result* r) { return (r && r->solve.converged) ? 1 : 0; }
int enz_result_iterations(const enz_result* r) { return r ? r->solve.inner_iterations : 0; }
size_t enz_result_grid_size(const enz_result* r) { return r ? r->grid_lambdas.size() : 0; }

double enz_result_grid_lambda(const enz_result* r, size_t i) {
  return (r && i < r->grid_lambdas.size()) ? r->grid_lambdas[i] : std::numeric_limits<double>::quiet_NaN();
}

double enz_result_grid_error(const enz_result* r, size_t i) {
  return (r && i < r->grid_errors.size()) ? r->grid_errors[i] : std::numeric_limits<double>::quiet_NaN();
}

void enz_result_destroy(enz_result* r) { delete r; }

/* sweep */

void enz_sweep_config_default(enz_sweep_config* cfg) {
  if (!cfg) return;
  const sensing::SweepConfig d;
  cfg->methods = kDefaultMethods;
  cfg->method_count = std::size(kDefaultMethods);
  cfg->k_grid = kDefaultK;
  cfg->k_count = std::size(kDefaultK);
  cfg->eta_grid = kDefaultEta;
  cfg->eta_count = std::size(kDefaultEta);
  cfg->trials = d.trials;
  cfg->base_seed = d.base_seed;
  cfg->m = static_cast<size_t>(d.m);
  cfg->n = static_cast<size_t>(d.n);
  cfg->r = d.r;
  cfg->dynamic_range = d.dynamic_range;
  cfg->lambda_lo = d.lambda_lo;
  cfg->lambda_hi = d.lambda_hi;
  cfg->lambda_points = d.lambda_points;
  cfg->threads = d.threads;
  cfg->record_timing = d.record_timing ? 1 : 0;
  enz_solver_options_default(&cfg->options);
}

enz_status enz_sweep_run(const enz_sweep_config* cfg, enz_sweep** out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    sensing::SweepConfig c;
    c.methods.clear();
    for (size_t i = 0; i < cfg->method_count; ++i) c.methods.push_back(method_from(cfg->methods[i]));
    c.k_grid.clear();
    for (size_t i = 0; i < cfg->k_count; ++i) c.k_grid.push_back(static_cast<Index>(cfg->k_grid[i]));
    c.eta_grid.assign(cfg->eta_grid, cfg->eta_grid + cfg->eta_count);
    c.trials = cfg->trials;
    c.base_seed = cfg->base_seed;
    c.m = static_cast<Index>(cfg->m);
    c.n = static_cast<Index>(cfg->n);
    c.r = cfg->r;
    c.dynamic_range = cfg->dynamic_range;
    c.lambda_lo = cfg->lambda_lo;
    c.lambda_hi = cfg->lambda_hi;
    c.lambda_points = cfg->lambda_points;
    c.threads = cfg->threads;
    c.record_timing = cfg->record_timing != 0;
    const enz_solver_options& o = cfg->options;
    c.schedule = schedule_from(o);
    c.qn = qn_from(o.memory, o.grad_tol, o.max_inner_iters);
    c.ista = ista_from(o);
    c.iht = iht_from(o);
    c.irl1 = irl1_from(o);
    auto s = std::make_unique<enz_sweep>();
    s->result = sensing::success_sweep(c);
    *out = s.release();
  });
}

size_t enz_sweep_cell_count(const enz_sweep* s) { return s ? s->result.cells.size() : 0; }

enz_status enz_sweep_cell_get(const enz_sweep* s, size_t i, enz_sweep_cell* out) {
  return guarded([&] {
    need(s, "sweep");
    need(out, "out");
    require(i < s->result.cells.size(), Errc::InvalidArgument, "cell index out of range");
    const auto& c = s->result.cells[i];
    out->method = method_to(c.method);
    out->k = static_cast<size_t>(c.k);
    out->eta = c.eta;
    out->trials = c.trials;
    out->successes = c.successes;
    out->success_rate = c.success_rate;
  });
}

size_t enz_sweep_failure_count(const enz_sweep* s) {
  if (!s) return 0;
  size_t n = 0;
  for (const auto& o : s->result.outcomes) n += o.failed ? 1 : 0;
  return n;
}

enz_status enz_sweep_trials_csv(const enz_sweep* s, char** out) {
  return guarded([&] {
    need(s, "sweep");
    need(out, "out");
    std::ostringstream os;
    sensing::write_trials_csv(s->result, os);
    *out = dup_string(os.str());
  });
}

enz_status enz_sweep_summary_csv(const enz_sweep* s, char** out) {
  return guarded([&] {
    need(s, "sweep");
    need(out, "out");
    std::ostringstream os;
    sensing::write_summary_csv(s->result, os);
    *out = dup_string(os.str());
  });
}

void enz_sweep_destroy(enz_sweep* s) { delete s; }

const char* enz_method_name(enz_method method) {
  try {
    return sensing::to_string(method_from(method));
  } catch (...) {
    return "unknown";
  }
}

/* images */

enz_status enz_image_create(size_t height, size_t width, const double* pixels, enz_image** out) {
  return guarded([&] {
    need(out, "out");
    const Vector px = view(pixels, height * width);
    require(px.allFinite(), Errc::InvalidArgument, "pixels must be finite");
    auto h = std::make_unique<enz_image>();
    h->img = denoise::Image(static_cast<Index>(height), static_cast<Index>(width), px.cwiseMax(0.0).cwiseMin(1.0));
    *out = h.release();
  });
}

enz_status enz_image_read_pgm(const char* path, enz_image** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto h = std::make_unique<enz_image>();
    h->img = denoise::read_pgm(path);
    *out = h.release();
  });
}

enz_status enz_image_write_pgm(const enz_image* img, const char* path) {
  return guarded([&] {
    need(img, "image");
    need(path, "path");
    denoise::write_pgm(img->img, path);
  });
}

enz_status enz_image_synthetic(size_t size, enz_image** out) {
  return guarded([&] {
    need(out, "out");
    auto h = std::make_unique<enz_image>();
    h->img = denoise::synthetic_scene(static_cast<Index>(size));
    *out = h.release();
  });
}

enz_status enz_image_awgn(const enz_image* img, double sigma, uint64_t seed, enz_image** out) {
  return guarded([&] {
    need(img, "image");
    need(out, "out");
    auto h = std::make_unique<enz_image>();
    h->img = denoise::awgn(img->img, sigma, seed);
    *out = h.release();
  });
}

size_t enz_image_height(const enz_image* img) { return img ? static_cast<size_t>(img->img.height) : 0; }
size_t enz_image_width(const enz_image* img) { return img ? static_cast<size_t>(img->img.width) : 0; }
const double* enz_image_pixels(const enz_image* img) { return img ? img->img.pixels.data() : nullptr; }

enz_status enz_image_gradient(const enz_image* img, double* dx, double* dy) {
  return guarded([&] {
    need(img, "image");
    need(dx, "dx");
    need(dy, "dy");
    const auto g = denoise::gradient_apply(img->img);
    std::copy(g.dx.data(), g.dx.data() + g.dx.size(), dx);
    std::copy(g.dy.data(), g.dy.data() + g.dy.size(), dy);
  });
}

enz_status enz_image_tv(const enz_image* img, double* out) {
  return guarded([&] {
    need(img, "image");
    need(out, "out");
    *out = denoise::tv_value(img->img);
  });
}

void enz_image_destroy(enz_image* img) { delete img; }

enz_status enz_psnr(const enz_image* a, const enz_image* b, double* out) {
  return guarded([&] {
    need(a, "image");
    need(b, "image");
    need(out, "out");
    *out = denoise::psnr(a->img, b->img);
  });
}

enz_status enz_ssim(const enz_image* a, const enz_image* b, double* out) {
  return guarded([&] {
    need(a, "image");
    need(b, "image");
    need(out, "out");
    *out = denoise::ssim(a->img, b->img);
  });
}

void enz_denoise_options_default(enz_denoise_options* o) {
  if (!o) return;
  const denoise::DenoiseConfig d;
  o->eps0 = d.eps0;
  o->decay = d.decay;
  o->stages = d.stages;
  o->eps_w = d.eps_w;
  o->scale = d.scale;
  o->memory = d.qn.memory;
  o->grad_tol = d.qn.grad_tol;
  o->max_inner_iters = d.qn.max_inner_iters;
}

const char* enz_regularizer_name(enz_regularizer reg) {
  try {
    return denoise::to_string(reg_from(reg));
  } catch (...) {
    return "unknown";
  }
}

enz_status enz_denoise(const enz_image* noisy, enz_regularizer reg, double lambda, const enz_denoise_options* opts,
                       enz_image** out) {
  return guarded([&] {
    need(noisy, "image");
    need(out, "out");
    auto h = std::make_unique<enz_image>();
    h->img = denoise::denoise(noisy->img, reg_from(reg), lambda, denoise_from(opts)).image;
    *out = h.release();
  });
}

enz_status enz_denoise_grid_run(const enz_image* noisy, const enz_image* clean, enz_regularizer reg,
                                const double* lambdas, size_t count, const enz_denoise_options* opts, int threads,
                                enz_denoise_grid** out) {
  return guarded([&] {
    need(noisy, "noisy");
    need(clean, "clean");
    need(lambdas, "lambdas");
    need(out, "out");
    auto g = std::make_unique<enz_denoise_grid>();
    g->grid = denoise::denoise_grid(noisy->img, clean->img, reg_from(reg), std::vector<double>(lambdas, lambdas + count),
                                    denoise_from(opts), threads);
    g->best.img = g->grid.best_image;
    *out = g.release();
  });
}

size_t enz_denoise_grid_size(const enz_denoise_grid* g) { return g ? g->grid.entries.size() : 0; }

enz_status enz_denoise_grid_entry(const enz_denoise_grid* g, size_t i, double* lambda, double* psnr, double* ssim) {
  return guarded([&] {
    need(g, "grid");
    require(i < g->grid.entries.size(), Errc::InvalidArgument, "grid index out of range");
    const auto& e = g->grid.entries[i];
    if (lambda) *lambda = e.lambda;
    if (psnr) *psnr = e.psnr;
    if (ssim) *ssim = e.ssim;
  });
}

size_t enz_denoise_grid_best(const enz_denoise_grid* g) { return g ? g->grid.best : 0; }

const enz_image* enz_denoise_grid_best_image(const enz_denoise_grid* g) { return g ? &g->best : nullptr; }

void enz_denoise_grid_destroy(enz_denoise_grid* g) { delete g; }

/* decay */

enz_status enz_decay_profile(const double* const* series, const size_t* lengths, size_t count,
                             const double* percentiles, size_t percentile_count, enz_decay_table** out) {
  return guarded([&] {
    need(out, "out");
    require(count >= 1, Errc::EmptyInput, "decay profile needs at least one series");
    need(series, "series");
    need(lengths, "lengths");
    std::vector<std::vector<double>> data(count);
    for (size_t i = 0; i < count; ++i) {
      require(lengths[i] >= 1, Errc::EmptyInput, "every series needs a nonzero value");
      need(series[i], "series");
      data[i].assign(series[i], series[i] + lengths[i]);
    }
    std::vector<double> pct = denoise::kDefaultPercentiles;
    if (percentiles) pct.assign(percentiles, percentiles + percentile_count);
    auto t = std::make_unique<enz_decay_table>();
    t->table = denoise::decay_profile(data, pct);
    *out = t.release();
  });
}

enz_status enz_decay_table_csv(const enz_decay_table* t, char** out) {
  return guarded([&] {
    need(t, "table");
    need(out, "out");
    const auto& d = t->table;
    std::ostringstream os;
    os << "index";
    for (size_t s = 0; s < d.series.size(); ++s) os << ",s" << s;
    os << ",mean,median";
    for (double p : d.percentiles) os << ",p" << io::format_double(p);
    os << '\n';
    for (size_t i = 0; i < d.mean.size(); ++i) {
      os << i;
      for (const auto& s : d.series) os << ',' << io::format_double(s[i]);
      os << ',' << io::format_double(d.mean[i]) << ',' << io::format_double(d.median[i]);
      for (const auto& e : d.envelopes) os << ',' << io::format_double(e[i]);
      os << '\n';
    }
    *out = dup_string(os.str());
  });
}

size_t enz_decay_table_length(const enz_decay_table* t) { return t ? t->table.mean.size() : 0; }

void enz_decay_table_destroy(enz_decay_table* t) { delete t; }

/* theory */

enz_status enz_rip_constant(const enz_matrix* a, size_t s, uint64_t budget, uint64_t seed, int threads,
                            enz_rip_estimate* out) {
  return guarded([&] {
    need(a, "matrix");
    need(out, "out");
    fill_estimate(theory::estimate_rip_constant(a->a, static_cast<Index>(s), budget, seed, threads), out);
  });
}

enz_status enz_check_prop1(const enz_matrix* a, size_t s, double delta, int trials, uint64_t seed,
                           enz_prop1_report* out) {
  return guarded([&] {
    need(a, "matrix");
    need(out, "out");
    const auto r = theory::check_prop1(a->a, static_cast<Index>(s), delta, trials, seed);
    out->lower_checks = r.lower_checks;
    out->lower_violations = r.lower_violations;
    out->min_sigma = r.min_sigma;
    out->cross_checks = r.cross_checks;
    out->cross_violations = r.cross_violations;
    out->max_cross_ratio = r.max_cross_ratio;
  });
}

enz_status enz_stability_bound(const enz_stability_inputs* in, double* bound_hT, double* bound_effective) {
  return guarded([&] {
    need(in, "inputs");
    const auto b = theory::stability_bound({static_cast<Index>(in->n), static_cast<Index>(in->k), in->delta_2k,
                                            in->eps_x, in->eps_y, in->e_norm});
    if (bound_hT) *bound_hT = b.bound_hT;
    if (bound_effective) *bound_effective = b.bound_effective;
  });
}

enz_status enz_verify_stability(const enz_matrix* a, const double* x, const double* y, size_t n, size_t k,
                                double delta_2k, enz_stability_report* out) {
  return guarded([&] {
    need(a, "matrix");
    need(out, "out");
    fill_report(theory::verify_stability(a->a, view(x, n), view(y, n), static_cast<Index>(k), delta_2k), out);
  });
}

enz_status enz_random_signal_pair(size_t n, size_t k, double tail_scale, double perturbation, uint64_t seed,
                                  double* x, double* y) {
  return guarded([&] {
    need(x, "x");
    need(y, "y");
    theory::InstanceConfig cfg;
    cfg.n = static_cast<Index>(n);
    cfg.k = static_cast<Index>(k);
    cfg.tail_scale = tail_scale;
    cfg.perturbation = perturbation;
    const auto pair = theory::random_signal_pair(cfg, seed);
    std::copy(pair.x.data(), pair.x.data() + pair.x.size(), x);
    std::copy(pair.y.data(), pair.y.data() + pair.y.size(), y);
  });
}

void enz_stability_batch_config_default(enz_stability_batch_config* cfg) {
  if (!cfg) return;
  const theory::StabilityBatchConfig d;
  cfg->m = static_cast<size_t>(d.instance.m);
  cfg->n = static_cast<size_t>(d.instance.n);
  cfg->k = static_cast<size_t>(d.instance.k);
  cfg->ensemble = ENZ_ENSEMBLE_ORTHONORMAL_BASES;
  cfg->normalize_columns = d.instance.normalize_columns ? 1 : 0;
  cfg->tail_scale = d.instance.tail_scale;
  cfg->perturbation = d.instance.perturbation;
  cfg->instances = d.instances;
  cfg->matrices = d.matrices;
  cfg->budget = d.budget;
  cfg->seed = d.seed;
  cfg->threads = d.threads;
}

enz_status enz_stability_batch_run(const enz_stability_batch_config* cfg, enz_stability_batch** out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    theory::StabilityBatchConfig c;
    c.instance.m = static_cast<Index>(cfg->m);
    c.instance.n = static_cast<Index>(cfg->n);
    c.instance.k = static_cast<Index>(cfg->k);
    c.instance.ensemble =
        cfg->ensemble == ENZ_ENSEMBLE_GAUSSIAN ? theory::Ensemble::Gaussian : theory::Ensemble::OrthonormalBases;
    c.instance.normalize_columns = cfg->normalize_columns != 0;
    c.instance.tail_scale = cfg->tail_scale;
    c.instance.perturbation = cfg->perturbation;
    c.instances = cfg->instances;
    c.matrices = cfg->matrices;
    c.budget = cfg->budget;
    c.seed = cfg->seed;
    c.threads = cfg->threads;
    auto b = std::make_unique<enz_stability_batch>();
    b->batch = theory::run_stability_batch(c);
    *out = b.release();
  });
}

size_t enz_stability_batch_size(const enz_stability_batch* b) { return b ? b->batch.reports.size() : 0; }

enz_status enz_stability_batch_report(const enz_stability_batch* b, size_t i, enz_stability_report* out) {
  return guarded([&] {
    need(b, "batch");
    need(out, "out");
    require(i < b->batch.reports.size(), Errc::InvalidArgument, "report index out of range");
    fill_report(b->batch.reports[i], out);
  });
}

size_t enz_stability_batch_skipped(const enz_stability_batch* b) {
  return b ? static_cast<size_t>(b->batch.skipped) : 0;
}

size_t enz_stability_batch_estimate_count(const enz_stability_batch* b) { return b ? b->batch.estimates.size() : 0; }

enz_status enz_stability_batch_estimate(const enz_stability_batch* b, size_t i, enz_rip_estimate* out) {
  return guarded([&] {
    need(b, "batch");
    need(out, "out");
    require(i < b->batch.estimates.size(), Errc::InvalidArgument, "estimate index out of range");
    fill_estimate(b->batch.estimates[i], out);
  });
}

enz_status enz_stability_batch_csv(const enz_stability_batch* b, char** out) {
  return guarded([&] {
    need(b, "batch");
    need(out, "out");
    std::ostringstream os;
    theory::write_stability_csv(b->batch.reports, os);
    *out = dup_string(os.str());
  });
}

void enz_stability_batch_destroy(enz_stability_batch* b) { delete b; }

}  // extern "C"
