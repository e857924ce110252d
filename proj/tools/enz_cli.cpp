#include "enz/enz.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---- option structs shared with the library ------------------------------

void to_json(json& j, const enz_solver_options& o) {
  j = json{{"eps0", o.eps0},
           {"decay", o.decay},
           {"stages", o.stages},
           {"outer_c_tol", o.outer_c_tol},
           {"max_outer", o.max_outer},
           {"memory", o.memory},
           {"grad_tol", o.grad_tol},
           {"max_inner_iters", o.max_inner_iters},
           {"step", o.step},
           {"ista_max_iters", o.ista_max_iters},
           {"ista_tol", o.ista_tol},
           {"iht_max_iters", o.iht_max_iters},
           {"iht_tol", o.iht_tol},
           {"irl1_eps_w", o.irl1_eps_w},
           {"irl1_rounds", o.irl1_rounds}};
}

void from_json(const json& j, enz_solver_options& o) {
  enz_solver_options_default(&o);
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("eps0", o.eps0);
  get("decay", o.decay);
  get("stages", o.stages);
  get("outer_c_tol", o.outer_c_tol);
  get("max_outer", o.max_outer);
  get("memory", o.memory);
  get("grad_tol", o.grad_tol);
  get("max_inner_iters", o.max_inner_iters);
  get("step", o.step);
  get("ista_max_iters", o.ista_max_iters);
  get("ista_tol", o.ista_tol);
  get("iht_max_iters", o.iht_max_iters);
  get("iht_tol", o.iht_tol);
  get("irl1_eps_w", o.irl1_eps_w);
  get("irl1_rounds", o.irl1_rounds);
}

void to_json(json& j, const enz_denoise_options& o) {
  j = json{{"eps0", o.eps0},         {"decay", o.decay},     {"stages", o.stages},
           {"eps_w", o.eps_w},       {"scale", o.scale},     {"memory", o.memory},
           {"grad_tol", o.grad_tol}, {"max_inner_iters", o.max_inner_iters}};
}

void from_json(const json& j, enz_denoise_options& o) {
  enz_denoise_options_default(&o);
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("eps0", o.eps0);
  get("decay", o.decay);
  get("stages", o.stages);
  get("eps_w", o.eps_w);
  get("scale", o.scale);
  get("memory", o.memory);
  get("grad_tol", o.grad_tol);
  get("max_inner_iters", o.max_inner_iters);
}

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;
constexpr int kExitInvariant = 4;

struct CliError : std::runtime_error {
  int exit_code;
  CliError(int code, const std::string& what) : std::runtime_error(what), exit_code(code) {}
};

int exit_code_for(enz_status s) {
  switch (s) {
    case ENZ_OK: return kExitOk;
    case ENZ_E_LINE_SEARCH:
    case ENZ_E_NONFINITE:
    case ENZ_E_ZERO_ITERATE:
    case ENZ_E_DELTA_UNAVAILABLE: return kExitSolver;
    case ENZ_E_INTERNAL: return kExitInvariant;
    default: return kExitInput;
  }
}

void check(enz_status s) {
  if (s == ENZ_OK) return;
  throw CliError(exit_code_for(s), std::string(enz_status_name(s)) + ": " + enz_last_error());
}

[[noreturn]] void input_error(const std::string& what) { throw CliError(kExitInput, what); }

template <class T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};
using MatrixPtr = std::unique_ptr<enz_matrix, Deleter<enz_matrix, enz_matrix_destroy>>;
using ResultPtr = std::unique_ptr<enz_result, Deleter<enz_result, enz_result_destroy>>;
using SweepPtr = std::unique_ptr<enz_sweep, Deleter<enz_sweep, enz_sweep_destroy>>;
using ImagePtr = std::unique_ptr<enz_image, Deleter<enz_image, enz_image_destroy>>;
using GridPtr = std::unique_ptr<enz_denoise_grid, Deleter<enz_denoise_grid, enz_denoise_grid_destroy>>;
using DecayPtr = std::unique_ptr<enz_decay_table, Deleter<enz_decay_table, enz_decay_table_destroy>>;
using TablePtr = std::unique_ptr<enz_table, Deleter<enz_table, enz_table_destroy>>;
using BatchPtr = std::unique_ptr<enz_stability_batch, Deleter<enz_stability_batch, enz_stability_batch_destroy>>;

std::string fmt(double v) {
  char buf[64];
  const size_t n = enz_format_double(v, buf, sizeof buf);
  return std::string(buf, n);
}

std::string take_string(char* s) {
  std::string out(s ? s : "");
  enz_free(s);
  return out;
}

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double parse_number(const std::string& s) {
  std::string t = s;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "inf" || t == "+inf" || t == "infinity") return std::numeric_limits<double>::infinity();
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    input_error("not a number: '" + s + "'");
  }
  if (used != s.size()) input_error("not a number: '" + s + "'");
  return v;
}

struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  int points = 0;
};

GridSpec parse_grid(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() != 3) input_error("grid must be lo:hi:points, got '" + s + "'");
  GridSpec g{parse_number(parts[0]), parse_number(parts[1]), static_cast<int>(parse_number(parts[2]))};
  if (!(g.lo > 0.0) || !(g.hi >= g.lo) || g.points < 1) input_error("bad grid '" + s + "'");
  return g;
}

std::vector<double> grid_values(const GridSpec& g) {
  std::vector<double> out;
  if (g.points == 1) return {g.lo};
  const double a = std::log10(g.lo), b = std::log10(g.hi);
  for (int i = 0; i < g.points; ++i) out.push_back(std::pow(10.0, a + (b - a) * i / (g.points - 1)));
  return out;
}

std::vector<std::vector<double>> read_rows(const std::string& path) {
  enz_table* raw = nullptr;
  check(enz_table_read(path.c_str(), &raw));
  TablePtr t(raw);
  std::vector<std::vector<double>> rows(enz_table_rows(t.get()));
  for (size_t i = 0; i < rows.size(); ++i) {
    const double* r = enz_table_row(t.get(), i);
    rows[i].assign(r, r + enz_table_row_length(t.get(), i));
  }
  return rows;
}

std::vector<double> read_vector(const std::string& path) {
  std::vector<double> out;
  for (const auto& row : read_rows(path)) out.insert(out.end(), row.begin(), row.end());
  return out;
}

MatrixPtr read_matrix(const std::string& path) {
  const auto rows = read_rows(path);
  if (rows.empty()) check(ENZ_E_EMPTY_INPUT);
  const size_t cols = rows.front().size();
  std::vector<double> flat;
  for (const auto& row : rows) {
    if (row.size() != cols) input_error("ragged matrix rows in " + path);
    flat.insert(flat.end(), row.begin(), row.end());
  }
  enz_matrix* a = nullptr;
  check(enz_matrix_create(rows.size(), cols, flat.data(), &a));
  return MatrixPtr(a);
}

class Output {
 public:
  explicit Output(fs::path dir) : dir_(std::move(dir)) {}

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = path(name);
    std::ofstream f(p, std::ios::binary);
    f << text;
    if (!f) throw CliError(kExitInput, "IoError: cannot write " + p.string());
    files_.push_back(p.string());
    return p.string();
  }

  fs::path path(const std::string& name) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    return dir_ / name;
  }

  void record(const fs::path& p) { files_.push_back(p.string()); }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::string column_csv(const char* header, const double* v, size_t n) {
  std::string s = std::string(header) + "\n";
  for (size_t i = 0; i < n; ++i) s += fmt(v[i]) + "\n";
  return s;
}

// ---- config resolution: defaults, then --config JSON, then explicit flags --

template <class P>
class Binder {
 public:
  explicit Binder(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* option(const std::string& name, T P::*member, const std::string& desc) {
    CLI::Option* o = app_->add_option(name, cli_.*member, desc);
    o->default_str("");
    bindings_.push_back({o, [member](P& dst, const P& src) { dst.*member = src.*member; }});
    return o;
  }

  CLI::Option* flag(const std::string& name, bool P::*member, const std::string& desc) {
    CLI::Option* o = app_->add_flag(name, cli_.*member, desc);
    bindings_.push_back({o, [member](P& dst, const P& src) { dst.*member = src.*member; }});
    return o;
  }

  /// Option whose value is applied by `apply` after the JSON layer.
  template <class T>
  CLI::Option* custom(const std::string& name, T& storage, std::function<void(P&)> apply, const std::string& desc) {
    CLI::Option* o = app_->add_option(name, storage, desc);
    bindings_.push_back({o, [apply](P& dst, const P&) { apply(dst); }});
    return o;
  }

  P resolve(const std::string& config_path, const std::string& command) const {
    P p{};
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw CliError(kExitInput, "IoError: cannot open " + config_path);
      json j;
      try {
        j = json::parse(f);
        if (j.contains("config") && j.contains("command")) {
          if (j.at("command").get<std::string>() != command)
            input_error("manifest is for command '" + j.at("command").get<std::string>() + "'");
          j = j.at("config");
        }
        p = j.template get<P>();
      } catch (const nlohmann::json::exception& e) {
        input_error(std::string("ParseError: ") + config_path + ": " + e.what());
      }
    }
    for (const auto& [opt, apply] : bindings_)
      if (opt->count() > 0) apply(p, cli_);
    return p;
  }

 private:
  CLI::App* app_;
  P cli_{};
  std::vector<std::pair<CLI::Option*, std::function<void(P&, const P&)>>> bindings_;
};

struct Common {
  std::string config;
  std::string out_dir = ".";
  std::string manifest;
  int threads = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON parameters or a manifest from an earlier run");
  app->add_option("--out-dir", c.out_dir, "Directory for output files")->capture_default_str();
  app->add_option("--manifest", c.manifest, "Manifest path (default <out-dir>/<command>_manifest.json)");
  app->add_option("--threads", c.threads, "Worker threads (default ENZ_THREADS or all cores)");
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ENZ_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void write_manifest(const Common& c, Output& out, const std::string& command, const json& config,
                    std::uint64_t seed, int threads, const std::string& started) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["base_seed"] = seed;
  m["threads"] = threads;
  m["tool_version"] = enz_version();
  m["outputs"] = out.files();
  m["started"] = started;
  m["finished"] = iso_now();
  const fs::path p = c.manifest.empty() ? out.path(command + "_manifest.json") : fs::path(c.manifest);
  std::ofstream f(p, std::ios::binary);
  f << m.dump(2) << "\n";
  if (!f) throw CliError(kExitInput, "IoError: cannot write " + p.string());
}

// ---- measure ---------------------------------------------------------------

struct MeasureParams {
  std::string input;
  std::vector<std::string> alpha{"0", "0.5", "1", "2", "inf"};
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MeasureParams, input, alpha)

int run_measure(const MeasureParams& p, Output& out) {
  if (p.input.empty()) input_error("--input is required");
  const std::vector<double> x = read_vector(p.input);

  enz_decomposition d{};
  check(enz_decompose(x.data(), x.size(), 1.0, &d));
  std::string csv = "quantity,alpha,value\n";
  auto emit = [&](const std::string& name, const std::string& alpha, double v) {
    std::cout << name << (alpha.empty() ? "" : "[alpha=" + alpha + "]") << "=" << fmt(v) << "\n";
    csv += name + "," + alpha + "," + fmt(v) + "\n";
  };
  emit("l0", "", static_cast<double>(d.l0));
  emit("entropy_bits", "", d.entropy_bits);
  emit("enz", "", d.enz);
  emit("divergence_bits", "", d.divergence_bits);
  emit("efficiency", "", d.efficiency);
  for (const auto& a : p.alpha) {
    double v = 0.0;
    const double alpha = parse_number(a);
    check(enz_renyi(x.data(), x.size(), alpha, &v));
    emit("renyi_enz", fmt(alpha), v);
  }

  const double inf = std::numeric_limits<double>::infinity();
  double r2 = 0.0, rinf = 0.0;
  check(enz_renyi(x.data(), x.size(), 2.0, &r2));
  check(enz_renyi(x.data(), x.size(), inf, &rinf));
  const double chain[] = {static_cast<double>(d.l0), d.enz, r2, rinf};
  const char* names[] = {"l0", "enz_1", "enz_2", "enz_inf"};
  std::cout << "hierarchy:";
  bool ordered = true;
  for (int i = 0; i < 4; ++i) {
    std::cout << (i ? " >= " : " ") << names[i] << "=" << fmt(chain[i]);
    if (i > 0 && chain[i] > chain[i - 1] * (1.0 + 1e-10)) ordered = false;
  }
  std::cout << "\n";
  out.write("measure.csv", csv);
  if (!ordered) throw CliError(kExitInvariant, "ENZ hierarchy violated");
  return kExitOk;
}

// ---- recover ---------------------------------------------------------------

struct SynthParams {
  std::size_t m = 64;
  std::size_t n = 512;
  std::size_t k = 8;
  double r = 0.1;
  double cr = 3.0;
  double eta = 0.01;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthParams, m, n, k, r, cr, eta)

struct RecoverParams {
  std::string matrix;
  std::string observation;
  std::string truth;
  bool use_synth = false;
  SynthParams synth;
  std::string method = "entropy";
  std::vector<double> lambda;
  std::string lambda_grid;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  enz_solver_options solver = [] {
    enz_solver_options o;
    enz_solver_options_default(&o);
    return o;
  }();
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RecoverParams, matrix, observation, truth, use_synth, synth, method,
                                                lambda, lambda_grid, k, seed, solver)

enz_method parse_method(const std::string& s) {
  if (s == "entropy") return ENZ_METHOD_ENTROPY;
  if (s == "ista" || s == "l1") return ENZ_METHOD_ISTA;
  if (s == "iht" || s == "l0") return ENZ_METHOD_IHT;
  if (s == "irl1" || s == "logsum") return ENZ_METHOD_IRL1;
  input_error("unknown method '" + s + "'");
}

void apply_synth_tokens(SynthParams& s, const std::vector<std::string>& tokens) {
  for (const auto& tok : tokens) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) input_error("--synth expects key=value, got '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const double v = parse_number(tok.substr(eq + 1));
    auto count = [&](std::size_t& field) {
      if (v < 0 || v != std::floor(v)) input_error("--synth " + key + " must be a nonnegative integer");
      field = static_cast<std::size_t>(v);
    };
    if (key == "m") count(s.m);
    else if (key == "n") count(s.n);
    else if (key == "k") count(s.k);
    else if (key == "r") s.r = v;
    else if (key == "cr") s.cr = v;
    else if (key == "eta") s.eta = v;
    else input_error("unknown --synth key '" + key + "'");
  }
}

int run_recover(const RecoverParams& p, Output& out) {
  const enz_method method = parse_method(p.method);
  MatrixPtr a;
  std::vector<double> b, truth;
  if (p.use_synth) {
    const SynthParams& s = p.synth;
    enz_matrix* raw = nullptr;
    check(enz_matrix_correlated_gaussian(s.m, s.n, s.r, p.seed, &raw));
    a.reset(raw);
    truth.resize(s.n);
    check(enz_sparse_signal(s.n, s.k, s.cr, p.seed + 1, truth.data()));
    std::vector<double> clean(s.m);
    check(enz_matrix_apply(a.get(), truth.data(), s.n, clean.data(), s.m));
    b.resize(s.m);
    check(enz_add_noise(clean.data(), s.m, s.eta, p.seed + 2, b.data(), nullptr));
    out.write("x_true.csv", column_csv("x_true", truth.data(), truth.size()));
    out.write("observation.csv", column_csv("b", b.data(), b.size()));
  } else {
    if (p.matrix.empty() || p.observation.empty()) input_error("need --matrix and --observation, or --synth");
    a = read_matrix(p.matrix);
    b = read_vector(p.observation);
    if (!p.truth.empty()) truth = read_vector(p.truth);
  }
  const size_t m = enz_matrix_rows(a.get()), n = enz_matrix_cols(a.get());
  if (b.size() != m) check(ENZ_E_DIMENSION_MISMATCH);
  if (!truth.empty() && truth.size() != n) check(ENZ_E_DIMENSION_MISMATCH);

  enz_result* raw = nullptr;
  if (method == ENZ_METHOD_IHT) {
    const size_t k = p.k > 0 ? p.k : (p.use_synth ? p.synth.k : 0);
    if (k == 0) input_error("iht needs --k");
    check(enz_recover(a.get(), b.data(), m, method, static_cast<double>(k), &p.solver, &raw));
  } else if (!p.lambda.empty()) {
    if (p.lambda.size() != 1) input_error("--lambda takes one value");
    check(enz_recover(a.get(), b.data(), m, method, p.lambda.front(), &p.solver, &raw));
  } else {
    if (truth.empty()) input_error("lambda grid search needs a ground truth (--truth or --synth)");
    const GridSpec g = parse_grid(p.lambda_grid.empty() ? "1e-3:1e5:17" : p.lambda_grid);
    check(enz_recover_grid(a.get(), b.data(), m, method, g.lo, g.hi, g.points, truth.data(), n, &p.solver, &raw));
  }
  ResultPtr res(raw);

  const double* x = enz_result_x(res.get());
  out.write("x_hat.csv", column_csv("x_hat", x, enz_result_size(res.get())));
  std::string trace = "iteration,objective\n";
  const double* t = enz_result_trace(res.get());
  for (size_t i = 0; i < enz_result_trace_size(res.get()); ++i) trace += std::to_string(i) + "," + fmt(t[i]) + "\n";
  out.write("trace.csv", trace);
  if (enz_result_grid_size(res.get()) > 0) {
    std::string grid = "lambda,rel_error\n";
    for (size_t i = 0; i < enz_result_grid_size(res.get()); ++i)
      grid += fmt(enz_result_grid_lambda(res.get(), i)) + "," + fmt(enz_result_grid_error(res.get(), i)) + "\n";
    out.write("recover_grid.csv", grid);
  }

  std::cout << "method=" << enz_method_name(method) << "\n";
  if (method != ENZ_METHOD_IHT) std::cout << "lambda=" << fmt(enz_result_lambda(res.get())) << "\n";
  std::cout << "converged=" << (enz_result_converged(res.get()) ? "true" : "false") << "\n";
  if (!truth.empty()) {
    double err = 0.0;
    check(enz_relative_error(x, truth.data(), n, &err));
    std::cout << "rel_error=" << fmt(err) << "\n";
    std::cout << "success=" << (err <= 0.05 ? "true" : "false") << "\n";
  }
  return kExitOk;
}

// ---- sweep -----------------------------------------------------------------

struct SweepParams {
  std::vector<std::string> methods;
  std::vector<std::size_t> k_grid;
  std::vector<double> eta;
  int trials = 0;
  std::uint64_t seed = 0;
  std::size_t m = 0;
  std::size_t n = 0;
  double r = 0.0;
  double dynamic_range = 0.0;
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  int lambda_points = 0;
  bool record_timing = false;
  enz_solver_options solver{};

  SweepParams() {
    enz_sweep_config c;
    enz_sweep_config_default(&c);
    for (size_t i = 0; i < c.method_count; ++i) methods.emplace_back(enz_method_name(c.methods[i]));
    k_grid.assign(c.k_grid, c.k_grid + c.k_count);
    eta.assign(c.eta_grid, c.eta_grid + c.eta_count);
    trials = c.trials;
    seed = c.base_seed;
    m = c.m;
    n = c.n;
    r = c.r;
    dynamic_range = c.dynamic_range;
    lambda_lo = c.lambda_lo;
    lambda_hi = c.lambda_hi;
    lambda_points = c.lambda_points;
    record_timing = c.record_timing != 0;
    solver = c.options;
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SweepParams, methods, k_grid, eta, trials, seed, m, n, r,
                                                dynamic_range, lambda_lo, lambda_hi, lambda_points, record_timing,
                                                solver)

int run_sweep(const SweepParams& p, int threads, Output& out) {
  std::vector<enz_method> methods;
  for (const auto& s : p.methods) methods.push_back(parse_method(s));
  enz_sweep_config c;
  enz_sweep_config_default(&c);
  c.methods = methods.data();
  c.method_count = methods.size();
  c.k_grid = p.k_grid.data();
  c.k_count = p.k_grid.size();
  c.eta_grid = p.eta.data();
  c.eta_count = p.eta.size();
  c.trials = p.trials;
  c.base_seed = p.seed;
  c.m = p.m;
  c.n = p.n;
  c.r = p.r;
  c.dynamic_range = p.dynamic_range;
  c.lambda_lo = p.lambda_lo;
  c.lambda_hi = p.lambda_hi;
  c.lambda_points = p.lambda_points;
  c.threads = threads;
  c.record_timing = p.record_timing ? 1 : 0;
  c.options = p.solver;

  enz_sweep* raw = nullptr;
  check(enz_sweep_run(&c, &raw));
  SweepPtr sweep(raw);
  char* text = nullptr;
  check(enz_sweep_trials_csv(sweep.get(), &text));
  out.write("sweep_trials.csv", take_string(text));
  check(enz_sweep_summary_csv(sweep.get(), &text));
  const std::string summary = take_string(text);
  out.write("sweep_summary.csv", summary);
  std::cout << summary;
  if (const size_t f = enz_sweep_failure_count(sweep.get())) std::cerr << "warning: " << f << " trials failed\n";
  return kExitOk;
}

// ---- denoise ---------------------------------------------------------------

struct DenoiseParams {
  std::string input;
  std::size_t size = 128;
  double sigma = 0.05;
  std::vector<std::string> methods{"tv", "logsum", "entropy"};
  std::vector<double> lambda;
  std::string lambda_grid = "1e-4:1e2:13";
  std::uint64_t seed = 0;
  enz_denoise_options options = [] {
    enz_denoise_options o;
    enz_denoise_options_default(&o);
    return o;
  }();
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DenoiseParams, input, size, sigma, methods, lambda, lambda_grid, seed,
                                                options)

enz_regularizer parse_regularizer(const std::string& s) {
  if (s == "tv") return ENZ_REG_TV;
  if (s == "logsum") return ENZ_REG_LOGSUM;
  if (s == "entropy" || s == "entropy_u") return ENZ_REG_ENTROPY;
  input_error("unknown regularizer '" + s + "'");
}

int run_denoise(const DenoiseParams& p, int threads, Output& out) {
  enz_image* raw = nullptr;
  if (p.input.empty()) check(enz_image_synthetic(p.size, &raw));
  else check(enz_image_read_pgm(p.input.c_str(), &raw));
  ImagePtr clean(raw);
  check(enz_image_awgn(clean.get(), p.sigma, p.seed, &raw));
  ImagePtr noisy(raw);
  {
    const fs::path path = out.path("noisy.pgm");
    check(enz_image_write_pgm(noisy.get(), path.string().c_str()));
    out.record(path);
  }
  double psnr0 = 0.0, ssim0 = 0.0;
  check(enz_psnr(noisy.get(), clean.get(), &psnr0));
  check(enz_ssim(noisy.get(), clean.get(), &ssim0));

  std::string metrics = "method,lambda,psnr_db,ssim\n";
  metrics += "noisy,," + fmt(psnr0) + "," + fmt(ssim0) + "\n";
  std::string grid_csv = "method,lambda,psnr_db,ssim\n";
  std::cout << "noisy psnr_db=" << fmt(psnr0) << " ssim=" << fmt(ssim0) << "\n";

  const std::vector<double> lambdas = p.lambda.empty() ? grid_values(parse_grid(p.lambda_grid)) : p.lambda;
  for (const auto& name : p.methods) {
    const enz_regularizer reg = parse_regularizer(name);
    enz_denoise_grid* g = nullptr;
    check(enz_denoise_grid_run(noisy.get(), clean.get(), reg, lambdas.data(), lambdas.size(), &p.options, threads, &g));
    GridPtr grid(g);
    for (size_t i = 0; i < enz_denoise_grid_size(grid.get()); ++i) {
      double l = 0, ps = 0, ss = 0;
      check(enz_denoise_grid_entry(grid.get(), i, &l, &ps, &ss));
      grid_csv += std::string(enz_regularizer_name(reg)) + "," + fmt(l) + "," + fmt(ps) + "," + fmt(ss) + "\n";
    }
    double l = 0, ps = 0, ss = 0;
    check(enz_denoise_grid_entry(grid.get(), enz_denoise_grid_best(grid.get()), &l, &ps, &ss));
    metrics += std::string(enz_regularizer_name(reg)) + "," + fmt(l) + "," + fmt(ps) + "," + fmt(ss) + "\n";
    std::cout << enz_regularizer_name(reg) << " lambda=" << fmt(l) << " psnr_db=" << fmt(ps) << " ssim=" << fmt(ss)
              << "\n";
    const fs::path path = out.path(std::string("denoised_") + enz_regularizer_name(reg) + ".pgm");
    check(enz_image_write_pgm(enz_denoise_grid_best_image(grid.get()), path.string().c_str()));
    out.record(path);
  }
  out.write("denoise_metrics.csv", metrics);
  out.write("denoise_grid.csv", grid_csv);
  return kExitOk;
}

// ---- theory ----------------------------------------------------------------

struct TheoryParams {
  std::string matrix;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  std::string ensemble = "orthonormal_bases";
  bool normalize_columns = false;
  double tail_scale = 0.0;
  double perturbation = 0.0;
  int instances = 0;
  int matrices = 0;
  std::uint64_t budget = 0;
  std::uint64_t seed = 0;
  int prop1_trials = 200;

  TheoryParams() {
    enz_stability_batch_config c;
    enz_stability_batch_config_default(&c);
    m = c.m;
    n = c.n;
    k = c.k;
    ensemble = c.ensemble == ENZ_ENSEMBLE_GAUSSIAN ? "gaussian" : "orthonormal_bases";
    normalize_columns = c.normalize_columns != 0;
    tail_scale = c.tail_scale;
    perturbation = c.perturbation;
    instances = c.instances;
    matrices = c.matrices;
    budget = c.budget;
    seed = c.seed;
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TheoryParams, matrix, m, n, k, ensemble, normalize_columns,
                                                tail_scale, perturbation, instances, matrices, budget, seed,
                                                prop1_trials)

enz_ensemble parse_ensemble(const std::string& s) {
  if (s == "orthonormal_bases" || s == "bases") return ENZ_ENSEMBLE_ORTHONORMAL_BASES;
  if (s == "gaussian") return ENZ_ENSEMBLE_GAUSSIAN;
  input_error("unknown ensemble '" + s + "'");
}

std::string rip_row(size_t index, const enz_rip_estimate& e) {
  return std::to_string(index) + "," + std::to_string(e.order) + "," + fmt(e.delta) + "," +
         (e.exhaustive ? "exhaustive" : "sampled") + "," + std::to_string(e.supports) + "," +
         (e.lower_bound ? "true" : "false") + "\n";
}

std::string report_row(const enz_stability_report& r) {
  return fmt(r.lhs_hT) + "," + fmt(r.bound_hT) + "," + fmt(r.lhs_eff) + "," + fmt(r.bound_eff) + "," + fmt(r.delta) +
         "," + ((r.holds_hT && r.holds_eff) ? "1" : "0") + "\n";
}

int run_theory(const TheoryParams& p, int threads, Output& out) {
  const enz_ensemble ens = parse_ensemble(p.ensemble);
  const std::string rip_header = "matrix,order,delta,method,supports,lower_bound\n";
  const std::string stab_header = "lhs_hT,bound_hT,lhs_eff,bound_eff,delta,holds\n";
  size_t violations = 0;

  MatrixPtr a;
  if (!p.matrix.empty()) {
    a = read_matrix(p.matrix);
  } else {
    enz_matrix* raw = nullptr;
    check(enz_matrix_random(p.m, p.n, ens, p.normalize_columns ? 1 : 0, p.seed, &raw));
    a.reset(raw);
  }
  const size_t n = enz_matrix_cols(a.get());
  const size_t order = std::min(2 * p.k, n);
  enz_rip_estimate est{};
  check(enz_rip_constant(a.get(), order, p.budget, p.seed, threads, &est));
  std::cout << "order=" << est.order << "\n";
  std::cout << "delta=" << fmt(est.delta) << "\n";
  std::cout << "lower_bound=" << (est.lower_bound ? "true" : "false") << "\n";
  std::cout << "supports=" << est.supports << "\n";

  enz_prop1_report prop{};
  if (est.delta < 1.0) {
    check(enz_check_prop1(a.get(), order, est.delta, p.prop1_trials, p.seed, &prop));
    std::cout << "prop1_checks=" << prop.lower_checks + prop.cross_checks
              << " prop1_violations=" << prop.lower_violations + prop.cross_violations << "\n";
    if (!est.lower_bound) violations += static_cast<size_t>(prop.lower_violations + prop.cross_violations);
  }

  if (!p.matrix.empty()) {
    out.write("theory_rip.csv", rip_header + rip_row(0, est));
    if (est.lower_bound || est.delta >= 1.0) {
      std::cout << "stability=skipped (" << (est.lower_bound ? "delta is a lower bound" : "delta >= 1") << ")\n";
    } else {
      std::string csv = stab_header;
      size_t holds = 0;
      std::vector<double> x(n), y(n);
      for (int i = 0; i < p.instances; ++i) {
        check(enz_random_signal_pair(n, p.k, p.tail_scale, p.perturbation, p.seed + static_cast<std::uint64_t>(i),
                                     x.data(), y.data()));
        enz_stability_report r{};
        check(enz_verify_stability(a.get(), x.data(), y.data(), n, p.k, est.delta, &r));
        csv += report_row(r);
        if (r.holds_hT && r.holds_eff) ++holds;
        else ++violations;
      }
      out.write("theory_stability.csv", csv);
      std::cout << "instances=" << p.instances << " holds=" << holds << "\n";
    }
  } else {
    enz_stability_batch_config c;
    enz_stability_batch_config_default(&c);
    c.m = p.m;
    c.n = p.n;
    c.k = p.k;
    c.ensemble = ens;
    c.normalize_columns = p.normalize_columns ? 1 : 0;
    c.tail_scale = p.tail_scale;
    c.perturbation = p.perturbation;
    c.instances = p.instances;
    c.matrices = p.matrices;
    c.budget = p.budget;
    c.seed = p.seed;
    c.threads = threads;
    enz_stability_batch* raw = nullptr;
    check(enz_stability_batch_run(&c, &raw));
    BatchPtr batch(raw);
    std::string rip = rip_header;
    for (size_t i = 0; i < enz_stability_batch_estimate_count(batch.get()); ++i) {
      enz_rip_estimate e{};
      check(enz_stability_batch_estimate(batch.get(), i, &e));
      rip += rip_row(i, e);
    }
    out.write("theory_rip.csv", rip);
    char* text = nullptr;
    check(enz_stability_batch_csv(batch.get(), &text));
    out.write("theory_stability.csv", take_string(text));
    size_t holds = 0;
    const size_t total = enz_stability_batch_size(batch.get());
    for (size_t i = 0; i < total; ++i) {
      enz_stability_report r{};
      check(enz_stability_batch_report(batch.get(), i, &r));
      if (r.holds_hT && r.holds_eff) ++holds;
      else ++violations;
    }
    std::cout << "instances=" << total << " holds=" << holds
              << " skipped=" << enz_stability_batch_skipped(batch.get()) << "\n";
  }
  std::cout << "violations=" << violations << "\n";
  if (violations > 0) throw CliError(kExitInvariant, "stability or isometry bound violated");
  return kExitOk;
}

// ---- decay -----------------------------------------------------------------

struct DecayParams {
  std::vector<std::string> inputs;
  bool tv = false;
  bool split_directions = false;
  std::vector<double> percentiles{5, 25, 80, 95};
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DecayParams, inputs, tv, split_directions, percentiles)

bool is_pgm(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm";
}

int run_decay(const DecayParams& p, Output& out) {
  if (p.inputs.empty()) input_error("--input is required");
  std::vector<std::vector<double>> series;
  for (const auto& path : p.inputs) {
    if (p.tv || is_pgm(path)) {
      enz_image* raw = nullptr;
      check(enz_image_read_pgm(path.c_str(), &raw));
      ImagePtr img(raw);
      const size_t count = enz_image_height(img.get()) * enz_image_width(img.get());
      std::vector<double> dx(count), dy(count);
      check(enz_image_gradient(img.get(), dx.data(), dy.data()));
      if (p.split_directions) {
        series.push_back(std::move(dx));
        series.push_back(std::move(dy));
      } else {
        dx.insert(dx.end(), dy.begin(), dy.end());
        series.push_back(std::move(dx));
      }
    } else {
      auto rows = read_rows(path);
      const bool column = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.size() == 1; });
      if (column) {
        std::vector<double> s;
        for (const auto& r : rows) s.push_back(r.front());
        series.push_back(std::move(s));
      } else {
        for (auto& r : rows) series.push_back(std::move(r));
      }
    }
  }
  std::vector<const double*> ptrs;
  std::vector<size_t> lengths;
  for (const auto& s : series) {
    ptrs.push_back(s.data());
    lengths.push_back(s.size());
  }
  enz_decay_table* raw = nullptr;
  check(enz_decay_profile(ptrs.data(), lengths.data(), series.size(), p.percentiles.data(), p.percentiles.size(),
                          &raw));
  DecayPtr table(raw);
  char* text = nullptr;
  check(enz_decay_table_csv(table.get(), &text));
  out.write("decay.csv", take_string(text));
  std::cout << "series=" << series.size() << " length=" << enz_decay_table_length(table.get()) << "\n";
  return kExitOk;
}

template <class P>
json to_config(const P& p) {
  json j = p;
  return j;
}

template <class P>
std::uint64_t seed_of(const P& p) {
  if constexpr (requires { p.seed; }) return p.seed;
  else return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Effective number of nonzeros: measures, recovery, denoising and theory checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(enz_version()));

  Common common;
  std::vector<std::function<int()>> runners;
  const std::string started = iso_now();

  auto finish = [&](const std::string& command, auto run, const auto& params, int threads) {
    Output out(common.out_dir);
    const int rc = run(out);
    write_manifest(common, out, command, to_config(params), seed_of(params), threads, started);
    return rc;
  };

  std::function<int()> selected;

  auto* measure = app.add_subcommand("measure", "Sparsity measures of one vector");
  add_common(measure, common);
  Binder<MeasureParams> mb(measure);
  mb.option("--input", &MeasureParams::input, "CSV vector");
  mb.option("--alpha", &MeasureParams::alpha, "Renyi orders (numbers or inf)")->delimiter(',');
  measure->callback([&] {
    selected = [&] {
      const MeasureParams p = mb.resolve(common.config, "measure");
      return finish("measure", [&](Output& o) { return run_measure(p, o); }, p, 1);
    };
  });

  auto* recover = app.add_subcommand("recover", "Sparse recovery from linear measurements");
  add_common(recover, common);
  Binder<RecoverParams> rb(recover);
  std::vector<std::string> synth_tokens;
  rb.option("--matrix", &RecoverParams::matrix, "Sensing matrix CSV (one row per line)");
  rb.option("--observation", &RecoverParams::observation, "Observation vector CSV");
  rb.option("--truth", &RecoverParams::truth, "Ground-truth vector CSV");
  rb.custom(
        "--synth", synth_tokens,
        [&](RecoverParams& p) {
          p.use_synth = true;
          apply_synth_tokens(p.synth, synth_tokens);
        },
        "Synthetic problem: m= n= k= r= cr= eta=")
      ->expected(1, -1);
  rb.option("--method", &RecoverParams::method, "entropy | ista | iht | irl1");
  rb.option("--lambda", &RecoverParams::lambda, "Fixed regularization weight")->expected(1);
  rb.option("--lambda-grid", &RecoverParams::lambda_grid, "lo:hi:points log grid scored against the truth");
  rb.option("--k", &RecoverParams::k, "Sparsity level for iht");
  rb.option("--seed", &RecoverParams::seed, "Base seed");
  recover->callback([&] {
    selected = [&] {
      const RecoverParams p = rb.resolve(common.config, "recover");
      return finish("recover", [&](Output& o) { return run_recover(p, o); }, p, 1);
    };
  });

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo recovery success sweep");
  add_common(sweep, common);
  Binder<SweepParams> sb(sweep);
  sb.option("--methods", &SweepParams::methods, "Methods")->delimiter(',');
  sb.option("--k-grid", &SweepParams::k_grid, "Sparsity levels")->delimiter(',');
  sb.option("--eta", &SweepParams::eta, "Relative noise levels")->delimiter(',');
  sb.option("--trials", &SweepParams::trials, "Trials per cell");
  sb.option("--seed", &SweepParams::seed, "Base seed; trial t uses seed + t");
  sb.option("--m", &SweepParams::m, "Measurements");
  sb.option("--n", &SweepParams::n, "Signal length");
  sb.option("--r", &SweepParams::r, "Column correlation");
  sb.option("--dynamic-range", &SweepParams::dynamic_range, "log10 max/min magnitude");
  sb.option("--lambda-lo", &SweepParams::lambda_lo, "Smallest lambda");
  sb.option("--lambda-hi", &SweepParams::lambda_hi, "Largest lambda");
  sb.option("--lambda-points", &SweepParams::lambda_points, "Grid points");
  sb.flag("--record-timing", &SweepParams::record_timing, "Fill wall_time_s");
  sweep->callback([&] {
    selected = [&] {
      const SweepParams p = sb.resolve(common.config, "sweep");
      const int threads = resolve_threads(common.threads);
      return finish("sweep", [&](Output& o) { return run_sweep(p, threads, o); }, p, threads);
    };
  });

  auto* denoise = app.add_subcommand("denoise", "Image denoising with a lambda grid");
  add_common(denoise, common);
  Binder<DenoiseParams> db(denoise);
  db.option("--input", &DenoiseParams::input, "Clean PGM (default: built-in synthetic scene)");
  db.option("--size", &DenoiseParams::size, "Synthetic scene size");
  db.option("--sigma", &DenoiseParams::sigma, "Noise standard deviation");
  db.option("--methods", &DenoiseParams::methods, "tv,logsum,entropy")->delimiter(',');
  db.option("--lambda", &DenoiseParams::lambda, "Fixed lambda values")->delimiter(',');
  db.option("--lambda-grid", &DenoiseParams::lambda_grid, "lo:hi:points");
  db.option("--seed", &DenoiseParams::seed, "Noise seed");
  denoise->callback([&] {
    selected = [&] {
      const DenoiseParams p = db.resolve(common.config, "denoise");
      const int threads = resolve_threads(common.threads);
      return finish("denoise", [&](Output& o) { return run_denoise(p, threads, o); }, p, threads);
    };
  });

  auto* theory = app.add_subcommand("theory", "Restricted isometry and stability checks");
  add_common(theory, common);
  Binder<TheoryParams> tb(theory);
  tb.option("--matrix", &TheoryParams::matrix, "Matrix CSV instead of random draws");
  tb.option("--m", &TheoryParams::m, "Rows");
  tb.option("--n", &TheoryParams::n, "Columns");
  tb.option("--k", &TheoryParams::k, "Sparsity; the isometry order is 2k");
  tb.option("--ensemble", &TheoryParams::ensemble, "orthonormal_bases | gaussian");
  tb.flag("--normalize-columns", &TheoryParams::normalize_columns, "Scale columns to unit norm");
  tb.option("--tail-scale", &TheoryParams::tail_scale, "Tail entry std");
  tb.option("--perturbation", &TheoryParams::perturbation, "Dominant entry perturbation");
  tb.option("--instances", &TheoryParams::instances, "Signal pairs");
  tb.option("--matrices", &TheoryParams::matrices, "Distinct matrices (0: one per instance)");
  tb.option("--budget", &TheoryParams::budget, "Largest support count enumerated exhaustively");
  tb.option("--prop1-trials", &TheoryParams::prop1_trials, "Random supports for the isometry checks");
  tb.option("--seed", &TheoryParams::seed, "Base seed");
  theory->callback([&] {
    selected = [&] {
      const TheoryParams p = tb.resolve(common.config, "theory");
      const int threads = resolve_threads(common.threads);
      return finish("theory", [&](Output& o) { return run_theory(p, threads, o); }, p, threads);
    };
  });

  auto* decay = app.add_subcommand("decay", "Sorted magnitude decay profiles");
  add_common(decay, common);
  Binder<DecayParams> yb(decay);
  yb.option("--input", &DecayParams::inputs, "CSV or PGM files");
  yb.flag("--tv", &DecayParams::tv, "Use gradient coefficients of PGM inputs");
  yb.flag("--split-directions", &DecayParams::split_directions, "Separate horizontal and vertical series");
  yb.option("--percentiles", &DecayParams::percentiles, "Envelope percentiles")->delimiter(',');
  decay->callback([&] {
    selected = [&] {
      const DecayParams p = yb.resolve(common.config, "decay");
      return finish("decay", [&](Output& o) { return run_decay(p, o); }, p, 1);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    return selected();
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
}
