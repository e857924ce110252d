// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//   enz_acceptance            run all criteria
//   enz_acceptance --only N   run criterion N

#include "denoise.hpp"
#include "measures.hpp"
#include "random.hpp"
#include "sensing.hpp"
#include "solvers.hpp"
#include "surrogates.hpp"
#include "theory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#ifndef ENZ_CLI_PATH
#define ENZ_CLI_PATH "enz"
#endif

using namespace enz;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int hardware_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// n in [1, 256], random support size, magnitudes log-uniform over up to six decades.
Vector random_vector(Rng& rng) {
  const auto n = static_cast<Index>(1 + rng.below(256));
  const auto k = static_cast<Index>(1 + rng.below(static_cast<std::uint64_t>(n)));
  const double decades = 6.0 * rng.uniform();
  Vector x = Vector::Zero(n);
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Index j = 0; j < k; ++j) {
    const auto pick = j + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - j)));
    std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(pick)]);
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    x(idx[static_cast<std::size_t>(j)]) = sign * std::pow(10.0, decades * rng.uniform());
  }
  return x;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  double worst_identity = 0.0, min_div = INFINITY;
  for (int t = 0; t < 1000; ++t) {
    const Vector x = random_vector(rng);
    for (double alpha : {0.5, 1.0, 2.0, 5.0}) {
      const auto r = measures::decompose(x, alpha);
      worst_identity = std::max(
          worst_identity, std::abs(r.entropy_bits - (std::log2(static_cast<double>(r.l0)) - r.divergence_bits)));
      min_div = std::min(min_div, r.divergence_bits);
    }
  }
  const double elapsed = seconds_since(t0);
  return {worst_identity <= 1e-10 && min_div >= -1e-12 && elapsed < 5.0,
          "max identity error " + fmt("%.3g", worst_identity) + ", min divergence " + fmt("%.3g", min_div) + ", " +
              fmt("%.2f", elapsed) + " s"};
}

Outcome criterion2() {
  Rng rng(1002);
  double worst2 = 0.0, worst_inf = 0.0;
  for (int t = 0; t < 500; ++t) {
    const Vector x = random_vector(rng);
    const double l1 = x.lpNorm<1>();
    worst2 = std::max(worst2, std::abs(measures::renyi_enz(x, 2.0) - l1 * l1 / x.squaredNorm()));
    worst_inf = std::max(worst_inf, std::abs(measures::renyi_enz(x, 1000.0) - l1 / x.lpNorm<Eigen::Infinity>()));
  }
  return {worst2 <= 1e-10 && worst_inf <= 1e-3,
          "max |ENZ_2 - l1^2/l2^2| " + fmt("%.3g", worst2) + ", max |ENZ_1000 - l1/linf| " + fmt("%.3g", worst_inf)};
}

std::vector<double> alpha_grid50() {
  std::vector<double> g{0.0, 1.0, 2.0, measures::kInfiniteOrder};
  for (int i = 0; i < 46; ++i) g.push_back(std::pow(10.0, -2.0 + 4.0 * i / 45.0));
  std::sort(g.begin(), g.end());
  return g;
}

Outcome criterion3() {
  Rng rng(1003);
  const auto grid = alpha_grid50();
  double worst_rise = 0.0;
  for (int t = 0; t < 500; ++t) {
    const Vector x = random_vector(rng);
    double prev = INFINITY;
    for (double a : grid) {
      const double v = measures::renyi_enz(x, a);
      if (prev < INFINITY) worst_rise = std::max(worst_rise, v - prev);
      prev = v;
    }
  }
  return {grid.size() == 50 && worst_rise <= 1e-10,
          std::to_string(grid.size()) + "-point grid, largest increase " + fmt("%.3g", worst_rise)};
}

Outcome criterion4() {
  Rng rng(1004);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Vector x = random_vector(rng);
    const double hu = surrogates::unnormalized_entropy(x, x.lpNorm<1>(), surrogates::LogBase::Two);
    worst = std::max(worst, std::abs(hu - (measures::shannon_enz(x).entropy_bits + 1.0)));
  }
  return {worst <= 1e-10, "max |H_u - (H + 1)| " + fmt("%.3g", worst) + " over 1000 vectors"};
}

template <class F>
Vector central_difference(F f, const Vector& x, double h) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

Outcome criterion5() {
  Rng rng(1005);
  double worst_entropy = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto n = static_cast<Index>(1 + rng.below(16));
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = rng.normal() * std::pow(10.0, -2.0 * rng.uniform());
    const double c = 0.1 + 3.0 * rng.uniform();
    const double eps = std::pow(10.0, -1.0 - 4.0 * rng.uniform());
    const auto vg = surrogates::smoothed_entropy_value_grad(x, c, eps);
    const Vector fd = central_difference(
        [&](const Vector& z) { return surrogates::smoothed_entropy_value_grad(z, c, eps).value; }, x, 1e-6);
    worst_entropy = std::max(worst_entropy, (vg.grad - fd).norm() / std::max(1.0, fd.norm()));
  }

  double worst_composite = 0.0;
  const denoise::DenoiseConfig cfg;
  const denoise::Regularizer regs[3] = {denoise::Regularizer::Tv, denoise::Regularizer::LogSum,
                                        denoise::Regularizer::Entropy};
  for (int t = 0; t < 100; ++t) {
    const auto h = static_cast<Index>(2 + rng.below(7)), w = static_cast<Index>(2 + rng.below(7));
    denoise::Image y(h, w);
    Vector x(h * w);
    for (Index i = 0; i < h * w; ++i) {
      y.pixels(i) = rng.uniform();
      x(i) = rng.uniform();
    }
    const double lambda = std::pow(10.0, -2.0 + 2.0 * rng.uniform());
    const double eps = std::pow(10.0, -1.0 - 3.0 * rng.uniform());
    const auto reg = regs[t % 3];
    Vector grad, scratch;
    denoise::composite_value_grad(x, y, reg, lambda, eps, cfg, grad);
    const Vector fd = central_difference(
        [&](const Vector& v) { return denoise::composite_value_grad(v, y, reg, lambda, eps, cfg, scratch); }, x,
        1e-6);
    worst_composite = std::max(worst_composite, (grad - fd).norm() / std::max(1.0, fd.norm()));
  }
  return {worst_entropy <= 1e-5 && worst_composite <= 1e-5,
          "entropy " + fmt("%.3g", worst_entropy) + ", composite " + fmt("%.3g", worst_composite)};
}

Outcome criterion6() {
  Rng rng(1006);
  double worst = 0.0;
  bool l0_exact = true;
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<Index>(2 + rng.below(255));
    const auto k = static_cast<Index>(1 + rng.below(static_cast<std::uint64_t>(n - 1)));
    Vector x = Vector::Zero(n);
    for (Index i = 0; i < k; ++i) x(i) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + rng.uniform());
    Vector perturbed = x;
    for (Index i = k; i < n; ++i) perturbed(i) = rng.uniform() < 0.5 ? -1e-8 : 1e-8;
    worst = std::max(worst, std::abs(measures::shannon_enz(perturbed).enz - measures::shannon_enz(x).enz));
    l0_exact = l0_exact && measures::count_nonzeros(perturbed) - measures::count_nonzeros(x) == n - k;
  }
  return {worst <= 1e-4 && l0_exact,
          "max ENZ change " + fmt("%.3g", worst) + (l0_exact ? ", l0 rises by n-k" : ", l0 mismatch")};
}

Outcome criterion7() {
  const auto t0 = Clock::now();
  sensing::SweepConfig cfg;
  cfg.methods = {sensing::Method::Entropy, sensing::Method::Ista};
  cfg.k_grid = {4, 8, 12, 16};
  cfg.eta_grid = {0.01, 0.02, 0.03};
  cfg.trials = 20;
  cfg.threads = hardware_threads();
  const auto result = sensing::success_sweep(cfg);
  const double elapsed = seconds_since(t0);

  std::map<std::pair<sensing::Method, Index>, std::map<double, double>> rate;
  for (const auto& c : result.cells) rate[{c.method, c.k}][c.eta] = c.success_rate;

  bool direction = true;
  std::ostringstream detail;
  detail << "eta=0.01 entropy/l1:";
  for (Index k : cfg.k_grid) {
    const double e = rate[{sensing::Method::Entropy, k}][0.01];
    const double l = rate[{sensing::Method::Ista, k}][0.01];
    detail << " k" << k << " " << e << "/" << l;
    if (l < 1.0 && e < l) direction = false;
  }

  bool monotone = true;
  for (sensing::Method m : cfg.methods) {
    std::vector<double> means;
    for (double eta : cfg.eta_grid) {
      double s = 0.0;
      for (Index k : cfg.k_grid) s += rate[{m, k}][eta];
      means.push_back(s / static_cast<double>(cfg.k_grid.size()));
    }
    int inversions = 0;
    bool small = true;
    for (std::size_t i = 1; i < means.size(); ++i)
      if (means[i] > means[i - 1]) {
        ++inversions;
        small = small && means[i] - means[i - 1] <= 0.05;
      }
    monotone = monotone && inversions <= 1 && small;
    detail << "; " << sensing::to_string(m) << " mean over k";
    for (double v : means) detail << " " << fmt("%.3f", v);
  }
  detail << "; " << fmt("%.0f", elapsed) << " s";
  return {direction && monotone && elapsed <= 1800.0, detail.str()};
}

Outcome criterion8() {
  const auto t0 = Clock::now();
  const denoise::Image clean = denoise::synthetic_scene(128);
  const denoise::Image noisy = denoise::awgn(clean, 0.05, 0);
  const std::vector<double> grid = solvers::log_grid(1e-4, 1e2, 13);
  const denoise::DenoiseConfig cfg;
  const auto tv = denoise::denoise_grid(noisy, clean, denoise::Regularizer::Tv, grid, cfg, hardware_threads());
  const auto ent = denoise::denoise_grid(noisy, clean, denoise::Regularizer::Entropy, grid, cfg, hardware_threads());
  const auto& bt = tv.entries[tv.best];
  const auto& be = ent.entries[ent.best];
  const double elapsed = seconds_since(t0);
  return {be.psnr >= bt.psnr && be.ssim >= bt.ssim && elapsed <= 600.0,
          "PSNR entropy " + fmt("%.2f", be.psnr) + " vs TV " + fmt("%.2f", bt.psnr) + ", SSIM " +
              fmt("%.5f", be.ssim) + " vs " + fmt("%.5f", bt.ssim) + ", " + fmt("%.0f", elapsed) + " s"};
}

Outcome criterion9() {
  const auto t0 = Clock::now();
  theory::InstanceConfig inst;
  inst.m = 20;
  inst.n = 40;
  inst.k = 3;
  int verified = 0, held = 0, skipped = 0;
  double max_delta = 0.0;
  for (std::uint64_t i = 0; verified < 200; ++i) {
    const Matrix a = theory::random_matrix(inst, derive_seed(9000, 2 * i));
    const auto est = theory::estimate_rip_constant(a, 6, 5'000'000, 0, hardware_threads());
    if (est.is_lower_bound || est.delta >= 1.0) {
      ++skipped;
      continue;
    }
    const auto pair = theory::random_signal_pair(inst, derive_seed(9000, 2 * i + 1));
    const auto rep = theory::verify_stability(a, pair.x, pair.y, 3, est.delta);
    ++verified;
    held += rep.holds() ? 1 : 0;
    max_delta = std::max(max_delta, est.delta);
  }
  const double elapsed = seconds_since(t0);
  return {held == verified && elapsed <= 300.0,
          std::to_string(held) + "/" + std::to_string(verified) + " hold, " + std::to_string(skipped) +
              " draws with delta_6 >= 1 skipped, max delta " + fmt("%.3f", max_delta) + ", " +
              fmt("%.0f", elapsed) + " s"};
}

Outcome criterion10() {
  Rng rng(1010);
  double worst_orth = 0.0;
  for (Index n : {4, 8, 12}) {
    Matrix g(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) g(i, j) = rng.normal();
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    for (Index s = 1; s <= n; ++s) worst_orth = std::max(worst_orth, theory::estimate_rip_constant(q, s).delta);
    for (Index s = 1; s <= n; ++s)
      worst_orth = std::max(worst_orth, theory::estimate_rip_constant(Matrix::Identity(n, n), s).delta);
  }
  int ordered = 0;
  for (int t = 0; t < 20; ++t) {
    Matrix a(8, 16);
    for (Index i = 0; i < 8; ++i)
      for (Index j = 0; j < 16; ++j) a(i, j) = rng.normal() / std::sqrt(8.0);
    const double exact = theory::estimate_rip_constant(a, 2).delta;
    const auto sampled = theory::estimate_rip_constant(a, 2, 30, static_cast<std::uint64_t>(t));
    ordered += sampled.is_lower_bound && sampled.delta <= exact ? 1 : 0;
  }
  return {worst_orth <= 1e-12 && ordered == 20,
          "orthogonal max delta " + fmt("%.3g", worst_orth) + ", sampled <= exhaustive on " + std::to_string(ordered) +
              "/20"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Every output file except the manifest, which records timestamps and the thread count.
std::map<std::string, std::string> outputs(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.find("manifest") == std::string::npos) files[name] = slurp(e.path());
  }
  return files;
}

Outcome criterion11() {
  const fs::path root = fs::temp_directory_path() / ("enz_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string sweep_args =
      " sweep --methods entropy ista iht irl1 --k-grid 2 6 --eta 0.01 0.03 --trials 3 --m 24 --n 96"
      " --lambda-points 5 --seed 11";
  const std::string denoise_args = " denoise --size 32 --lambda-grid 1e-3:1e-1:4 --seed 5";
  std::ostringstream detail;
  bool pass = true;
  for (const auto& [name, args] : {std::pair<std::string, std::string>{"sweep", sweep_args}, {"denoise", denoise_args}}) {
    std::vector<std::map<std::string, std::string>> runs;
    for (int threads : {1, 4}) {
      for (int rep = 0; rep < 2; ++rep) {
        const fs::path dir = root / (name + "_t" + std::to_string(threads) + "_" + std::to_string(rep));
        fs::create_directories(dir);
        const std::string cmd = std::string("\"") + ENZ_CLI_PATH + "\"" + args + " --threads " +
                                std::to_string(threads) + " --out-dir \"" + dir.string() + "\" > \"" +
                                (dir / "stdout.txt").string() + "\" 2>&1";
        if (std::system(cmd.c_str()) != 0) {
          pass = false;
          detail << name << " run failed; ";
        }
        runs.push_back(outputs(dir));
      }
    }
    bool same = runs[0].size() > 1;
    for (const auto& r : runs) same = same && r == runs[0];
    pass = pass && same;
    detail << name << " " << runs[0].size() << " files " << (same ? "identical" : "DIFFER") << " across 4 runs; ";
  }
  fs::remove_all(root);
  return {pass, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
      return 2;
    }
  }
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8,
                                                       criterion9, criterion10, criterion11};
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "criterion must be 1..%zu\n", criteria.size());
    return 2;
  }
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) continue;
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("%s criterion %zu: %s\n", o.pass ? "PASS" : "FAIL", i + 1, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
