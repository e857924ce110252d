#pragma once

#include "optim.hpp"
#include "types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace enz::denoise {

/// Grayscale image, row-major pixels in [0, 1].
struct Image {
  Index height = 0;
  Index width = 0;
  Vector pixels;

  Image() = default;
  Image(Index h, Index w);
  Image(Index h, Index w, Vector px);

  double& at(Index i, Index j) { return pixels(i * width + j); }
  double at(Index i, Index j) const { return pixels(i * width + j); }
  Index size() const { return height * width; }
};

/// Periodic forward differences. dx(i,j) = I(i,j+1) - I(i,j), dy(i,j) = I(i+1,j) - I(i,j).
struct GradientField {
  Index height = 0;
  Index width = 0;
  Vector dx;
  Vector dy;

  /// The 2N vector z = Dx = [dx; dy].
  Vector stacked() const;
};

GradientField gradient_apply(const Image& img);
Image gradient_adjoint(const GradientField& field);

/// Vector forms used inside the solver: D maps N -> 2N, D^T maps 2N -> N.
Vector apply_d(const VectorRef& x, Index height, Index width);
Vector apply_dt(const VectorRef& z, Index height, Index width);

/// Anisotropic total variation ||Dx||_1.
double tv_value(const Image& img);

enum class Regularizer { Tv, LogSum, Entropy };

const char* to_string(Regularizer r);
Regularizer parse_regularizer(const std::string& name);

struct DenoiseConfig {
  double eps0 = 1e-2;
  double decay = 0.1;
  int stages = 6;
  double eps_w = 0.1;  // log-sum offset
  double scale = 1.0;  // entropy scale C
  optim::QuasiNewtonConfig qn{};

  void validate() const;
};

struct DenoiseResult {
  Image image;  // clamped to [0, 1]
  std::vector<double> objective_trace;
  std::vector<std::size_t> stage_offsets;
  int iterations = 0;
  int line_search_failures = 0;
};

/// 1/2||x - y||^2 + lambda R_eps(Dx) and its gradient (x - y) + lambda D^T grad R_eps(Dx).
double composite_value_grad(const VectorRef& x, const Image& y, Regularizer reg, double lambda, double eps,
                            const DenoiseConfig& cfg, Vector& grad);

DenoiseResult denoise(const Image& y, Regularizer reg, double lambda, const DenoiseConfig& cfg);

/// Adds i.i.d. N(0, sigma^2) noise and clamps. The unclamped noise is written
/// to `noise` when given.
Image awgn(const Image& img, double sigma, std::uint64_t seed, Vector* noise = nullptr);

/// Peak signal-to-noise ratio in dB for unit peak; +infinity for identical images.
double psnr(const Image& a, const Image& b);

/// SSIM from whole-image means, variances and covariance, C1 = 0.01^2, C2 = 0.03^2.
double ssim(const Image& a, const Image& b);

struct DecayTable {
  std::vector<std::vector<double>> series;  // normalized, descending, zero padded to a common length
  std::vector<double> mean;
  std::vector<double> median;
  std::vector<double> percentiles;
  std::vector<std::vector<double>> envelopes;  // one per requested percentile
};

inline const std::vector<double> kDefaultPercentiles{5.0, 25.0, 80.0, 95.0};

DecayTable decay_profile(const std::vector<std::vector<double>>& series,
                         const std::vector<double>& percentiles = kDefaultPercentiles);

/// Linear-interpolation percentile (p in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double p);

/// Deterministic piecewise-constant test scene.
Image synthetic_scene(Index size = 128);

struct GridEntry {
  double lambda = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct GridResult {
  Regularizer regularizer = Regularizer::Tv;
  std::vector<GridEntry> entries;
  std::size_t best = 0;  // index of the highest PSNR, ties to the smaller lambda
  Image best_image;
};

/// Denoises `noisy` for each lambda and keeps the highest PSNR against `clean`.
GridResult denoise_grid(const Image& noisy, const Image& clean, Regularizer reg, const std::vector<double>& lambdas,
                        const DenoiseConfig& cfg, int threads = 1);

/// Binary 8-bit PGM (P5), mapped linearly to [0, 1].
Image read_pgm(const std::string& path);
void write_pgm(const Image& img, const std::string& path);
Image decode_pgm(const std::string& bytes);
std::string encode_pgm(const Image& img);

}  // namespace enz::denoise
