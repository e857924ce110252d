#include "denoise.hpp"

#include "random.hpp"
#include "surrogates.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <thread>

namespace enz::denoise {

Image::Image(Index h, Index w) : height(h), width(w), pixels(Vector::Zero(h * w)) {
  require(h >= 1 && w >= 1, Errc::InvalidArgument, "image dimensions must be positive");
}

Image::Image(Index h, Index w, Vector px) : height(h), width(w), pixels(std::move(px)) {
  require(h >= 1 && w >= 1, Errc::InvalidArgument, "image dimensions must be positive");
  require(pixels.size() == h * w, Errc::DimensionMismatch, "pixel count does not match dimensions");
}

Vector GradientField::stacked() const {
  Vector z(dx.size() + dy.size());
  z << dx, dy;
  return z;
}

Vector apply_d(const VectorRef& x, Index height, Index width) {
  require(x.size() == height * width, Errc::DimensionMismatch, "apply_d: size mismatch");
  const Index n = height * width;
  Vector z(2 * n);
  for (Index i = 0; i < height; ++i) {
    const Index down = (i + 1 == height) ? 0 : i + 1;
    for (Index j = 0; j < width; ++j) {
      const Index right = (j + 1 == width) ? 0 : j + 1;
      const double v = x(i * width + j);
      z(i * width + j) = x(i * width + right) - v;
      z(n + i * width + j) = x(down * width + j) - v;
    }
  }
  return z;
}

Vector apply_dt(const VectorRef& z, Index height, Index width) {
  const Index n = height * width;
  require(z.size() == 2 * n, Errc::DimensionMismatch, "apply_dt: size mismatch");
  Vector x(n);
  for (Index i = 0; i < height; ++i) {
    const Index up = (i == 0) ? height - 1 : i - 1;
    for (Index j = 0; j < width; ++j) {
      const Index left = (j == 0) ? width - 1 : j - 1;
      x(i * width + j) = z(i * width + left) - z(i * width + j) + z(n + up * width + j) - z(n + i * width + j);
    }
  }
  return x;
}

GradientField gradient_apply(const Image& img) {
  const Vector z = apply_d(img.pixels, img.height, img.width);
  const Index n = img.size();
  return {img.height, img.width, z.head(n), z.tail(n)};
}

Image gradient_adjoint(const GradientField& field) {
  require(field.dx.size() == field.height * field.width && field.dy.size() == field.dx.size(),
          Errc::DimensionMismatch, "gradient field shape mismatch");
  return Image(field.height, field.width, apply_dt(field.stacked(), field.height, field.width));
}

double tv_value(const Image& img) { return apply_d(img.pixels, img.height, img.width).lpNorm<1>(); }

const char* to_string(Regularizer r) {
  switch (r) {
    case Regularizer::Tv: return "tv";
    case Regularizer::LogSum: return "logsum";
    case Regularizer::Entropy: return "entropy";
  }
  return "unknown";
}

Regularizer parse_regularizer(const std::string& name) {
  if (name == "tv") return Regularizer::Tv;
  if (name == "logsum") return Regularizer::LogSum;
  if (name == "entropy" || name == "entropy_u") return Regularizer::Entropy;
  throw Error(Errc::InvalidArgument, "unknown regularizer: " + name);
}

void DenoiseConfig::validate() const {
  require(eps0 > 0.0, Errc::NonPositiveEps, "eps0 must be positive");
  require(decay > 0.0 && decay <= 1.0, Errc::InvalidArgument, "decay must lie in (0, 1]");
  require(stages >= 1, Errc::InvalidArgument, "stages must be >= 1");
  require(eps_w > 0.0, Errc::InvalidArgument, "eps_w must be positive");
  require(scale > 0.0, Errc::NonPositiveScale, "scale must be positive");
  qn.validate();
}

double composite_value_grad(const VectorRef& x, const Image& y, Regularizer reg, double lambda, double eps,
                            const DenoiseConfig& cfg, Vector& grad) {
  const Vector z = apply_d(x, y.height, y.width);
  surrogates::ValueGrad r;
  switch (reg) {
    case Regularizer::Tv: r = surrogates::smoothed_l1_value_grad(z, eps); break;
    case Regularizer::LogSum: r = surrogates::smoothed_logsum_value_grad(z, cfg.eps_w, eps); break;
    case Regularizer::Entropy: r = surrogates::smoothed_entropy_value_grad(z, cfg.scale, eps); break;
  }
  const Vector diff = x - y.pixels;
  grad = diff + lambda * apply_dt(r.grad, y.height, y.width);
  return 0.5 * diff.squaredNorm() + lambda * r.value;
}

DenoiseResult denoise(const Image& y, Regularizer reg, double lambda, const DenoiseConfig& cfg) {
  cfg.validate();
  require(lambda > 0.0 && std::isfinite(lambda), Errc::InvalidArgument, "lambda must be positive");
  require(y.pixels.size() == y.size() && y.size() > 0, Errc::DimensionMismatch, "malformed image");

  DenoiseResult out;
  Vector x = y.pixels;
  double eps = cfg.eps0;
  for (int stage = 0; stage < cfg.stages; ++stage, eps *= cfg.decay) {
    const optim::Oracle oracle = [&](const Vector& v, Vector& g) {
      return composite_value_grad(v, y, reg, lambda, eps, cfg, g);
    };
    optim::MinimizeResult res = optim::minimize_smooth(oracle, x, cfg.qn);
    out.stage_offsets.push_back(out.objective_trace.size());
    out.objective_trace.insert(out.objective_trace.end(), res.trace.begin(), res.trace.end());
    out.iterations += res.iterations;
    if (res.status == optim::Status::LineSearchFailure) ++out.line_search_failures;
    x = std::move(res.x);
  }
  out.image = Image(y.height, y.width, x.cwiseMax(0.0).cwiseMin(1.0));
  return out;
}

Image awgn(const Image& img, double sigma, std::uint64_t seed, Vector* noise) {
  require(sigma >= 0.0 && std::isfinite(sigma), Errc::InvalidArgument, "sigma must be a finite nonnegative number");
  Vector n = Vector::Zero(img.size());
  if (sigma > 0.0) {
    Rng rng(seed);
    for (Index i = 0; i < n.size(); ++i) n(i) = sigma * rng.normal();
  }
  Image out(img.height, img.width, (img.pixels + n).cwiseMax(0.0).cwiseMin(1.0));
  if (noise) *noise = std::move(n);
  return out;
}

namespace {

void require_same_shape(const Image& a, const Image& b) {
  require(a.height == b.height && a.width == b.width && a.pixels.size() == b.pixels.size(),
          Errc::DimensionMismatch, "images have different dimensions");
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b);
  const double mse = (a.pixels - b.pixels).squaredNorm() / static_cast<double>(a.pixels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const double n = static_cast<double>(a.pixels.size());
  const double mu_a = a.pixels.mean(), mu_b = b.pixels.mean();
  const Vector da = a.pixels.array() - mu_a, db = b.pixels.array() - mu_b;
  const double var_a = da.squaredNorm() / n, var_b = db.squaredNorm() / n, cov = da.dot(db) / n;
  return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

double percentile(std::vector<double> values, double p) {
  require(!values.empty(), Errc::EmptyInput, "percentile of an empty set");
  require(p >= 0.0 && p <= 100.0, Errc::InvalidArgument, "percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

DecayTable decay_profile(const std::vector<std::vector<double>>& series, const std::vector<double>& percentiles) {
  require(!series.empty(), Errc::EmptyInput, "decay profile needs at least one series");
  DecayTable t;
  t.percentiles = percentiles;
  std::size_t length = 0;
  for (const auto& s : series) {
    std::vector<double> mags(s.size());
    std::transform(s.begin(), s.end(), mags.begin(), [](double v) { return std::abs(v); });
    require(std::all_of(mags.begin(), mags.end(), [](double v) { return std::isfinite(v); }), Errc::InvalidArgument,
            "decay values must be finite");
    std::sort(mags.begin(), mags.end(), std::greater<>());
    require(!mags.empty() && mags.front() > 0.0, Errc::EmptyInput, "every series needs a nonzero value");
    const double peak = mags.front();
    for (double& v : mags) v /= peak;
    length = std::max(length, mags.size());
    t.series.push_back(std::move(mags));
  }
  for (auto& s : t.series) s.resize(length, 0.0);

  t.mean.resize(length);
  t.median.resize(length);
  t.envelopes.assign(percentiles.size(), std::vector<double>(length));
  std::vector<double> column(t.series.size());
  for (std::size_t i = 0; i < length; ++i) {
    double sum = 0.0;
    for (std::size_t s = 0; s < t.series.size(); ++s) {
      column[s] = t.series[s][i];
      sum += column[s];
    }
    t.mean[i] = sum / static_cast<double>(column.size());
    t.median[i] = percentile(column, 50.0);
    for (std::size_t p = 0; p < percentiles.size(); ++p) t.envelopes[p][i] = percentile(column, percentiles[p]);
  }
  return t;
}

Image synthetic_scene(Index size) {
  require(size >= 8, Errc::InvalidArgument, "synthetic scene needs size >= 8");
  Image img(size, size);
  const double s = static_cast<double>(size);
  for (Index i = 0; i < size; ++i) {
    for (Index j = 0; j < size; ++j) {
      const double u = (static_cast<double>(j) + 0.5) / s;  // horizontal position in [0, 1)
      const double v = (static_cast<double>(i) + 0.5) / s;  // vertical position
      double value = 0.2;
      if (u >= 0.1 && u < 0.45 && v >= 0.15 && v < 0.55) value = 0.8;
      const double du = u - 0.68, dv = v - 0.35;
      if (du * du + dv * dv < 0.18 * 0.18) value = 0.55;
      if (v >= 0.62 && v < 0.9 && u >= 0.15 && u < 0.85 && std::abs(u - 0.5) <= (v - 0.62) * 1.2) value = 0.4;
      if (v >= 0.7 && v < 0.85 && u >= 0.75 && u < 0.92) value = 0.95;
      img.at(i, j) = value;
    }
  }
  return img;
}

GridResult denoise_grid(const Image& noisy, const Image& clean, Regularizer reg, const std::vector<double>& lambdas,
                        const DenoiseConfig& cfg, int threads) {
  require(!lambdas.empty(), Errc::InvalidArgument, "lambda grid is empty");
  require_same_shape(noisy, clean);
  const std::size_t count = lambdas.size();
  std::vector<Image> images(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        images[i] = denoise(noisy, reg, lambdas[i], cfg).image;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int nthreads = std::max(1, std::min(threads, static_cast<int>(count)));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  GridResult out;
  out.regularizer = reg;
  for (std::size_t i = 0; i < count; ++i) {
    out.entries.push_back({lambdas[i], psnr(images[i], clean), ssim(images[i], clean)});
    if (out.entries[i].psnr > out.entries[out.best].psnr) out.best = i;
  }
  out.best_image = std::move(images[out.best]);
  return out;
}

namespace {

/// Skips whitespace and '#' comments between header tokens.
void skip_separators(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
}

long read_header_int(const std::string& bytes, std::size_t& pos) {
  skip_separators(bytes, pos);
  const std::size_t start = pos;
  long value = 0;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    value = value * 10 + (bytes[pos] - '0');
    require(value <= 1'000'000, Errc::ImageFormat, "PGM header value too large");
    ++pos;
  }
  require(pos > start, Errc::ImageFormat, "malformed PGM header");
  return value;
}

}  // namespace

Image decode_pgm(const std::string& bytes) {
  require(bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5', Errc::ImageFormat, "not a binary PGM (P5)");
  std::size_t pos = 2;
  const long width = read_header_int(bytes, pos);
  const long height = read_header_int(bytes, pos);
  const long maxval = read_header_int(bytes, pos);
  require(width >= 1 && height >= 1, Errc::ImageFormat, "PGM dimensions must be positive");
  require(maxval >= 1 && maxval <= 255, Errc::ImageFormat, "only 8-bit PGM is supported");
  require(pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos])), Errc::ImageFormat,
          "malformed PGM header");
  ++pos;
  const auto count = static_cast<std::size_t>(width * height);
  require(bytes.size() - pos >= count, Errc::ImageFormat, "PGM pixel data truncated");
  Image img(height, width);
  for (std::size_t i = 0; i < count; ++i) {
    const double v = static_cast<unsigned char>(bytes[pos + i]) / static_cast<double>(maxval);
    img.pixels(static_cast<Index>(i)) = std::clamp(v, 0.0, 1.0);
  }
  return img;
}

std::string encode_pgm(const Image& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(img.size()));
  for (Index i = 0; i < img.size(); ++i) {
    const double v = std::clamp(img.pixels(i), 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  return out;
}

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::Io, ("cannot open " + path).c_str());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pgm(bytes);
}

void write_pgm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::Io, ("cannot write " + path).c_str());
  const std::string bytes = encode_pgm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), Errc::Io, ("write failed for " + path).c_str());
}

}  // namespace enz::denoise
