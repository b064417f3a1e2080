#include "sfde/fgn.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <string>

#include <fftw3.h>

#include "fftw_lock.hpp"
#include "sfde/errors.hpp"

namespace sfde::fgn {

namespace {

void require_hurst(double hurst) { require_open_interval("hurst", hurst, 0.0, 1.0); }

// Embedding eigenvalues below -tol * max are treated as a failed embedding.
constexpr double kNegativeSpectrumTolerance = 1e-10;

}  // namespace

struct FbmSampler::FftPlan {
  fftw_plan plan = nullptr;
  std::size_t size = 0;

  explicit FftPlan(std::size_t n) : size(n) {
    std::vector<std::complex<double>> in(n), out(n);
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
                            reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
                            FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) throw NumericError("fftw failed to create a plan");
  }
  ~FftPlan() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  void execute(std::complex<double>* in, std::complex<double>* out) const {
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in), reinterpret_cast<fftw_complex*>(out));
  }
};

std::mt19937_64 make_engine(const RngStreamSpec& stream) {
  const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(stream.master_seed),      hi(stream.master_seed),
                    lo(stream.trajectory_index), hi(stream.trajectory_index),
                    lo(stream.mode_index),       hi(stream.mode_index)};
  return std::mt19937_64(seq);
}

double fbm_covariance(double hurst, double t, double u) {
  require_hurst(hurst);
  if (t < 0.0 || u < 0.0) throw ParameterError("fbm_covariance: times must be non-negative");
  const double two_h = 2.0 * hurst;
  return 0.5 * (std::pow(t, two_h) + std::pow(u, two_h) - std::pow(std::abs(t - u), two_h));
}

double fgn_autocovariance(double hurst, double step, std::size_t lag) {
  const double two_h = 2.0 * hurst;
  const double k = static_cast<double>(lag);
  const double unit = lag == 0 ? 1.0
                               : 0.5 * (std::pow(k + 1.0, two_h) - 2.0 * std::pow(k, two_h) +
                                        std::pow(k - 1.0, two_h));
  return std::pow(step, two_h) * unit;
}

FbmSampler::FbmSampler(double hurst, std::size_t steps, double grid_step, SamplerMethod method)
    : hurst_(hurst), steps_(steps), grid_step_(grid_step) {
  require_hurst(hurst);
  if (steps < 1) throw ParameterError("FbmSampler: need at least one step");
  if (!(grid_step > 0.0)) throw ParameterError("FbmSampler: grid_step must be positive");

  std::vector<double> gamma(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) gamma[k] = fgn_autocovariance(hurst, grid_step, k);

  bool embedded = false;
  if (method == SamplerMethod::automatic) {
    const std::size_t n = 2 * steps;
    std::vector<std::complex<double>> row(n), spectrum(n);
    for (std::size_t k = 0; k <= steps; ++k) row[k] = gamma[k];
    for (std::size_t k = steps + 1; k < n; ++k) row[k] = gamma[n - k];
    auto plan = std::make_unique<FftPlan>(n);
    plan->execute(row.data(), spectrum.data());

    double max_eig = 0.0, min_eig = 0.0;
    for (const auto& z : spectrum) {
      max_eig = std::max(max_eig, z.real());
      min_eig = std::min(min_eig, z.real());
    }
    if (min_eig >= -kNegativeSpectrumTolerance * max_eig) {
      root_spectrum_.resize(n);
      for (std::size_t j = 0; j < n; ++j)
        root_spectrum_[j] = std::sqrt(std::max(spectrum[j].real(), 0.0) / static_cast<double>(n));
      plan_ = std::move(plan);
      embedded = true;
    }
  }

  if (!embedded) {
    Eigen::MatrixXd cov(steps, steps);
    for (std::size_t i = 0; i < steps; ++i)
      for (std::size_t j = 0; j < steps; ++j) cov(i, j) = gamma[i > j ? i - j : j - i];
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw NumericError("fGn covariance is not positive definite; cannot factorize");
    dense_factor_ = llt.matrixL();
  }
}

FbmSampler::~FbmSampler() = default;
FbmSampler::FbmSampler(FbmSampler&&) noexcept = default;
FbmSampler& FbmSampler::operator=(FbmSampler&&) noexcept = default;

void FbmSampler::sample_increments(std::mt19937_64& engine, std::span<double> out) const {
  if (out.size() != steps_) throw ContractError("sample_increments: output size must equal steps");
  std::normal_distribution<double> normal;

  if (plan_) {
    // Real part of F diag(sqrt(lambda / 2N)) (Z1 + i Z2) has the embedded covariance.
    const std::size_t n = root_spectrum_.size();
    std::vector<std::complex<double>> xi(n), y(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double a = normal(engine);
      const double b = normal(engine);
      xi[j] = root_spectrum_[j] * std::complex<double>(a, b);
    }
    plan_->execute(xi.data(), y.data());
    for (std::size_t i = 0; i < steps_; ++i) out[i] = y[i].real();
    return;
  }

  Eigen::VectorXd z(steps_);
  for (std::size_t i = 0; i < steps_; ++i) z[i] = normal(engine);
  const Eigen::VectorXd x = dense_factor_.triangularView<Eigen::Lower>() * z;
  std::copy(x.data(), x.data() + steps_, out.begin());
}

FbmPath FbmSampler::sample(const RngStreamSpec& stream) const {
  auto engine = make_engine(stream);
  std::vector<double> increments(steps_);
  sample_increments(engine, increments);
  FbmPath path{hurst_, grid_step_, std::vector<double>(steps_ + 1, 0.0)};
  for (std::size_t i = 0; i < steps_; ++i) path.values[i + 1] = path.values[i] + increments[i];
  return path;
}

FbmPath sample_fbm_path(double hurst, std::size_t steps, double grid_step,
                        const RngStreamSpec& stream) {
  require_open_interval("hurst", hurst, 0.5, 1.0);
  return FbmSampler(hurst, steps, grid_step).sample(stream);
}

FbmPath coarsen_path(const FbmPath& path, std::size_t factor) {
  const std::size_t n = path.steps();
  if (factor < 1 || n % factor != 0)
    throw ParameterError("coarsen_path: factor " + std::to_string(factor) +
                         " does not divide the step count " + std::to_string(n));
  FbmPath coarse{path.hurst, path.grid_step * static_cast<double>(factor), {}};
  coarse.values.reserve(n / factor + 1);
  for (std::size_t i = 0; i <= n; i += factor) coarse.values.push_back(path.values[i]);
  return coarse;
}

NoiseField::NoiseField(double eigen_exponent, std::vector<FbmPath> paths)
    : eigen_exponent_(eigen_exponent), paths_(std::move(paths)) {
  if (eigen_exponent > 0.0) throw ParameterError("eigen exponent m must be <= 0");
  if (paths_.empty()) throw ParameterError("NoiseField needs at least one mode");
  for (const auto& p : paths_) {
    if (p.values.size() != paths_.front().values.size() || p.hurst != paths_.front().hurst ||
        p.grid_step != paths_.front().grid_step)
      throw ParameterError("NoiseField: all paths must share hurst and grid");
  }
}

double NoiseField::eigenvalue(std::size_t k) const {
  return std::pow(static_cast<double>(k), eigen_exponent_);
}

NoiseField sample_noise_field(const FbmSampler& sampler, std::size_t modes, double eigen_exponent,
                              std::uint64_t master_seed, std::uint64_t trajectory) {
  std::vector<FbmPath> paths;
  paths.reserve(modes);
  for (std::size_t k = 1; k <= modes; ++k) paths.push_back(sampler.sample({master_seed, trajectory, k}));
  return NoiseField(eigen_exponent, std::move(paths));
}

NoiseField coarsen_field(const NoiseField& field, std::size_t factor) {
  std::vector<FbmPath> paths;
  paths.reserve(field.modes());
  for (const auto& p : field.paths()) paths.push_back(coarsen_path(p, factor));
  return NoiseField(field.eigen_exponent(), std::move(paths));
}

std::vector<double> noise_increments(const NoiseField& field, std::size_t n) {
  if (n < 1 || n > field.steps())
    throw ContractError("noise_increments: step index " + std::to_string(n) + " outside [1, " +
                        std::to_string(field.steps()) + "]");
  std::vector<double> out(field.modes());
  for (std::size_t k = 0; k < field.modes(); ++k)
    out[k] = field.paths()[k].values[n] - field.paths()[k].values[n - 1];
  return out;
}

Eigen::MatrixXd weighted_increments(const NoiseField& field, double scale) {
  const std::size_t modes = field.modes(), steps = field.steps();
  Eigen::MatrixXd out(modes, steps);
  for (std::size_t k = 0; k < modes; ++k) {
    const double w = scale * std::sqrt(field.eigenvalue(k + 1));
    const auto& v = field.paths()[k].values;
    for (std::size_t n = 0; n < steps; ++n) out(k, n) = w * (v[n + 1] - v[n]);
  }
  return out;
}

void write_path_csv(const FbmPath& path, std::ostream& out) {
  out << "t,value\n";
  out.precision(17);
  for (std::size_t i = 0; i < path.values.size(); ++i)
    out << static_cast<double>(i) * path.grid_step << ',' << path.values[i] << '\n';
}

}  // namespace sfde::fgn
