#pragma once

// Fractional Brownian motion paths and truncated Q-Wiener noise fields.
//
// A NoiseField holds K independent fBm paths W_k on one uniform grid; the
// spatial field is sum_k sqrt(k^m) phi_k(x) W_k(t) with phi_k = sqrt(2) sin(k pi x).

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sfde::fgn {

/// Identifies one independent random stream. The engine derived from it is a
/// pure function of the three fields.
struct RngStreamSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t trajectory_index = 0;
  std::uint64_t mode_index = 0;
};

std::mt19937_64 make_engine(const RngStreamSpec& stream);

struct FbmPath {
  double hurst = 0.75;
  double grid_step = 1.0;
  std::vector<double> values;  // values[0] == 0

  std::size_t steps() const { return values.empty() ? 0 : values.size() - 1; }
};

/// Cov(W(t), W(u)) = (t^{2H} + u^{2H} - |t-u|^{2H}) / 2.
double fbm_covariance(double hurst, double t, double u);

/// Autocovariance of fractional Gaussian noise with increments over `step`.
double fgn_autocovariance(double hurst, double step, std::size_t lag);

enum class SamplerMethod { automatic, dense };

/// Exact fBm sampler on a fixed uniform grid.
///
/// The default route is circulant embedding of the fGn covariance (size 2N,
/// one complex FFT per path). If the embedding has a negative eigenvalue beyond
/// round-off, or SamplerMethod::dense is requested, the sampler falls back to a
/// Cholesky factor of the dense N x N increment covariance.
///
/// Construction is not cheap; sampling is const and safe to call concurrently.
class FbmSampler {
 public:
  FbmSampler(double hurst, std::size_t steps, double grid_step,
             SamplerMethod method = SamplerMethod::automatic);
  ~FbmSampler();
  FbmSampler(FbmSampler&&) noexcept;
  FbmSampler& operator=(FbmSampler&&) noexcept;
  FbmSampler(const FbmSampler&) = delete;
  FbmSampler& operator=(const FbmSampler&) = delete;

  double hurst() const { return hurst_; }
  double grid_step() const { return grid_step_; }
  std::size_t steps() const { return steps_; }
  bool uses_circulant_embedding() const { return !dense_factor_.size(); }

  /// Writes N fGn increments drawn from `engine` into `out`.
  void sample_increments(std::mt19937_64& engine, std::span<double> out) const;
  FbmPath sample(const RngStreamSpec& stream) const;

 private:
  struct FftPlan;

  double hurst_;
  std::size_t steps_;
  double grid_step_;
  std::vector<double> root_spectrum_;  // sqrt(lambda_j / 2N)
  Eigen::MatrixXd dense_factor_;       // lower Cholesky factor when used
  std::unique_ptr<FftPlan> plan_;
};

FbmPath sample_fbm_path(double hurst, std::size_t steps, double grid_step,
                        const RngStreamSpec& stream);

/// Subsamples every `factor`-th value. No randomness is consumed.
FbmPath coarsen_path(const FbmPath& path, std::size_t factor);

class NoiseField {
 public:
  NoiseField(double eigen_exponent, std::vector<FbmPath> paths);

  std::size_t modes() const { return paths_.size(); }
  std::size_t steps() const { return paths_.front().steps(); }
  double hurst() const { return paths_.front().hurst; }
  double grid_step() const { return paths_.front().grid_step; }
  double eigen_exponent() const { return eigen_exponent_; }
  double domain_length() const { return 1.0; }
  const std::vector<FbmPath>& paths() const { return paths_; }

  /// Lambda_k = k^m for the 1-based mode index k.
  double eigenvalue(std::size_t k) const;

 private:
  double eigen_exponent_;
  std::vector<FbmPath> paths_;
};

/// Draws modes 1..K of trajectory `trajectory` from `sampler`.
NoiseField sample_noise_field(const FbmSampler& sampler, std::size_t modes, double eigen_exponent,
                              std::uint64_t master_seed, std::uint64_t trajectory);

NoiseField coarsen_field(const NoiseField& field, std::size_t factor);

/// Per-mode increments W_k(t_n) - W_k(t_{n-1}), 1 <= n <= N (not divided by tau).
std::vector<double> noise_increments(const NoiseField& field, std::size_t n);

/// K x N matrix whose column n-1 holds sqrt(Lambda_k) * (W_k(t_n) - W_k(t_{n-1})).
Eigen::MatrixXd weighted_increments(const NoiseField& field, double scale = 1.0);

/// CSV dump with columns t,value.
void write_path_csv(const FbmPath& path, std::ostream& out);

}  // namespace sfde::fgn
