#pragma once

// Monte Carlo convergence harness.
//
// Every trajectory draws one noise field on the finest grid it needs; coarser
// runs subsample that field, so e_tau and e_h compare solutions driven by the
// same realization. Squared errors are stored per trajectory and reduced in
// trajectory order, which keeps reports independent of the worker count.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sfde/fracfem.hpp"
#include "sfde/stepper.hpp"

namespace sfde::experiments {

enum class Family { temporal, spatial };
enum class Solver { modal, direct };

const char* to_string(Family family);
const char* to_string(Solver solver);

struct ExperimentSpec {
  Family family = Family::temporal;
  double alpha = 0.5;
  double s = 0.5;
  double hurst = 0.75;
  double m = 0.0;  // Lambda_k = k^m
  double final_time = 1.0;
  std::size_t trajectories = 100;
  std::uint64_t master_seed = 1;
  /// Step counts N (temporal) or element counts P (spatial), each twice the previous.
  std::vector<std::size_t> levels;
  std::size_t elements = 256;  // mesh P when space is held fixed
  std::size_t steps = 1024;    // N when time is held fixed
  std::size_t modes = 1000;    // truncation K
  /// Companion resolution is level * refinement; 1 makes both runs identical.
  std::size_t refinement = 2;
  /// Multiplies the noise; 0 gives the zero-noise problem.
  double noise_scale = 1.0;
  Solver solver = Solver::modal;
  /// 0 selects SFDE_WORKERS from the environment, else the OpenMP default.
  std::size_t workers = 0;

  void validate() const;
};

struct ConvergenceReport {
  ExperimentSpec spec;
  std::vector<double> resolutions;  // tau or h per level
  std::vector<double> errors;       // e_tau or e_h per level
  std::vector<double> pair_rates;   // log2(e_l / e_{l+1}); one shorter than errors
  double slope_rate = 0.0;          // least-squares slope of log e against log resolution
  std::optional<double> predicted_rate;
  std::string prediction_note;      // why no prediction is available, if so
};

/// rho* = max((1 + m) d / 4, 0).
double rho_from_m(double m, int dimension = 1);

/// H - rho alpha / s, for rho in [0, min(s/2, sH/alpha)].
double predict_temporal_rate(double alpha, double s, double hurst, double rho);

/// Half the spatial error exponent with epsilon = 0:
///   s <  1/2: min(4sH/alpha - 4 rho, 4s - 4 rho) / 2
///   s >= 1/2: min((4 rho - 1 - 2s)(Hs - alpha rho) / (alpha (rho - s)), 2s - 4 rho + 1) / 2
/// for rho in [max(s/2 - 1/4, -s), min(s/2, sH/alpha)].
double predict_spatial_rate(double alpha, double s, double hurst, double rho);

/// Prediction for `spec` using rho_from_m; empty (with `note` set) when rho* is inadmissible.
std::optional<double> predicted_rate(const ExperimentSpec& spec, std::string* note = nullptr);

/// Least-squares slope of log(error) against log(resolution).
double least_squares_rate(std::span<const double> resolutions, std::span<const double> errors);

ConvergenceReport run_temporal_family(const ExperimentSpec& spec);
ConvergenceReport run_spatial_family(const ExperimentSpec& spec);
ConvergenceReport run_family(const ExperimentSpec& spec);

struct HolderEstimate {
  std::vector<double> lags;  // in time units
  std::vector<double> rms_increments;
  double exponent = 0.0;
};

/// Fits E||u(T) - u(T - lag)||^2 ~ lag^{2 gamma} on mesh `elements` with `steps`
/// time steps. Lags are given in steps.
HolderEstimate estimate_holder_exponent(const ExperimentSpec& spec, std::span<const std::size_t> lag_steps);
/// Same, on caller-supplied operators (their mesh and modes override the spec's).
HolderEstimate estimate_holder_exponent(const ExperimentSpec& spec, const fracfem::FemOperators& ops,
                                        std::span<const std::size_t> lag_steps);

struct SobolevEstimate {
  double value = 0.0;          // sum_k (k pi)^{2 sigma} (u_h, phi_k)^2
  double tail_fraction = 0.0;  // share of the sum carried by the top decile of modes
  bool tail_warning = false;   // tail_fraction above 1%
};

/// Spectral norm |u_h|^2 of order sigma in the Dirichlet-Laplacian eigenbasis,
/// i.e. ||A^{sigma/2} u_h||^2, from the first `modes` sine coefficients.
SobolevEstimate estimate_sobolev_norm(const Eigen::VectorXd& coeffs, const fracfem::Mesh1D& mesh, double sigma,
                                      std::size_t modes);
SobolevEstimate estimate_sobolev_norm(const stepper::TrajectorySolution& solution, double sigma,
                                      std::size_t modes);

/// Ensemble mean of estimate_sobolev_norm at the final time over spec.trajectories.
SobolevEstimate run_sobolev_diagnostic(const ExperimentSpec& spec, double sigma);

/// Worker count actually used for `requested` (see ExperimentSpec::workers).
std::size_t resolve_workers(std::size_t requested);

}  // namespace sfde::experiments
