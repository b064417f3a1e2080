#include "sfde/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include <omp.h>

#include "sfde/convquad.hpp"
#include "sfde/errors.hpp"
#include "sfde/fgn.hpp"

namespace sfde::experiments {

namespace {

constexpr double kRangeSlack = 1e-12;

std::string interval_message(const char* what, double value, double lo, double hi) {
  std::ostringstream os;
  os << what << ": rho = " << value << " outside the admissible interval [" << lo << ", " << hi << "]";
  return os.str();
}

void require_doubling(const std::vector<std::size_t>& levels) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1) throw ParameterError("levels must be positive");
    if (i && levels[i] != 2 * levels[i - 1])
      throw ParameterError("levels must halve the resolution at every step (got " + std::to_string(levels[i - 1]) +
                           " then " + std::to_string(levels[i]) + ")");
  }
}

// Runs body(t) for t in [0, count) on `workers` threads and rethrows the first failure.
template <class Body>
void parallel_trajectories(std::size_t count, std::size_t workers, Body&& body) {
  std::exception_ptr failure;
  std::mutex failure_mutex;
#pragma omp parallel for schedule(dynamic, 1) num_threads(static_cast<int>(workers))
  for (long t = 0; t < static_cast<long>(count); ++t) {
    {
      std::lock_guard lock(failure_mutex);
      if (failure) continue;
    }
    try {
      body(static_cast<std::size_t>(t));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

// Fixed-order reduction of per-trajectory squared errors into RMS per level.
std::vector<double> rms_by_level(const std::vector<std::vector<double>>& squared, std::size_t levels) {
  std::vector<double> out(levels, 0.0);
  for (std::size_t l = 0; l < levels; ++l) {
    double acc = 0.0;
    for (const auto& row : squared) acc += row[l];
    out[l] = std::sqrt(acc / static_cast<double>(squared.size()));
  }
  return out;
}

void finish_report(ConvergenceReport& report) {
  const auto& e = report.errors;
  report.pair_rates.clear();
  for (std::size_t l = 0; l + 1 < e.size(); ++l) {
    const double ratio = report.resolutions[l] / report.resolutions[l + 1];
    report.pair_rates.push_back(std::log(e[l] / e[l + 1]) / std::log(ratio));
  }
  report.slope_rate = e.size() >= 2 ? least_squares_rate(report.resolutions, e)
                                    : std::numeric_limits<double>::quiet_NaN();
  report.predicted_rate = predicted_rate(report.spec, &report.prediction_note);
}

// Everything one mesh needs for the modal route: operators, basis and the
// projection of the noise coupling onto the modes.
struct ModalMesh {
  fracfem::FemOperators ops;
  std::shared_ptr<const stepper::ModalBasis> basis;
  Eigen::MatrixXd modal_coupling;  // V^T * coupling, M x K

  ModalMesh(std::size_t elements, double s, std::size_t modes)
      : ops(fracfem::assemble_operators(fracfem::Mesh1D(elements), s, modes)),
        basis(std::make_shared<const stepper::ModalBasis>(stepper::modal_basis(ops))),
        modal_coupling(basis->vectors.transpose() * ops.coupling) {}
};

}  // namespace

const char* to_string(Family family) { return family == Family::temporal ? "temporal" : "spatial"; }
const char* to_string(Solver solver) { return solver == Solver::modal ? "modal" : "direct"; }

void ExperimentSpec::validate() const {
  require_open_interval("alpha", alpha, 0.0, 1.0);
  require_open_interval("s", s, 0.0, 1.0);
  require_open_interval("hurst", hurst, 0.5, 1.0);
  if (!(m <= 0.0)) throw ParameterError("m = " + std::to_string(m) + " outside the admissible interval (-inf, 0]");
  if (!(final_time > 0.0) || !std::isfinite(final_time)) throw ParameterError("T must be positive");
  if (trajectories < 2) throw ParameterError("trajectories must be at least 2");
  if (modes < 1) throw ParameterError("modes must be at least 1");
  if (refinement < 1) throw ParameterError("refinement must be at least 1");
  if (elements < 2) throw ParameterError("mesh needs at least 2 elements");
  if (steps < 1) throw ParameterError("steps must be at least 1");
  if (!(noise_scale >= 0.0)) throw ParameterError("noise scale must be non-negative");
  require_doubling(levels);
  if (family == Family::spatial)
    for (auto p : levels)
      if (p < 2) throw ParameterError("spatial levels need at least 2 elements");
}

double rho_from_m(double m, int dimension) {
  if (dimension != 1) throw ParameterError("rho_from_m: only dimension 1 is supported");
  return std::max((1.0 + m) * static_cast<double>(dimension) / 4.0, 0.0);
}

double predict_temporal_rate(double alpha, double s, double hurst, double rho) {
  require_open_interval("alpha", alpha, 0.0, 1.0);
  require_open_interval("s", s, 0.0, 1.0);
  require_open_interval("hurst", hurst, 0.5, 1.0);
  const double hi = std::min(s / 2.0, s * hurst / alpha);
  if (rho < -kRangeSlack || rho > hi + kRangeSlack)
    throw ParameterError(interval_message("predict_temporal_rate", rho, 0.0, hi));
  return hurst - rho * alpha / s;
}

double predict_spatial_rate(double alpha, double s, double hurst, double rho) {
  require_open_interval("alpha", alpha, 0.0, 1.0);
  require_open_interval("s", s, 0.0, 1.0);
  require_open_interval("hurst", hurst, 0.5, 1.0);
  const double lo = std::max(s / 2.0 - 0.25, -s);
  const double hi = std::min(s / 2.0, s * hurst / alpha);
  if (rho < lo - kRangeSlack || rho > hi + kRangeSlack)
    throw ParameterError(interval_message("predict_spatial_rate", rho, lo, hi));
  double exponent;
  if (s < 0.5) {
    exponent = std::min(4.0 * s * hurst / alpha - 4.0 * rho, 4.0 * s - 4.0 * rho);
  } else {
    exponent = std::min((4.0 * rho - 1.0 - 2.0 * s) * (hurst * s - alpha * rho) / (alpha * (rho - s)),
                        2.0 * s - 4.0 * rho + 1.0);
  }
  return exponent / 2.0;
}

std::optional<double> predicted_rate(const ExperimentSpec& spec, std::string* note) {
  const double rho = rho_from_m(spec.m);
  try {
    if (note) note->clear();
    return spec.family == Family::temporal ? predict_temporal_rate(spec.alpha, spec.s, spec.hurst, rho)
                                           : predict_spatial_rate(spec.alpha, spec.s, spec.hurst, rho);
  } catch (const ParameterError& e) {
    if (note) *note = e.what();
    return std::nullopt;
  }
}

double least_squares_rate(std::span<const double> resolutions, std::span<const double> errors) {
  if (resolutions.size() != errors.size() || errors.size() < 2)
    throw ParameterError("least_squares_rate: need at least two (resolution, error) pairs");
  const double n = static_cast<double>(errors.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double x = std::log(resolutions[i]);
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SFDE_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw ParameterError(std::string("SFDE_WORKERS must be a positive integer, got '") + env + "'");
  }
  return static_cast<std::size_t>(std::max(1, omp_get_max_threads()));
}

ConvergenceReport run_temporal_family(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.family != Family::temporal) throw ParameterError("run_temporal_family: spec is not temporal");
  ConvergenceReport report{spec, {}, {}, {}, 0.0, std::nullopt, {}};
  if (spec.levels.empty()) {
    finish_report(report);
    return report;
  }

  const std::size_t level_count = spec.levels.size();
  const std::size_t finest = spec.levels.back() * spec.refinement;
  std::vector<std::size_t> grids;  // distinct step counts, ascending
  for (auto n : spec.levels) {
    grids.push_back(n);
    grids.push_back(n * spec.refinement);
  }
  std::sort(grids.begin(), grids.end());
  grids.erase(std::unique(grids.begin(), grids.end()), grids.end());
  for (auto n : grids)
    if (finest % n != 0) throw ParameterError("temporal levels must divide the finest step count");

  const fgn::FbmSampler sampler(spec.hurst, finest, spec.final_time / static_cast<double>(finest));
  const double beta = 1.0 - spec.alpha;

  // Shared, read-only per-grid data.
  std::map<std::size_t, convquad::CqWeightTable> weights;
  for (auto n : grids) weights.emplace(n, convquad::cq_weights(beta, spec.final_time / static_cast<double>(n), n));

  std::vector<std::vector<double>> squared(spec.trajectories, std::vector<double>(level_count, 0.0));
  const std::size_t workers = resolve_workers(spec.workers);

  if (spec.solver == Solver::modal) {
    const ModalMesh mesh(spec.elements, spec.s, spec.modes);
    std::map<std::size_t, stepper::FinalStatePropagator> propagators;
    for (auto n : grids) propagators.emplace(n, stepper::FinalStatePropagator(mesh.basis, weights.at(n), n));

    parallel_trajectories(spec.trajectories, workers, [&](std::size_t t) {
      const auto field = fgn::sample_noise_field(sampler, spec.modes, spec.m, spec.master_seed, t);
      std::map<std::size_t, Eigen::VectorXd> finals;
      for (auto n : grids) {
        const auto coarse = fgn::coarsen_field(field, finest / n);
        const Eigen::MatrixXd modal_rhs = mesh.modal_coupling * fgn::weighted_increments(coarse, spec.noise_scale);
        finals.emplace(n, propagators.at(n).final_modal(modal_rhs));
      }
      // The modal basis is Mass-orthonormal, so the L2 norm is Euclidean here.
      for (std::size_t l = 0; l < level_count; ++l)
        squared[t][l] = (finals.at(spec.levels[l]) - finals.at(spec.levels[l] * spec.refinement)).squaredNorm();
    });
  } else {
    const auto ops = fracfem::assemble_operators(fracfem::Mesh1D(spec.elements), spec.s, spec.modes);
    std::map<std::size_t, stepper::StepMatrix> systems;
    for (auto n : grids) systems.emplace(n, stepper::StepMatrix(ops, weights.at(n)));

    parallel_trajectories(spec.trajectories, workers, [&](std::size_t t) {
      const auto field = fgn::sample_noise_field(sampler, spec.modes, spec.m, spec.master_seed, t);
      std::map<std::size_t, Eigen::VectorXd> finals;
      for (auto n : grids) {
        const auto coarse = fgn::coarsen_field(field, finest / n);
        const Eigen::MatrixXd coeffs = stepper::solve_with_rhs(ops, weights.at(n), systems.at(n),
                                                               stepper::noise_rhs(ops, coarse, spec.noise_scale));
        finals.emplace(n, coeffs.col(coeffs.cols() - 1));
      }
      for (std::size_t l = 0; l < level_count; ++l)
        squared[t][l] = fracfem::l2_norm_squared(
            ops.mesh, finals.at(spec.levels[l]) - finals.at(spec.levels[l] * spec.refinement));
    });
  }

  report.errors = rms_by_level(squared, level_count);
  for (auto n : spec.levels) report.resolutions.push_back(spec.final_time / static_cast<double>(n));
  finish_report(report);
  return report;
}

ConvergenceReport run_spatial_family(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.family != Family::spatial) throw ParameterError("run_spatial_family: spec is not spatial");
  ConvergenceReport report{spec, {}, {}, {}, 0.0, std::nullopt, {}};
  if (spec.levels.empty()) {
    finish_report(report);
    return report;
  }

  const std::size_t level_count = spec.levels.size();
  std::vector<std::size_t> meshes;
  for (auto p : spec.levels) {
    meshes.push_back(p);
    meshes.push_back(p * spec.refinement);
  }
  std::sort(meshes.begin(), meshes.end());
  meshes.erase(std::unique(meshes.begin(), meshes.end()), meshes.end());

  const double tau = spec.final_time / static_cast<double>(spec.steps);
  const fgn::FbmSampler sampler(spec.hurst, spec.steps, tau);
  const auto weights = convquad::cq_weights(1.0 - spec.alpha, tau, spec.steps);

  std::vector<std::vector<double>> squared(spec.trajectories, std::vector<double>(level_count, 0.0));
  const std::size_t workers = resolve_workers(spec.workers);

  auto accumulate = [&](std::size_t t, const std::map<std::size_t, Eigen::VectorXd>& finals) {
    for (std::size_t l = 0; l < level_count; ++l) {
      const fracfem::Mesh1D coarse(spec.levels[l]);
      const fracfem::Mesh1D fine(spec.levels[l] * spec.refinement);
      const Eigen::VectorXd diff =
          fracfem::prolongate(finals.at(coarse.element_count()), coarse, fine) - finals.at(fine.element_count());
      squared[t][l] = fracfem::l2_norm_squared(fine, diff);
    }
  };

  if (spec.solver == Solver::modal) {
    std::map<std::size_t, ModalMesh> data;
    std::map<std::size_t, stepper::FinalStatePropagator> propagators;
    for (auto p : meshes) {
      const auto& mesh = data.try_emplace(p, p, spec.s, spec.modes).first->second;
      propagators.emplace(p, stepper::FinalStatePropagator(mesh.basis, weights, spec.steps));
    }
    parallel_trajectories(spec.trajectories, workers, [&](std::size_t t) {
      const auto field = fgn::sample_noise_field(sampler, spec.modes, spec.m, spec.master_seed, t);
      const Eigen::MatrixXd increments = fgn::weighted_increments(field, spec.noise_scale);
      std::map<std::size_t, Eigen::VectorXd> finals;
      for (auto p : meshes) {
        const auto& mesh = data.at(p);
        const Eigen::MatrixXd modal_rhs = mesh.modal_coupling * increments;
        finals.emplace(p, mesh.basis->vectors * propagators.at(p).final_modal(modal_rhs));
      }
      accumulate(t, finals);
    });
  } else {
    std::map<std::size_t, fracfem::FemOperators> ops;
    std::map<std::size_t, stepper::StepMatrix> systems;
    for (auto p : meshes) {
      const auto& o = ops.emplace(p, fracfem::assemble_operators(fracfem::Mesh1D(p), spec.s, spec.modes)).first->second;
      systems.emplace(p, stepper::StepMatrix(o, weights));
    }
    parallel_trajectories(spec.trajectories, workers, [&](std::size_t t) {
      const auto field = fgn::sample_noise_field(sampler, spec.modes, spec.m, spec.master_seed, t);
      std::map<std::size_t, Eigen::VectorXd> finals;
      for (auto p : meshes) {
        const auto& o = ops.at(p);
        const Eigen::MatrixXd coeffs =
            stepper::solve_with_rhs(o, weights, systems.at(p), stepper::noise_rhs(o, field, spec.noise_scale));
        finals.emplace(p, coeffs.col(coeffs.cols() - 1));
      }
      accumulate(t, finals);
    });
  }

  report.errors = rms_by_level(squared, level_count);
  for (auto p : spec.levels) report.resolutions.push_back(1.0 / static_cast<double>(p));
  finish_report(report);
  return report;
}

ConvergenceReport run_family(const ExperimentSpec& spec) {
  return spec.family == Family::temporal ? run_temporal_family(spec) : run_spatial_family(spec);
}

HolderEstimate estimate_holder_exponent(const ExperimentSpec& spec, std::span<const std::size_t> lag_steps) {
  spec.validate();
  const auto ops = fracfem::assemble_operators(fracfem::Mesh1D(spec.elements), spec.s, spec.modes);
  return estimate_holder_exponent(spec, ops, lag_steps);
}

HolderEstimate estimate_holder_exponent(const ExperimentSpec& spec, const fracfem::FemOperators& ops,
                                        std::span<const std::size_t> lag_steps) {
  if (lag_steps.size() < 2) throw ParameterError("estimate_holder_exponent: need at least 2 lags");
  for (auto lag : lag_steps)
    if (lag < 1 || lag >= spec.steps)
      throw ParameterError("estimate_holder_exponent: lag " + std::to_string(lag) + " outside [1, " +
                           std::to_string(spec.steps - 1) + "]");

  const double tau = spec.final_time / static_cast<double>(spec.steps);
  const fgn::FbmSampler sampler(spec.hurst, spec.steps, tau);
  const auto weights = convquad::cq_weights(1.0 - spec.alpha, tau, spec.steps);
  const std::size_t modes = ops.modes();
  const std::size_t workers = resolve_workers(spec.workers);

  std::vector<std::vector<double>> squared(spec.trajectories, std::vector<double>(lag_steps.size(), 0.0));
  if (spec.solver == Solver::modal) {
    const auto basis = std::make_shared<const stepper::ModalBasis>(stepper::modal_basis(ops));
    const Eigen::MatrixXd modal_coupling = basis->vectors.transpose() * ops.coupling;
    const stepper::FinalStatePropagator propagator(basis, weights, spec.steps);
    parallel_trajectories(spec.trajectories, workers, [&](std::size_t t) {
      const auto field = fgn::sample_noise_field(sampler, modes, spec.m, spec.master_seed, t);
      const Eigen::MatrixXd modal_rhs = modal_coupling * fgn::weighted_increments(field, spec.noise_scale);
      const Eigen::VectorXd last = propagator.final_modal(modal_rhs);
      for (std::size_t i = 0; i < lag_steps.size(); ++i)
        squared[t][i] = (last - propagator.modal_at(modal_rhs, spec.steps - lag_steps[i])).squaredNorm();
    });
  } else {
    const stepper::StepMatrix system(ops, weights);
    parallel_trajectories(spec.trajectories, workers, [&](std::size_t t) {
      const auto field = fgn::sample_noise_field(sampler, modes, spec.m, spec.master_seed, t);
      const Eigen::MatrixXd coeffs =
          stepper::solve_with_rhs(ops, weights, system, stepper::noise_rhs(ops, field, spec.noise_scale));
      const Eigen::Index last = coeffs.cols() - 1;
      for (std::size_t i = 0; i < lag_steps.size(); ++i)
        squared[t][i] = fracfem::l2_norm_squared(
            ops.mesh, coeffs.col(last) - coeffs.col(last - static_cast<Eigen::Index>(lag_steps[i])));
    });
  }

  HolderEstimate out;
  out.rms_increments = rms_by_level(squared, lag_steps.size());
  for (auto lag : lag_steps) out.lags.push_back(static_cast<double>(lag) * tau);
  for (double r : out.rms_increments)
    if (!(r > 0.0)) throw NumericError("estimate_holder_exponent: zero increments, exponent undefined");
  out.exponent = least_squares_rate(out.lags, out.rms_increments);
  return out;
}

SobolevEstimate estimate_sobolev_norm(const Eigen::VectorXd& coeffs, const fracfem::Mesh1D& mesh, double sigma,
                                      std::size_t modes) {
  if (sigma < 0.0) throw ParameterError("estimate_sobolev_norm: sigma must be non-negative");
  const Eigen::VectorXd sine = fracfem::sine_transform(coeffs, mesh, modes);
  const std::size_t tail_start = modes - std::max<std::size_t>(modes / 10, 1);
  double total = 0.0, tail = 0.0;
  for (std::size_t k = 0; k < modes; ++k) {
    const double term =
        std::pow(static_cast<double>(k + 1) * std::numbers::pi, 2.0 * sigma) * sine[static_cast<Eigen::Index>(k)] *
        sine[static_cast<Eigen::Index>(k)];
    total += term;
    if (k >= tail_start) tail += term;
  }
  SobolevEstimate out;
  out.value = total;
  out.tail_fraction = total > 0.0 ? tail / total : 0.0;
  out.tail_warning = out.tail_fraction > 0.01;
  return out;
}

SobolevEstimate estimate_sobolev_norm(const stepper::TrajectorySolution& solution, double sigma, std::size_t modes) {
  return estimate_sobolev_norm(solution.final_state(), solution.config.mesh, sigma, modes);
}

SobolevEstimate run_sobolev_diagnostic(const ExperimentSpec& spec, double sigma) {
  spec.validate();
  const double tau = spec.final_time / static_cast<double>(spec.steps);
  const fgn::FbmSampler sampler(spec.hurst, spec.steps, tau);
  const auto weights = convquad::cq_weights(1.0 - spec.alpha, tau, spec.steps);
  const ModalMesh mesh(spec.elements, spec.s, spec.modes);
  const stepper::FinalStatePropagator propagator(mesh.basis, weights, spec.steps);

  std::vector<SobolevEstimate> per(spec.trajectories);
  parallel_trajectories(spec.trajectories, resolve_workers(spec.workers), [&](std::size_t t) {
    const auto field = fgn::sample_noise_field(sampler, spec.modes, spec.m, spec.master_seed, t);
    const Eigen::MatrixXd modal_rhs = mesh.modal_coupling * fgn::weighted_increments(field, spec.noise_scale);
    const Eigen::VectorXd u = mesh.basis->vectors * propagator.final_modal(modal_rhs);
    per[t] = estimate_sobolev_norm(u, mesh.ops.mesh, sigma, spec.modes);
  });

  SobolevEstimate out;
  double tail = 0.0;
  for (const auto& e : per) {
    out.value += e.value;
    tail += e.tail_fraction * e.value;
  }
  out.tail_fraction = out.value > 0.0 ? tail / out.value : 0.0;
  out.value /= static_cast<double>(per.size());
  out.tail_warning = out.tail_fraction > 0.01;
  return out;
}

}  // namespace sfde::experiments
