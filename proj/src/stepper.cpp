#include "sfde/stepper.hpp"

#include <cmath>
#include <string>

#include "sfde/errors.hpp"

namespace sfde::stepper {

void SchemeConfig::validate() const {
  require_open_interval("alpha", alpha, 0.0, 1.0);
  require_open_interval("s", s, 0.0, 1.0);
  require_open_interval("hurst", hurst, 0.5, 1.0);
  if (!(final_time > 0.0) || !std::isfinite(final_time))
    throw ParameterError("T = " + std::to_string(final_time) + " must be positive");
  if (steps < 1) throw ParameterError("N must be at least 1");
  if (modes < 1) throw ParameterError("modes K must be at least 1");
}

StepMatrix::StepMatrix(const fracfem::FemOperators& ops, const convquad::CqWeightTable& weights) {
  if (weights.size() < 1 || !(weights[0] > 0.0)) throw ParameterError("step_matrix: d_0 must be positive");
  matrix_ = ops.mass + (weights.tau * weights[0]) * ops.stiffness;
  llt_.compute(matrix_);
  if (llt_.info() != Eigen::Success)
    throw NumericError("step matrix is not positive definite; the assembled operators are indefinite");
}

StepMatrix step_matrix(const fracfem::FemOperators& ops, const convquad::CqWeightTable& weights) {
  return StepMatrix(ops, weights);
}

TrajectoryState::TrajectoryState(std::size_t nodes, std::size_t steps)
    : coeffs(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(steps + 1))),
      stiffness_products(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes),
                                               static_cast<Eigen::Index>(steps + 1))) {}

void advance(TrajectoryState& state, std::size_t n, const fracfem::FemOperators& ops,
             const convquad::CqWeightTable& weights, const StepMatrix& system,
             const Eigen::VectorXd& noise_rhs) {
  const auto last = static_cast<std::size_t>(state.coeffs.cols()) - 1;
  if (n < 1 || n > last)
    throw ContractError("advance: step " + std::to_string(n) + " outside [1, " + std::to_string(last) + "]");
  if (state.computed + 1 != n)
    throw ContractError("advance: history holds steps up to " + std::to_string(state.computed) +
                        ", cannot compute step " + std::to_string(n));
  if (weights.size() < n) throw ContractError("advance: CQ table shorter than the step index");
  if (noise_rhs.size() != state.coeffs.rows()) throw ContractError("advance: rhs size mismatch");

  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::VectorXd history = Eigen::VectorXd::Zero(state.coeffs.rows());
  for (std::size_t i = 1; i < n; ++i)
    history.noalias() += weights[i] * state.stiffness_products.col(ni - static_cast<Eigen::Index>(i));

  Eigen::VectorXd rhs = ops.mass * state.coeffs.col(ni - 1);
  rhs.noalias() -= weights.tau * history;
  rhs += noise_rhs;

  state.coeffs.col(ni) = system.solve(rhs);
  state.stiffness_products.col(ni).noalias() = ops.stiffness * state.coeffs.col(ni);
  state.computed = n;
}

Eigen::MatrixXd solve_with_rhs(const fracfem::FemOperators& ops, const convquad::CqWeightTable& weights,
                               const StepMatrix& system, const Eigen::MatrixXd& rhs) {
  const auto steps = static_cast<std::size_t>(rhs.cols());
  TrajectoryState state(ops.size(), steps);
  for (std::size_t n = 1; n <= steps; ++n)
    advance(state, n, ops, weights, system, rhs.col(static_cast<Eigen::Index>(n - 1)));
  return std::move(state.coeffs);
}

Eigen::MatrixXd noise_rhs(const fracfem::FemOperators& ops, const fgn::NoiseField& field, double scale) {
  if (ops.modes() != field.modes())
    throw ContractError("noise_rhs: coupling has " + std::to_string(ops.modes()) + " modes, field has " +
                        std::to_string(field.modes()));
  return ops.coupling * fgn::weighted_increments(field, scale);
}

TrajectorySolution solve_trajectory(const SchemeConfig& config, const fgn::NoiseField& field,
                                    const fracfem::FemOperators& ops, const convquad::CqWeightTable& weights) {
  config.validate();
  if (field.steps() != config.steps)
    throw ParameterError("solve_trajectory: noise has " + std::to_string(field.steps()) + " steps, scheme needs " +
                         std::to_string(config.steps));
  if (std::abs(field.grid_step() - config.tau()) > 1e-12 * config.tau())
    throw ParameterError("solve_trajectory: noise grid step does not match tau");
  if (!(ops.mesh == config.mesh)) throw ParameterError("solve_trajectory: operators built on a different mesh");
  if (std::abs(weights.tau - config.tau()) > 1e-12 * config.tau() || weights.size() < config.steps)
    throw ParameterError("solve_trajectory: CQ table does not match (tau, N)");

  const StepMatrix system(ops, weights);
  return TrajectorySolution{config, solve_with_rhs(ops, weights, system, noise_rhs(ops, field))};
}

ModalBasis modal_basis(const fracfem::FemOperators& ops) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(ops.stiffness, ops.mass,
                                                                   Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success) throw NumericError("modal_basis: generalized eigensolver failed");
  return ModalBasis{solver.eigenvalues(), solver.eigenvectors()};
}

FinalStatePropagator::FinalStatePropagator(std::shared_ptr<const ModalBasis> basis,
                                           const convquad::CqWeightTable& weights, std::size_t steps)
    : basis_(std::move(basis)) {
  if (!basis_) throw ContractError("FinalStatePropagator: null basis");
  if (steps < 1 || weights.size() < steps) throw ContractError("FinalStatePropagator: CQ table too short");
  const Eigen::Index m = basis_->eigenvalues.size();
  const auto n = static_cast<Eigen::Index>(steps);
  const double tau = weights.tau;
  const Eigen::ArrayXd lambda = basis_->eigenvalues.array();
  const Eigen::ArrayXd inv_diag = 1.0 / (1.0 + tau * weights[0] * lambda);

  // impulse(:, k) = g(k): response k steps after a unit right-hand side.
  Eigen::MatrixXd impulse(m, n);
  impulse.col(0) = inv_diag.matrix();
  Eigen::VectorXd reversed(n);
  for (Eigen::Index k = 1; k < n; ++k) {
    // history = sum_{i=1}^{k} d_i g(k-i)
    for (Eigen::Index c = 0; c < k; ++c) reversed[c] = weights[static_cast<std::size_t>(k - c)];
    const Eigen::VectorXd history = impulse.leftCols(k) * reversed.head(k);
    impulse.col(k) = ((impulse.col(k - 1).array() - tau * lambda * history.array()) * inv_diag).matrix();
  }
  response_.resize(m, n);
  for (Eigen::Index c = 0; c < n; ++c) response_.col(c) = impulse.col(n - 1 - c);
}

Eigen::VectorXd FinalStatePropagator::final_modal(const Eigen::MatrixXd& modal_rhs) const {
  if (modal_rhs.rows() != response_.rows() || modal_rhs.cols() != response_.cols())
    throw ContractError("final_modal: rhs must be M x N");
  return response_.cwiseProduct(modal_rhs).rowwise().sum();
}

Eigen::VectorXd FinalStatePropagator::modal_at(const Eigen::MatrixXd& modal_rhs, std::size_t n) const {
  if (modal_rhs.rows() != response_.rows() || modal_rhs.cols() < static_cast<Eigen::Index>(n))
    throw ContractError("modal_at: rhs has too few rows or columns");
  if (n < 1 || n > steps()) throw ContractError("modal_at: step outside [1, N]");
  const auto count = static_cast<Eigen::Index>(n);
  return response_.rightCols(count).cwiseProduct(modal_rhs.leftCols(count)).rowwise().sum();
}

Eigen::VectorXd FinalStatePropagator::final_state(const Eigen::MatrixXd& rhs) const {
  const Eigen::MatrixXd modal = basis_->vectors.transpose() * rhs;
  return basis_->vectors * final_modal(modal);
}

}  // namespace sfde::stepper
