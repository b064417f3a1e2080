#pragma once

// Fully discrete scheme: backward-Euler convolution quadrature in time,
// P1 finite elements in space. In the hat basis each step solves
//
//   (Mass + tau d_0 S) u^n = Mass u^{n-1} - tau sum_{i=1}^{n-1} d_i S u^{n-i} + r^n,
//
// with d_i the CQ weights of order 1 - alpha and r^n_j = (W_Q(t_n) - W_Q(t_{n-1}), hat_j).

#include <cstddef>
#include <memory>

#include <Eigen/Dense>

#include "sfde/convquad.hpp"
#include "sfde/fgn.hpp"
#include "sfde/fracfem.hpp"

namespace sfde::stepper {

struct SchemeConfig {
  double alpha = 0.5;
  double s = 0.5;
  double hurst = 0.75;
  double final_time = 1.0;
  std::size_t steps = 1;
  fracfem::Mesh1D mesh{2};
  std::size_t modes = 1;

  double tau() const { return final_time / static_cast<double>(steps); }
  /// Throws ParameterError naming the admissible interval of the first bad field.
  void validate() const;
};

struct TrajectorySolution {
  SchemeConfig config;
  Eigen::MatrixXd coeffs;  // M x (N+1); column n is u^n_h, column 0 is zero

  Eigen::VectorXd final_state() const { return coeffs.col(coeffs.cols() - 1); }
};

/// Cholesky factor of the step matrix Mass + tau d_0 S, shared by every step
/// and trajectory. Solves are const and may run concurrently.
class StepMatrix {
 public:
  StepMatrix(const fracfem::FemOperators& ops, const convquad::CqWeightTable& weights);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }

 private:
  Eigen::MatrixXd matrix_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

StepMatrix step_matrix(const fracfem::FemOperators& ops, const convquad::CqWeightTable& weights);

/// Coefficient history plus cached S u^k products for one trajectory.
struct TrajectoryState {
  Eigen::MatrixXd coeffs;               // M x (N+1)
  Eigen::MatrixXd stiffness_products;   // M x (N+1), column k = S u^k
  std::size_t computed = 0;             // highest step index filled

  TrajectoryState(std::size_t nodes, std::size_t steps);
};

/// Computes u^n. Requires steps 0..n-1 to be present in `state`.
void advance(TrajectoryState& state, std::size_t n, const fracfem::FemOperators& ops,
             const convquad::CqWeightTable& weights, const StepMatrix& system,
             const Eigen::VectorXd& noise_rhs);

/// Marches all N steps for right-hand sides given column-wise (M x N).
Eigen::MatrixXd solve_with_rhs(const fracfem::FemOperators& ops, const convquad::CqWeightTable& weights,
                               const StepMatrix& system, const Eigen::MatrixXd& rhs);

/// Noise right-hand sides r^n = coupling * (sqrt(Lambda) .* increments), all n at once.
Eigen::MatrixXd noise_rhs(const fracfem::FemOperators& ops, const fgn::NoiseField& field, double scale = 1.0);

TrajectorySolution solve_trajectory(const SchemeConfig& config, const fgn::NoiseField& field,
                                    const fracfem::FemOperators& ops, const convquad::CqWeightTable& weights);

/// Generalized eigenpairs S v = lambda Mass v with V^T Mass V = I.
struct ModalBasis {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd vectors;
};

ModalBasis modal_basis(const fracfem::FemOperators& ops);

/// Maps right-hand sides r^1..r^N directly to u^N.
///
/// In the modal basis the scheme decouples into scalar recurrences
///   (1 + tau d_0 lambda) c^n = c^{n-1} - tau lambda sum_{i>=1} d_i c^{n-i} + q^n,
/// so c^N_j = sum_n g_j(N-n) q^n_j with g_j the impulse response of mode j.
/// The responses cost O(M N^2) once and are shared by every trajectory; each
/// trajectory then costs one projection plus O(M N). Results agree with the
/// stepping route up to round-off.
class FinalStatePropagator {
 public:
  FinalStatePropagator(std::shared_ptr<const ModalBasis> basis, const convquad::CqWeightTable& weights,
                       std::size_t steps);

  std::size_t steps() const { return static_cast<std::size_t>(response_.cols()); }
  const ModalBasis& basis() const { return *basis_; }

  /// Modal coefficients of u^N from modal right-hand sides q (M x N).
  Eigen::VectorXd final_modal(const Eigen::MatrixXd& modal_rhs) const;
  /// Modal coefficients of u^n, 1 <= n <= N, from the first n columns of q.
  Eigen::VectorXd modal_at(const Eigen::MatrixXd& modal_rhs, std::size_t n) const;
  /// Hat coefficients of u^N from hat-basis right-hand sides (M x N).
  Eigen::VectorXd final_state(const Eigen::MatrixXd& rhs) const;

 private:
  std::shared_ptr<const ModalBasis> basis_;
  Eigen::MatrixXd response_;  // column n-1 holds g(N-n)
};

}  // namespace sfde::stepper
