#pragma once

// Piecewise-linear finite elements on a uniform mesh of D = (0,1) for the
// integral fractional Laplacian with zero exterior data.
//
// Interior hats are extended by zero, so the bilinear form
//   <u, w>_s = c_{1,s} \iint_{R^2} (u(x)-u(y)) (w(x)-w(y)) / |x-y|^{1+2s} dy dx
// is translation invariant on the hat basis: the stiffness matrix is
// symmetric Toeplitz with entries c_{1,s} h^{1-2s} a_s(|i-j|).

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace sfde::fracfem {

class Mesh1D {
 public:
  explicit Mesh1D(std::size_t element_count);

  std::size_t element_count() const { return elements_; }
  std::size_t interior_node_count() const { return elements_ - 1; }
  double h() const { return 1.0 / static_cast<double>(elements_); }
  /// Coordinate of interior node j, 0-based (x = (j+1) h).
  double node(std::size_t j) const { return static_cast<double>(j + 1) * h(); }

  friend bool operator==(const Mesh1D&, const Mesh1D&) = default;

 private:
  std::size_t elements_;
};

/// c_{d,s} = 2^{2s} s Gamma(d/2 + s) / (pi^{d/2} Gamma(1 - s)).
double frac_constant(int dimension, double s);

/// Dimensionless stiffness symbol a_s(k) for reference hats on unit spacing:
/// minus twice the central fourth difference of the fourth antiderivative of
/// |z|^{-1-2s}. Small lags are evaluated in extended precision, large lags by
/// the asymptotic expansion of the fourth difference.
double reference_stiffness(double s, std::size_t lag);

/// Same quantity from the one-dimensional correlation integral
///   a_s(k) = 2 \int_0^inf z^{-1-2s} (2 psi(k) - psi(z-k) - psi(z+k)) dz,
/// psi the cubic B-spline, by tanh-sinh quadrature. Used by the assembly self-check.
double reference_stiffness_quadrature(double s, std::size_t lag);

/// First column of the stiffness matrix, entry k = c_{1,s} h^{1-2s} a_s(k).
std::vector<double> stiffness_symbol(const Mesh1D& mesh, double s);

struct AssemblyOptions {
  /// Compare the leading lags against reference_stiffness_quadrature and throw
  /// NumericError on relative disagreement above `self_check_tolerance`.
  bool self_check = false;
  double self_check_tolerance = 1e-6;
};

Eigen::MatrixXd assemble_mass(const Mesh1D& mesh);
Eigen::MatrixXd assemble_frac_stiffness(const Mesh1D& mesh, double s, AssemblyOptions options = {});

/// Entry (j, k-1) = \int_0^1 hat_j(x) sqrt(2) sin(k pi x) dx.
Eigen::MatrixXd assemble_coupling(const Mesh1D& mesh, std::size_t modes);

/// (u_h, phi_k) for k = 1..K given hat coefficients.
Eigen::VectorXd sine_transform(const Eigen::VectorXd& coeffs, const Mesh1D& mesh, std::size_t modes);

/// O(M log M) matvec with a symmetric Toeplitz matrix via a circulant of size 2M.
class ToeplitzOperator {
 public:
  explicit ToeplitzOperator(std::vector<double> first_column);
  ~ToeplitzOperator();
  ToeplitzOperator(ToeplitzOperator&&) noexcept;
  ToeplitzOperator& operator=(ToeplitzOperator&&) noexcept;

  std::size_t size() const { return column_.size(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

 private:
  struct Plans;
  std::vector<double> column_;
  std::unique_ptr<Plans> plans_;
};

struct FemOperators {
  Mesh1D mesh;
  double s;
  Eigen::MatrixXd mass;
  Eigen::MatrixXd stiffness;
  Eigen::MatrixXd coupling;  // M x K

  std::size_t size() const { return mesh.interior_node_count(); }
  std::size_t modes() const { return static_cast<std::size_t>(coupling.cols()); }
};

FemOperators assemble_operators(const Mesh1D& mesh, double s, std::size_t modes,
                                AssemblyOptions options = {});

/// u^T Mass u for hat coefficients u, without forming the mass matrix.
double l2_norm_squared(const Mesh1D& mesh, const Eigen::VectorXd& coeffs);

/// Nodal interpolation of hat coefficients from `coarse` onto the nested mesh `fine`.
Eigen::VectorXd prolongate(const Eigen::VectorXd& coeffs, const Mesh1D& coarse, const Mesh1D& fine);

struct MatrixFile {
  Eigen::MatrixXd matrix;
  double s = 0.0;
  double h = 0.0;
};

/// Row-major CSV with a leading comment header `# M=<rows>,cols=<cols>,s=<s>,h=<h>`.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& matrix, double s, double h);
MatrixFile read_matrix_csv(std::istream& in);

}  // namespace sfde::fracfem
