#include "sfde/fracfem.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <fftw3.h>

#include "fftw_lock.hpp"
#include "sfde/errors.hpp"

namespace sfde::fracfem {

namespace {

constexpr double kPi = std::numbers::pi;

// Lags at or beyond this use the asymptotic fourth-difference expansion.
constexpr std::size_t kAsymptoticLag = 16;

// |s - 1/2| below this takes the logarithmic antiderivative exactly.
constexpr double kLogBand = 1e-8;

// Fourth antiderivative of |z|^{-1-2s}, modulo quadratics (which the fourth
// difference annihilates): z^2 (|z|^{1-2s} - 1) / ((1-2s)(-2s)(2-2s)(3-2s)).
// Near s = 1/2 the z^2-subtracted expm1 form is used; it is continuous
// through s = 1/2, where it becomes -z^2 ln|z| / 2.
long double antiderivative4(long double s, long double z) {
  if (z == 0.0L) return 0.0L;
  const long double eps = 1.0L - 2.0L * s;
  const long double log_z = std::log(std::fabs(z));
  const long double denom = (-2.0L * s) * (2.0L - 2.0L * s) * (3.0L - 2.0L * s);
  if (std::fabs(eps) > 0.25L) return std::exp((3.0L - 2.0L * s) * log_z) / (eps * denom);
  const long double ratio = std::fabs(eps) < kLogBand ? log_z : std::expm1(eps * log_z) / eps;
  return z * z * ratio / denom;
}

double reference_stiffness_direct(double s, std::size_t lag) {
  static constexpr std::array<long double, 5> kDiff{1.0L, -4.0L, 6.0L, -4.0L, 1.0L};
  long double acc = 0.0L;
  for (int m = 0; m < 5; ++m) {
    const long double z = static_cast<long double>(lag) + static_cast<long double>(m - 2);
    acc += kDiff[m] * antiderivative4(s, z);
  }
  return static_cast<double>(-2.0L * acc);
}

// delta^4 = D^4 + D^6/6 + D^8/80 + 17 D^10/30240 + 31 D^12/1814400 + D^14/2661120 + ...
double reference_stiffness_asymptotic(double s, std::size_t lag) {
  static constexpr std::array<double, 6> kSeries{1.0,           1.0 / 6.0,        1.0 / 80.0,
                                                 17.0 / 30240.0, 31.0 / 1814400.0, 1.0 / 2661120.0};
  const double lambda = -1.0 - 2.0 * s;
  const double k = static_cast<double>(lag);
  const double inv_k2 = 1.0 / (k * k);
  double derivative = std::pow(k, lambda);  // D^4 Q = |z|^lambda
  double exponent = lambda;
  double acc = 0.0;
  for (double c : kSeries) {
    acc += c * derivative;
    derivative *= exponent * (exponent - 1.0) * inv_k2;
    exponent -= 2.0;
  }
  return -2.0 * acc;
}

double cubic_bspline(double t) {
  const double a = std::abs(t);
  if (a < 1.0) return 2.0 / 3.0 - a * a + 0.5 * a * a * a;
  if (a < 2.0) {
    const double b = 2.0 - a;
    return b * b * b / 6.0;
  }
  return 0.0;
}

void require_s(double s) { require_open_interval("s", s, 0.0, 1.0); }

}  // namespace

Mesh1D::Mesh1D(std::size_t element_count) : elements_(element_count) {
  if (element_count < 2)
    throw ParameterError("Mesh1D: need at least 2 elements (one interior node), got " +
                         std::to_string(element_count));
}

double frac_constant(int dimension, double s) {
  require_s(s);
  if (dimension < 1) throw ParameterError("frac_constant: dimension must be positive");
  const double d = static_cast<double>(dimension);
  return std::pow(2.0, 2.0 * s) * s * std::tgamma(0.5 * d + s) /
         (std::pow(kPi, 0.5 * d) * std::tgamma(1.0 - s));
}

double reference_stiffness(double s, std::size_t lag) {
  require_s(s);
  return lag < kAsymptoticLag ? reference_stiffness_direct(s, lag)
                              : reference_stiffness_asymptotic(s, lag);
}

double reference_stiffness_quadrature(double s, std::size_t lag) {
  require_s(s);
  const double k = static_cast<double>(lag);
  const double psi_k = cubic_bspline(k);
  auto integrand = [&](double z) {
    return std::pow(z, -1.0 - 2.0 * s) * (2.0 * psi_k - cubic_bspline(z - k) - cubic_bspline(z + k));
  };
  // On [0,1] the bracket is z^2 (a + b z); integrate that piece exactly to
  // avoid cancellation next to the singular point.
  double a = 0.0, b = 0.0;
  if (lag == 0) { a = 2.0; b = -1.0; }
  else if (lag == 1) { a = -1.0; b = 2.0 / 3.0; }
  else if (lag == 2) { b = -1.0 / 6.0; }
  double acc = a / (2.0 - 2.0 * s) + b / (3.0 - 2.0 * s);

  boost::math::quadrature::tanh_sinh<double> integrator;
  const std::size_t last = lag + 2;
  for (std::size_t left = 1; left < last; ++left)
    acc += integrator.integrate(integrand, static_cast<double>(left), static_cast<double>(left + 1));
  // Beyond k+2 only the constant 2 psi(k) survives.
  acc += 2.0 * psi_k * std::pow(static_cast<double>(last), -2.0 * s) / (2.0 * s);
  return 2.0 * acc;
}

std::vector<double> stiffness_symbol(const Mesh1D& mesh, double s) {
  const std::size_t m = mesh.interior_node_count();
  const double scale = frac_constant(1, s) * std::pow(mesh.h(), 1.0 - 2.0 * s);
  std::vector<double> column(m);
  for (std::size_t k = 0; k < m; ++k) column[k] = scale * reference_stiffness(s, k);
  return column;
}

Eigen::MatrixXd assemble_mass(const Mesh1D& mesh) {
  const auto m = static_cast<Eigen::Index>(mesh.interior_node_count());
  const double h = mesh.h();
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    mass(i, i) = 2.0 * h / 3.0;
    if (i + 1 < m) mass(i, i + 1) = mass(i + 1, i) = h / 6.0;
  }
  return mass;
}

Eigen::MatrixXd assemble_frac_stiffness(const Mesh1D& mesh, double s, AssemblyOptions options) {
  const std::vector<double> column = stiffness_symbol(mesh, s);
  const auto m = static_cast<Eigen::Index>(column.size());

  if (options.self_check) {
    const std::size_t checked = std::min<std::size_t>(column.size(), 8);
    for (std::size_t k = 0; k < checked; ++k) {
      const double closed = reference_stiffness(s, k);
      const double quad = reference_stiffness_quadrature(s, k);
      if (std::abs(closed - quad) > options.self_check_tolerance * std::abs(quad)) {
        std::ostringstream os;
        os.precision(17);
        os << "stiffness self-check failed at s=" << s << ", lag " << k << ": closed form " << closed
           << " vs quadrature " << quad;
        throw NumericError(os.str());
      }
    }
  }

  Eigen::MatrixXd stiffness(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) stiffness(i, j) = column[static_cast<std::size_t>(std::abs(i - j))];
  return stiffness;
}

Eigen::MatrixXd assemble_coupling(const Mesh1D& mesh, std::size_t modes) {
  if (modes < 1) throw ParameterError("assemble_coupling: need at least one mode");
  const auto m = static_cast<Eigen::Index>(mesh.interior_node_count());
  const double h = mesh.h();
  Eigen::MatrixXd coupling(m, static_cast<Eigen::Index>(modes));
  for (std::size_t k = 1; k <= modes; ++k) {
    const double kp = static_cast<double>(k) * kPi;
    const double factor = std::sqrt(2.0) * (2.0 - 2.0 * std::cos(kp * h)) / (kp * kp * h);
    for (Eigen::Index j = 0; j < m; ++j)
      coupling(j, static_cast<Eigen::Index>(k - 1)) = factor * std::sin(kp * mesh.node(static_cast<std::size_t>(j)));
  }
  return coupling;
}

Eigen::VectorXd sine_transform(const Eigen::VectorXd& coeffs, const Mesh1D& mesh, std::size_t modes) {
  if (static_cast<std::size_t>(coeffs.size()) != mesh.interior_node_count())
    throw ContractError("sine_transform: coefficient vector does not match the mesh");
  return assemble_coupling(mesh, modes).transpose() * coeffs;
}

struct ToeplitzOperator::Plans {
  std::size_t n;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<std::complex<double>> symbol;  // spectrum of the embedding circulant

  explicit Plans(const std::vector<double>& column) : n(2 * column.size()) {
    std::vector<double> real(n, 0.0);
    std::vector<std::complex<double>> spec(n / 2 + 1);
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.data(),
                                     reinterpret_cast<fftw_complex*>(spec.data()),
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
      backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(spec.data()),
                                      real.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    const std::size_t m = column.size();
    for (std::size_t k = 0; k < m; ++k) real[k] = column[k];
    for (std::size_t k = 1; k < m; ++k) real[n - k] = column[k];
    fftw_execute_dft_r2c(forward, real.data(), reinterpret_cast<fftw_complex*>(spec.data()));
    symbol = std::move(spec);
  }
  ~Plans() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
};

ToeplitzOperator::ToeplitzOperator(std::vector<double> first_column) : column_(std::move(first_column)) {
  if (column_.empty()) throw ParameterError("ToeplitzOperator: empty column");
  plans_ = std::make_unique<Plans>(column_);
}

ToeplitzOperator::~ToeplitzOperator() = default;
ToeplitzOperator::ToeplitzOperator(ToeplitzOperator&&) noexcept = default;
ToeplitzOperator& ToeplitzOperator::operator=(ToeplitzOperator&&) noexcept = default;

Eigen::VectorXd ToeplitzOperator::apply(const Eigen::VectorXd& x) const {
  const std::size_t m = column_.size();
  if (static_cast<std::size_t>(x.size()) != m) throw ContractError("ToeplitzOperator: size mismatch");
  const std::size_t n = plans_->n;
  std::vector<double> real(n, 0.0);
  std::vector<std::complex<double>> spec(n / 2 + 1);
  for (std::size_t i = 0; i < m; ++i) real[i] = x[static_cast<Eigen::Index>(i)];
  fftw_execute_dft_r2c(plans_->forward, real.data(), reinterpret_cast<fftw_complex*>(spec.data()));
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= plans_->symbol[k];
  fftw_execute_dft_c2r(plans_->backward, reinterpret_cast<fftw_complex*>(spec.data()), real.data());
  Eigen::VectorXd y(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) y[static_cast<Eigen::Index>(i)] = real[i] / static_cast<double>(n);
  return y;
}

FemOperators assemble_operators(const Mesh1D& mesh, double s, std::size_t modes, AssemblyOptions options) {
  return FemOperators{mesh, s, assemble_mass(mesh), assemble_frac_stiffness(mesh, s, options),
                      assemble_coupling(mesh, modes)};
}

double l2_norm_squared(const Mesh1D& mesh, const Eigen::VectorXd& coeffs) {
  if (static_cast<std::size_t>(coeffs.size()) != mesh.interior_node_count())
    throw ContractError("l2_norm_squared: coefficient vector does not match the mesh");
  const Eigen::Index m = coeffs.size();
  const double diagonal = coeffs.squaredNorm();
  const double off = m > 1 ? coeffs.head(m - 1).dot(coeffs.tail(m - 1)) : 0.0;
  return mesh.h() * (2.0 / 3.0 * diagonal + 2.0 / 6.0 * off);
}

Eigen::VectorXd prolongate(const Eigen::VectorXd& coeffs, const Mesh1D& coarse, const Mesh1D& fine) {
  if (static_cast<std::size_t>(coeffs.size()) != coarse.interior_node_count())
    throw ContractError("prolongate: coefficient vector does not match the coarse mesh");
  if (fine.element_count() % coarse.element_count() != 0)
    throw ParameterError("prolongate: meshes are not nested (" + std::to_string(coarse.element_count()) +
                         " does not divide " + std::to_string(fine.element_count()) + ")");
  const std::size_t ratio = fine.element_count() / coarse.element_count();
  const std::size_t m = fine.interior_node_count();
  // Coarse nodal values including the zero boundary values at both ends.
  auto coarse_value = [&](std::size_t node) {
    if (node == 0 || node == coarse.element_count()) return 0.0;
    return coeffs[static_cast<Eigen::Index>(node - 1)];
  };
  Eigen::VectorXd out(static_cast<Eigen::Index>(m));
  for (std::size_t j = 1; j <= m; ++j) {
    const std::size_t left = j / ratio;
    const std::size_t offset = j % ratio;
    const double w = static_cast<double>(offset) / static_cast<double>(ratio);
    out[static_cast<Eigen::Index>(j - 1)] =
        offset == 0 ? coarse_value(left) : (1.0 - w) * coarse_value(left) + w * coarse_value(left + 1);
  }
  return out;
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& matrix, double s, double h) {
  out.precision(17);
  out << "# M=" << matrix.rows() << ",cols=" << matrix.cols() << ",s=" << s << ",h=" << h << '\n';
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (j) out << ',';
      out << matrix(i, j);
    }
    out << '\n';
  }
}

MatrixFile read_matrix_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("# M=", 0) != 0)
    throw ParameterError("read_matrix_csv: missing '# M=' header");
  long rows = 0, cols = 0;
  MatrixFile file;
  if (std::sscanf(header.c_str(), "# M=%ld,cols=%ld,s=%lf,h=%lf", &rows, &cols, &file.s, &file.h) != 4 ||
      rows < 0 || cols < 0)
    throw ParameterError("read_matrix_csv: malformed header '" + header + "'");
  file.matrix.resize(rows, cols);
  std::string line;
  for (long i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw ParameterError("read_matrix_csv: truncated file");
    std::istringstream row(line);
    std::string cell;
    for (long j = 0; j < cols; ++j) {
      if (!std::getline(row, cell, ',')) throw ParameterError("read_matrix_csv: short row");
      file.matrix(i, j) = std::stod(cell);
    }
  }
  return file;
}

}  // namespace sfde::fracfem
