#pragma once

// Backward-Euler convolution quadrature for the Riemann-Liouville derivative
// of order beta in (0,1): the weights are the power-series coefficients of
// ((1 - zeta) / tau)^beta, indexed from d_0 = tau^{-beta}.

#include <cstddef>
#include <vector>

namespace sfde::convquad {

struct CqWeightTable {
  double order = 0.0;  // beta
  double tau = 0.0;
  std::vector<double> weights;  // d_0 .. d_{N-1}

  std::size_t size() const { return weights.size(); }
  double operator[](std::size_t i) const { return weights[i]; }
};

/// weights[i] = tau^{-beta} (-1)^i binom(beta, i), built with the recurrence
/// w_i = w_{i-1} (i - 1 - beta) / i.
CqWeightTable cq_weights(double beta, double tau, std::size_t count);

/// Applies the table to samples f(t_0..t_n) and returns the approximation of
/// the derivative at t_n: sum_{i=0}^{n} d_i f(t_{n-i}).
double apply_weights(const CqWeightTable& table, const std::vector<double>& samples, std::size_t n);

}  // namespace sfde::convquad
