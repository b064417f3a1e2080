#include "sfde/convquad.hpp"

#include <cmath>

#include "sfde/errors.hpp"

namespace sfde::convquad {

CqWeightTable cq_weights(double beta, double tau, std::size_t count) {
  require_open_interval("CQ order", beta, 0.0, 1.0);
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("cq_weights: tau must be positive");
  if (count < 1) throw ParameterError("cq_weights: need at least one weight");

  CqWeightTable table{beta, tau, std::vector<double>(count)};
  const double scale = std::pow(tau, -beta);
  double w = 1.0;
  table.weights[0] = scale;
  for (std::size_t i = 1; i < count; ++i) {
    w *= (static_cast<double>(i) - 1.0 - beta) / static_cast<double>(i);
    table.weights[i] = scale * w;
  }
  return table;
}

double apply_weights(const CqWeightTable& table, const std::vector<double>& samples, std::size_t n) {
  if (n >= table.size() || n >= samples.size())
    throw ContractError("apply_weights: index beyond table or samples");
  double acc = 0.0;
  for (std::size_t i = 0; i <= n; ++i) acc += table[i] * samples[n - i];
  return acc;
}

}  // namespace sfde::convquad
