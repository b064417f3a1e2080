#include "sfde/errors.hpp"

#include <cmath>
#include <sstream>

namespace sfde {

void require_open_interval(const std::string& name, double value, double lo, double hi) {
  if (std::isfinite(value) && value > lo && value < hi) return;
  std::ostringstream os;
  os << name << " = " << value << " is outside the admissible interval (" << lo << ", " << hi << ")";
  throw ParameterError(os.str());
}

}  // namespace sfde
