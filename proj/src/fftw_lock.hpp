#pragma once

#include <mutex>

namespace sfde::detail {

// FFTW's planner is not thread-safe; plan execution with new arrays is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace sfde::detail
