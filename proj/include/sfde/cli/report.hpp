#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sfde/experiments.hpp"

namespace sfde::cli {

using Metadata = std::vector<std::pair<std::string, std::string>>;

inline constexpr int kSchemaVersion = 1;

/// CSV layout:
///   # schema=1
///   # key=value          (one line per metadata entry)
///   level_index,resolution,error,pair_rate,slope_rate,predicted_rate,trajectories,seed
///   ...one row per level
/// Floats use 6 significant digits, rates 4 decimals. Missing values are empty.
void write_report(std::ostream& out, const experiments::ConvergenceReport& report, const Metadata& metadata);

/// Writes to `path`, or to standard output when `path` is empty or "-".
void emit_report(const experiments::ConvergenceReport& report, const Metadata& metadata, const std::string& path);

/// "%.6g" and "%.4f" as std::string.
std::string format_value(double value);
std::string format_rate(double value);

}  // namespace sfde::cli
