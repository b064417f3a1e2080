#include "sfde/cli/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace sfde::cli {

std::string format_value(double value) {
  if (!std::isfinite(value)) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

std::string format_rate(double value) {
  if (!std::isfinite(value)) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

void write_report(std::ostream& out, const experiments::ConvergenceReport& report, const Metadata& metadata) {
  out << "# schema=" << kSchemaVersion << '\n';
  for (const auto& [key, value] : metadata) out << "# " << key << '=' << value << '\n';
  if (!report.prediction_note.empty()) out << "# prediction_note=" << report.prediction_note << '\n';
  out << "level_index,resolution,error,pair_rate,slope_rate,predicted_rate,trajectories,seed\n";

  const std::string slope = report.errors.size() >= 2 ? format_rate(report.slope_rate) : std::string();
  const std::string predicted = report.predicted_rate ? format_rate(*report.predicted_rate) : std::string();
  for (std::size_t l = 0; l < report.errors.size(); ++l) {
    out << l << ',' << format_value(report.resolutions[l]) << ',' << format_value(report.errors[l]) << ','
        << (l < report.pair_rates.size() ? format_rate(report.pair_rates[l]) : std::string()) << ',' << slope << ','
        << predicted << ',' << report.spec.trajectories << ',' << report.spec.master_seed << '\n';
  }
}

void emit_report(const experiments::ConvergenceReport& report, const Metadata& metadata, const std::string& path) {
  if (path.empty() || path == "-") {
    write_report(std::cout, report, metadata);
    std::cout.flush();
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_report(file, report, metadata);
  file.flush();
  if (!file) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace sfde::cli
