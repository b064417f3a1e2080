// Command-line front end: parses a RunConfig and hands it to the library.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sfde/cli/config.hpp"
#include "sfde/cli/report.hpp"
#include "sfde/errors.hpp"
#include "sfde/experiments.hpp"
#include "sfde/fracfem.hpp"

namespace {

using namespace sfde;
using cli::Command;
using cli::format_rate;
using cli::format_value;

void write_header(std::ostream& out, const cli::RunConfig& config) {
  out << "# schema=" << cli::kSchemaVersion << '\n';
  for (const auto& [key, value] : config.metadata()) out << "# " << key << '=' << value << '\n';
}

// Writes through `body` to config.out, or to stdout.
template <class Body>
void with_output(const cli::RunConfig& config, Body&& body) {
  if (config.out.empty() || config.out == "-") {
    body(std::cout);
    return;
  }
  std::ofstream file(config.out, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + config.out + "' for writing");
  body(file);
  if (!file.flush()) throw std::runtime_error("write to '" + config.out + "' failed");
}

void run_predict(const cli::RunConfig& config) {
  with_output(config, [&](std::ostream& out) {
    write_header(out, config);
    out << "family,predicted_rate,note\n";
    for (auto family : {experiments::Family::temporal, experiments::Family::spatial}) {
      auto spec = config.spec;
      spec.family = family;
      std::string note;
      const auto rate = experiments::predicted_rate(spec, &note);
      out << experiments::to_string(family) << ',' << (rate ? format_rate(*rate) : std::string()) << ",\"" << note
          << "\"\n";
    }
  });
}

void run_convergence(const cli::RunConfig& config) {
  const auto report = experiments::run_family(config.spec);
  cli::emit_report(report, config.metadata(), config.out);
  std::fprintf(stderr, "%s: slope rate %s, predicted %s (tolerance %.2f)\n",
               experiments::to_string(config.spec.family), format_rate(report.slope_rate).c_str(),
               report.predicted_rate ? format_rate(*report.predicted_rate).c_str() : "n/a", config.rate_tolerance);
}

void run_assemble(const cli::RunConfig& config) {
  const std::filesystem::path dir = config.out.empty() ? std::filesystem::path(".") : std::filesystem::path(config.out);
  std::filesystem::create_directories(dir);
  const fracfem::Mesh1D mesh(config.spec.elements);
  fracfem::AssemblyOptions options;
  options.self_check = config.self_check;
  const auto ops = fracfem::assemble_operators(mesh, config.spec.s, config.spec.modes, options);
  const auto dump = [&](const char* name, const Eigen::MatrixXd& matrix) {
    std::ofstream file(dir / name, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open '" + (dir / name).string() + "' for writing");
    fracfem::write_matrix_csv(file, matrix, config.spec.s, mesh.h());
    if (!file.flush()) throw std::runtime_error("write to '" + (dir / name).string() + "' failed");
  };
  dump("mass.csv", ops.mass);
  dump("stiffness.csv", ops.stiffness);
  dump("coupling.csv", ops.coupling);
  std::fprintf(stderr, "wrote mass.csv, stiffness.csv, coupling.csv to %s\n", dir.string().c_str());
}

void run_holder(const cli::RunConfig& config) {
  const auto estimate = experiments::estimate_holder_exponent(config.spec, config.lag_steps);
  with_output(config, [&](std::ostream& out) {
    write_header(out, config);
    out << "# exponent=" << format_rate(estimate.exponent) << '\n';
    out << "lag,rms_increment\n";
    for (std::size_t i = 0; i < estimate.lags.size(); ++i)
      out << format_value(estimate.lags[i]) << ',' << format_value(estimate.rms_increments[i]) << '\n';
  });
}

void run_sobolev(const cli::RunConfig& config) {
  const auto estimate = experiments::run_sobolev_diagnostic(config.spec, config.sigma);
  with_output(config, [&](std::ostream& out) {
    write_header(out, config);
    out << "sigma,value,tail_fraction,tail_warning\n";
    out << format_value(config.sigma) << ',' << format_value(estimate.value) << ','
        << format_value(estimate.tail_fraction) << ',' << (estimate.tail_warning ? "true" : "false") << '\n';
  });
  if (estimate.tail_warning)
    std::fprintf(stderr, "warning: top decile of modes carries %.1f%% of the norm; increase --modes\n",
                 100.0 * estimate.tail_fraction);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args.front() == "--help" || args.front() == "-h") {
    std::fputs(sfde::cli::usage().c_str(), args.empty() ? stderr : stdout);
    return args.empty() ? 2 : 0;
  }
  try {
    const auto config = sfde::cli::parse_config(args);
    switch (config.command) {
      case Command::predict: run_predict(config); break;
      case Command::temporal:
      case Command::spatial: run_convergence(config); break;
      case Command::assemble: run_assemble(config); break;
      case Command::holder: run_holder(config); break;
      case Command::sobolev: run_sobolev(config); break;
    }
  } catch (const sfde::ParameterError& e) {
    std::fprintf(stderr, "sfde: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "sfde: %s\n", e.what());
    return 1;
  }
  return 0;
}
