#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sfde/experiments.hpp"

namespace sfde::cli {

enum class Command { predict, temporal, spatial, assemble, holder, sobolev };

const char* to_string(Command command);

struct RunConfig {
  Command command = Command::predict;
  experiments::ExperimentSpec spec;
  std::string out;         // empty: standard output
  bool fast = false;
  double rate_tolerance = 0.15;
  double sigma = 0.0;                  // sobolev
  std::vector<std::size_t> lag_steps;  // holder
  bool self_check = false;             // assemble

  /// Every effective parameter as (key, value) text, in a fixed order, for
  /// the metadata block of output files.
  std::vector<std::pair<std::string, std::string>> metadata() const;
};

/// Parses `subcommand [flags]`. A `--config FILE` of key=value lines is read
/// first; flags override it. Throws ParameterError for unknown keys, missing
/// required keys and out-of-range values, and returns only validated configs.
RunConfig parse_config(const std::vector<std::string>& args);

/// Key/value text in the config-file format ('#' starts a comment).
std::map<std::string, std::string> parse_key_values(std::istream& in);

/// "32,64,128" or "1/32,1/64,1/128" -> {32, 64, 128}.
std::vector<std::size_t> parse_levels(const std::string& text);

std::string usage();

}  // namespace sfde::cli
