#include "sfde/cli/config.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sfde/cli/report.hpp"
#include "sfde/errors.hpp"

namespace sfde::cli {

namespace {

using experiments::Family;
using experiments::Solver;

// Keys accepted in config files; each one is also a --flag of the same name.
const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "alpha", "s",     "hurst",  "m",          "T",           "trajectories", "seed",  "levels",
      "h",     "elements", "steps", "modes",    "refinement",  "solver",       "workers", "out",
      "sigma", "lags",  "noise_scale", "fast", "self_check"};
  return keys;
}

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ParameterError(key + ": '" + text + "' is not a number");
  return value;
}

// A number or a fraction "p/q".
double to_fraction(const std::string& key, const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return to_double(key, text);
  const double num = to_double(key, trim(text.substr(0, slash)));
  const double den = to_double(key, trim(text.substr(slash + 1)));
  if (den == 0.0) throw ParameterError(key + ": zero denominator in '" + text + "'");
  return num / den;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (!(v >= 0.0) || v != std::floor(v) || v > 9.007199254740992e15)
    throw ParameterError(key + " = " + text + " must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

std::size_t to_count(const std::string& key, const std::string& text, std::size_t minimum) {
  const auto v = to_unsigned(key, text);
  if (v < minimum)
    throw ParameterError(key + " = " + text + " is outside the admissible interval [" + std::to_string(minimum) +
                         ", inf)");
  return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw ParameterError(key + ": '" + text + "' is not a boolean");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(to_count(key, item, 1));
  }
  return out;
}

std::size_t elements_from_h(const std::string& text) {
  const double h = to_fraction("h", text);
  if (!(h > 0.0 && h <= 0.5)) throw ParameterError("h = " + text + " is outside the admissible interval (0, 1/2]");
  const double p = 1.0 / h;
  if (std::abs(p - std::round(p)) > 1e-9 * p) throw ParameterError("h = " + text + " must be 1/P for an integer P");
  return static_cast<std::size_t>(std::llround(p));
}

Command command_from(const std::string& name) {
  static const std::map<std::string, Command> table = {
      {"predict", Command::predict}, {"temporal", Command::temporal}, {"spatial", Command::spatial},
      {"assemble", Command::assemble}, {"holder", Command::holder}, {"sobolev", Command::sobolev}};
  const auto it = table.find(name);
  if (it == table.end()) throw ParameterError("unknown subcommand '" + name + "'\n" + usage());
  return it->second;
}

void apply_defaults(RunConfig& config) {
  auto& spec = config.spec;
  switch (config.command) {
    case Command::temporal:
      spec.family = Family::temporal;
      spec.final_time = 1.0;
      spec.elements = 256;
      spec.levels = {32, 64, 128, 256};
      break;
    case Command::spatial:
      spec.family = Family::spatial;
      spec.final_time = 0.01;
      spec.steps = 1024;
      break;  // levels depend on s, filled in after parsing
    case Command::holder:
      spec.final_time = 1.0;
      spec.elements = 64;
      spec.steps = 2048;
      config.lag_steps = {1, 2, 4, 8};
      break;
    case Command::sobolev:
      spec.final_time = 1.0;
      spec.elements = 256;
      spec.steps = 256;
      break;
    case Command::assemble:
      spec.elements = 8;
      break;
    case Command::predict:
      break;
  }
}

void require_keys(const std::map<std::string, std::string>& values, std::initializer_list<const char*> keys) {
  for (const char* key : keys)
    if (!values.count(key)) throw ParameterError(std::string("missing required key '") + key + "'");
}

}  // namespace

const char* to_string(Command command) {
  switch (command) {
    case Command::predict: return "predict";
    case Command::temporal: return "temporal";
    case Command::spatial: return "spatial";
    case Command::assemble: return "assemble";
    case Command::holder: return "holder";
    case Command::sobolev: return "sobolev";
  }
  return "?";
}

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParameterError("config line " + std::to_string(number) + ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ParameterError("config line " + std::to_string(number) + ": unknown key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::vector<std::size_t> parse_levels(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    if (item.find('/') != std::string::npos) {
      const double v = to_fraction("levels", item);
      if (!(v > 0.0 && v <= 1.0)) throw ParameterError("levels: '" + item + "' must lie in (0, 1]");
      const double inv = 1.0 / v;
      if (std::abs(inv - std::round(inv)) > 1e-9 * inv)
        throw ParameterError("levels: '" + item + "' is not 1/n for an integer n");
      out.push_back(static_cast<std::size_t>(std::llround(inv)));
    } else {
      out.push_back(to_count("levels", item, 1));
    }
  }
  return out;
}

std::string usage() {
  return "usage: sfde <predict|temporal|spatial|assemble|holder|sobolev> [--config FILE] [--alpha A] [--s S]\n"
         "            [--hurst H] [--m M] [--T T] [--levels L,..] [--seed N] [--trajectories N] [--modes K]\n"
         "            [--h 1/P | --elements P] [--steps N] [--refinement R] [--solver modal|direct]\n"
         "            [--workers W] [--sigma S] [--lags l,..] [--noise_scale C] [--fast] [--self_check]\n"
         "            [--out PATH]\n";
}

RunConfig parse_config(const std::vector<std::string>& args) {
  if (args.empty()) throw ParameterError("missing subcommand\n" + usage());
  RunConfig config;
  config.command = command_from(args.front());

  // Collect flag values as text first so that file values and flags share one
  // conversion path.
  CLI::App app{"sfde", "sfde"};
  app.set_help_flag();  // frees -h; help is handled by the front end
  std::string config_path;
  app.add_option("--config", config_path);
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> options;
  bool fast_flag = false, self_check_flag = false;
  for (const auto& key : known_keys()) {
    if (key == "fast" || key == "self_check") continue;
    options[key] = app.add_option("--" + key, flag_values[key]);
  }
  app.add_flag("--fast", fast_flag);
  app.add_flag("--self_check,--self-check", self_check_flag);

  std::vector<std::string> rest(args.begin() + 1, args.end());
  std::reverse(rest.begin(), rest.end());  // CLI11 consumes the vector from the back
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    throw ParameterError(std::string(e.what()) + "\n" + usage());
  }

  std::map<std::string, std::string> values;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ParameterError("cannot read config file '" + config_path + "'");
    values = parse_key_values(in);
  }
  for (const auto& [key, option] : options)
    if (option->count()) values[key] = flag_values[key];
  if (fast_flag) values["fast"] = "true";
  if (self_check_flag) values["self_check"] = "true";

  apply_defaults(config);
  auto& spec = config.spec;

  if (config.command == Command::assemble) {
    require_keys(values, {"s"});
  } else {
    require_keys(values, {"alpha", "s", "hurst", "m"});
  }

  for (const auto& [key, text] : values) {
    if (key == "alpha") spec.alpha = to_double(key, text);
    else if (key == "s") spec.s = to_double(key, text);
    else if (key == "hurst") spec.hurst = to_double(key, text);
    else if (key == "m") spec.m = to_double(key, text);
    else if (key == "T") spec.final_time = to_double(key, text);
    else if (key == "trajectories") spec.trajectories = to_count(key, text, 2);
    else if (key == "seed") spec.master_seed = to_unsigned(key, text);
    else if (key == "levels") spec.levels = parse_levels(text);
    else if (key == "h") spec.elements = elements_from_h(text);
    else if (key == "elements") spec.elements = to_count(key, text, 2);
    else if (key == "steps") spec.steps = to_count(key, text, 1);
    else if (key == "modes") spec.modes = to_count(key, text, 1);
    else if (key == "refinement") spec.refinement = to_count(key, text, 1);
    else if (key == "workers") spec.workers = to_count(key, text, 1);
    else if (key == "noise_scale") spec.noise_scale = to_double(key, text);
    else if (key == "out") config.out = text;
    else if (key == "sigma") config.sigma = to_double(key, text);
    else if (key == "lags") config.lag_steps = parse_list(key, text);
    else if (key == "fast") config.fast = to_bool(key, text);
    else if (key == "self_check") config.self_check = to_bool(key, text);
    else if (key == "solver") {
      if (text == "modal") spec.solver = Solver::modal;
      else if (text == "direct") spec.solver = Solver::direct;
      else throw ParameterError("solver must be 'modal' or 'direct', got '" + text + "'");
    }
  }
  if (values.count("h") && values.count("elements")) throw ParameterError("give either h or elements, not both");

  if (config.fast) {
    if (!values.count("trajectories")) spec.trajectories = 25;
    config.rate_tolerance = 0.25;
  }
  if (config.command == Command::spatial && !values.count("levels")) {
    spec.levels = spec.s < 0.5 ? std::vector<std::size_t>{64, 128, 256, 512}
                               : std::vector<std::size_t>{32, 64, 128, 256};
  }

  // Validate everything before any computation starts.
  if (config.command == Command::assemble) {
    require_open_interval("s", spec.s, 0.0, 1.0);
    if (spec.elements < 2) throw ParameterError("elements must be at least 2");
  } else if (config.command == Command::predict) {
    require_open_interval("alpha", spec.alpha, 0.0, 1.0);
    require_open_interval("s", spec.s, 0.0, 1.0);
    require_open_interval("hurst", spec.hurst, 0.5, 1.0);
    if (!(spec.m <= 0.0)) throw ParameterError("m = " + format_value(spec.m) + " is outside the admissible interval (-inf, 0]");
  } else {
    spec.validate();
  }
  if (config.command == Command::holder) {
    if (config.lag_steps.size() < 2) throw ParameterError("holder needs at least 2 lags");
    for (auto lag : config.lag_steps)
      if (lag >= spec.steps)
        throw ParameterError("lag " + std::to_string(lag) + " is outside the admissible interval [1, " +
                             std::to_string(spec.steps - 1) + "]");
  }
  if (config.command == Command::sobolev && !(config.sigma >= 0.0))
    throw ParameterError("sigma must be non-negative");
  return config;
}

std::vector<std::pair<std::string, std::string>> RunConfig::metadata() const {
  std::vector<std::pair<std::string, std::string>> out;
  auto add = [&](const char* key, std::string value) { out.emplace_back(key, std::move(value)); };
  auto join = [](const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  add("command", to_string(command));
  add("s", format_value(spec.s));
  if (command != Command::assemble) {
    add("alpha", format_value(spec.alpha));
    add("hurst", format_value(spec.hurst));
    add("m", format_value(spec.m));
    add("rho", format_value(experiments::rho_from_m(spec.m)));
  }
  if (command == Command::predict) return out;
  if (command != Command::spatial) add("elements", std::to_string(spec.elements));
  if (command == Command::assemble) {
    add("self_check", self_check ? "true" : "false");
    return out;
  }
  if (command != Command::temporal) add("steps", std::to_string(spec.steps));
  add("T", format_value(spec.final_time));
  add("trajectories", std::to_string(spec.trajectories));
  add("seed", std::to_string(spec.master_seed));
  add("modes", std::to_string(spec.modes));
  add("noise_scale", format_value(spec.noise_scale));
  if (command == Command::temporal || command == Command::spatial) {
    add("levels", join(spec.levels));
    add("refinement", std::to_string(spec.refinement));
    add("solver", experiments::to_string(spec.solver));
    add("fast", fast ? "true" : "false");
    add("rate_tolerance", format_value(rate_tolerance));
  } else if (command == Command::holder) {
    add("lags", join(lag_steps));
  } else if (command == Command::sobolev) {
    add("sigma", format_value(sigma));
  }
  return out;
}

}  // namespace sfde::cli
