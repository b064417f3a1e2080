#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sfde/cli/config.hpp"
#include "sfde/cli/report.hpp"
#include "sfde/errors.hpp"
#include "sfde/fracfem.hpp"

using namespace sfde;
using namespace sfde::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / ("sfde_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string error_of(const std::vector<std::string>& args) {
  try {
    parse_config(args);
  } catch (const ParameterError& e) {
    return e.what();
  }
  return {};
}

int run_cli(const std::string& args, const std::string& env = {}) {
  const std::string command = env + " " + SFDE_CLI_PATH + " " + args + " 2>/dev/null";
  return std::system(command.c_str());
}

const std::vector<std::string> kMinimal{"temporal", "--alpha", "0.7", "--s", "0.6", "--hurst", "0.85", "--m", "0"};

}  // namespace

TEST_CASE("minimal temporal config takes the documented defaults") {
  const auto config = parse_config(kMinimal);
  CHECK(config.command == Command::temporal);
  CHECK(config.spec.final_time == 1.0);
  CHECK(config.spec.elements == 256);
  CHECK(config.spec.trajectories == 100);
  CHECK(config.spec.modes == 1000);
  CHECK(config.spec.levels == std::vector<std::size_t>{32, 64, 128, 256});
  CHECK(config.rate_tolerance == 0.15);
  bool found = false;
  for (const auto& [key, value] : config.metadata())
    if (key == "elements") found = value == "256";
  CHECK(found);
}

TEST_CASE("spatial defaults depend on s") {
  auto args = kMinimal;
  args[0] = "spatial";
  auto config = parse_config(args);
  CHECK(config.spec.final_time == 0.01);
  CHECK(config.spec.steps == 1024);
  CHECK(config.spec.levels == std::vector<std::size_t>{32, 64, 128, 256});
  args[4] = "0.4";
  config = parse_config(args);
  CHECK(config.spec.levels == std::vector<std::size_t>{64, 128, 256, 512});
}

TEST_CASE("range errors name the admissible interval") {
  auto args = kMinimal;
  args[6] = "0.4";
  CHECK(error_of(args).find("(0.5, 1)") != std::string::npos);
  args = kMinimal;
  args[4] = "0";
  CHECK(error_of(args).find("(0, 1)") != std::string::npos);
  args = kMinimal;
  args[8] = "0.5";
  CHECK(error_of(args).find("(-inf, 0]") != std::string::npos);
}

TEST_CASE("unknown keys, missing keys and bad values are rejected") {
  auto args = kMinimal;
  args.push_back("--colour");
  args.push_back("blue");
  CHECK_FALSE(error_of(args).empty());
  CHECK(error_of({"temporal", "--alpha", "0.7", "--s", "0.6", "--hurst", "0.85"}).find("'m'") != std::string::npos);
  CHECK(error_of({"frobnicate"}).find("unknown subcommand") != std::string::npos);
  args = kMinimal;
  args.insert(args.end(), {"--levels", "32,48"});
  CHECK_FALSE(error_of(args).empty());
  args = kMinimal;
  args.insert(args.end(), {"--trajectories", "ten"});
  CHECK_FALSE(error_of(args).empty());

  std::istringstream file("alpha = 0.5\nwidth = 3\n");
  CHECK_THROWS_AS(parse_key_values(file), ParameterError);
}

TEST_CASE("config file with flag overrides") {
  const auto path = scratch_dir() / "run.cfg";
  std::ofstream(path) << "# Table 1 row 1\nalpha=0.7\ns = 0.6\nhurst=0.85\nm=0\ntrajectories=40\nh=1/128\n";
  const auto config = parse_config({"temporal", "--config", path.string(), "--trajectories", "12", "--seed", "9"});
  CHECK(config.spec.alpha == 0.7);
  CHECK(config.spec.elements == 128);
  CHECK(config.spec.trajectories == 12);
  CHECK(config.spec.master_seed == 9);
  CHECK_FALSE(error_of({"temporal", "--config", (scratch_dir() / "missing.cfg").string()}).empty());
}

TEST_CASE("fast profile") {
  auto args = kMinimal;
  args.push_back("--fast");
  auto config = parse_config(args);
  CHECK(config.fast);
  CHECK(config.spec.trajectories == 25);
  CHECK(config.rate_tolerance == 0.25);
  args.insert(args.end(), {"--trajectories", "30"});
  CHECK(parse_config(args).spec.trajectories == 30);
}

TEST_CASE("levels accept fractions and integers") {
  CHECK(parse_levels("1/32, 1/64,1/128") == std::vector<std::size_t>{32, 64, 128});
  CHECK(parse_levels("8,16") == std::vector<std::size_t>{8, 16});
  CHECK(parse_levels("").empty());
  CHECK_THROWS_AS(parse_levels("1/3.5"), ParameterError);
  CHECK_THROWS_AS(parse_levels("0"), ParameterError);
}

TEST_CASE("report layout") {
  experiments::ConvergenceReport report;
  report.spec.trajectories = 100;
  report.spec.master_seed = 4;
  report.resolutions = {1.0 / 32, 1.0 / 64};
  report.errors = {8.914e-3, 6.174e-3};
  report.pair_rates = {0.52988};
  report.slope_rate = 0.52988;
  report.predicted_rate = 0.558333;
  std::ostringstream out;
  write_report(out, report, {{"alpha", "0.7"}});
  CHECK(out.str() ==
        "# schema=1\n# alpha=0.7\n"
        "level_index,resolution,error,pair_rate,slope_rate,predicted_rate,trajectories,seed\n"
        "0,0.03125,0.008914,0.5299,0.5299,0.5583,100,4\n"
        "1,0.015625,0.006174,,0.5299,0.5583,100,4\n");

  experiments::ConvergenceReport empty;
  std::ostringstream header_only;
  write_report(header_only, empty, {});
  CHECK(header_only.str() == "# schema=1\nlevel_index,resolution,error,pair_rate,slope_rate,predicted_rate,trajectories,seed\n");

  CHECK_THROWS(emit_report(report, {}, "/nonexistent-dir/out.csv"));
}

TEST_CASE("predict is fast and needs no simulation") {
  const auto out = scratch_dir() / "predict.csv";
  const auto start = std::chrono::steady_clock::now();
  REQUIRE(run_cli("predict --alpha 0.9 --s 0.6 --hurst 0.6 --m -0.6 --out " + out.string()) == 0);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(1));
  CHECK(slurp(out).find("spatial,0.5400,") != std::string::npos);
  CHECK(run_cli("predict --alpha 0.9 --s 0.6 --hurst 0.4 --m 0") != 0);
}

TEST_CASE("assemble writes loadable symmetric matrices") {
  const auto dir = scratch_dir() / "ops";
  REQUIRE(run_cli("assemble --s 0.5 --elements 8 --modes 5 --self_check --out " + dir.string()) == 0);
  std::ifstream in(dir / "stiffness.csv");
  const auto file = fracfem::read_matrix_csv(in);
  CHECK(file.matrix.rows() == 7);
  CHECK(file.s == 0.5);
  CHECK(file.h == 0.125);
  CHECK((file.matrix - file.matrix.transpose()).norm() == 0.0);
  std::ifstream coupling(dir / "coupling.csv");
  CHECK(fracfem::read_matrix_csv(coupling).matrix.cols() == 5);
}

TEST_CASE("identical config and seed give identical bytes for any worker count") {
  const auto dir = scratch_dir();
  const std::string common =
      "temporal --alpha 0.7 --s 0.6 --hurst 0.85 --m 0 --h 1/32 --levels 8,16,32 --modes 40 --trajectories 6 --seed 3";
  REQUIRE(run_cli(common + " --out " + (dir / "a.csv").string(), "SFDE_WORKERS=1") == 0);
  REQUIRE(run_cli(common + " --out " + (dir / "b.csv").string(), "SFDE_WORKERS=3") == 0);
  REQUIRE(run_cli(common + " --workers 2 --out " + (dir / "c.csv").string()) == 0);
  const auto a = slurp(dir / "a.csv");
  CHECK(a.size() > 100);
  CHECK(a == slurp(dir / "b.csv"));
  CHECK(a == slurp(dir / "c.csv"));
  CHECK(a.find("predicted_rate") != std::string::npos);
  CHECK(a.find(",0.5583,") != std::string::npos);
}
