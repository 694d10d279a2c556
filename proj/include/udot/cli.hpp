#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "udot/io.hpp"

namespace udot {

/// Limits checked by `verify`; a violated one gives exit code 4.
struct VerifyThresholds {
  double tv = 0.02;
  double duality_gap = 0.01;
  double nonlocal = 5e-3;
  double jacobian = 1e-2;
  double mass = 5e-3;
};

/// One pipeline run. Read from a JSON document; command-line flags override
/// fields one to one.
struct RunConfig {
  std::string preset = "annulus";
  int cells = 256;
  int ode_steps = 256;
  std::string bc = "default";  // initial | nested | periodic-shooting | default
  double initial_k = 0.0;
  double convexify_coefficient = 0.0;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";
  int nx = 30;
  int ny = 64;
  int samples = 100000;
  int bins = 50;
  int jacobian_samples = 200;
  int nonlocal_points = 8;
  int levelset_count = 8;
  std::optional<std::filesystem::path> solution;  // verify input; default out/solution.csv
  VerifyThresholds thresholds;

  /// Throws Config on a non-positive count or an unknown bc mode.
  void validate() const;
};

/// Parses a config document. Unknown keys and wrong types throw Config.
RunConfig config_from_json(const Json& j);
Json config_to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitSolver = 3, kExitVerification = 4 };

int cmd_solve(const RunConfig& config);
int cmd_diagnose(const RunConfig& config);
int cmd_verify(const RunConfig& config);
int cmd_oracle(const RunConfig& config);

/// Entry point of the `udot` tool.
int run_cli(int argc, char** argv);

}  // namespace udot
