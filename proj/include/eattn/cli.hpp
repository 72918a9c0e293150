#pragma once

// Command implementations behind the `eattn` executable. Each command writes
// its report to the given stream and returns the process exit code.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "eattn/io.hpp"

namespace eattn::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsageError = 2,
  kDiverged = 3,
};

struct SweepSpec {
  std::string param;
  std::vector<double> values;
};

/// Parses "name=v1,v2,...".
SweepSpec parse_sweep_spec(const std::string& text);

/// Copy of config with one parameter replaced. Throws ConfigError for
/// unknown names or values that do not fit the parameter.
RunConfig with_parameter(RunConfig config, const std::string& param, double value);

struct SweepRow {
  double value = 0;
  bool converged = false;
  int iters = 0;
  double final_grad_norm = 0;
  double wall_time_ms = 0;
};

/// Grid point i uses seed + i. wall_time_ms is the fastest of `repeats`
/// timings of the head (context build plus descent).
std::vector<SweepRow> run_sweep(const RunConfig& config, const SweepSpec& spec, int repeats = 1);

nlohmann::json run_report(const RunConfig& config, const Problem& problem, bool emit_z,
                          bool* any_diverged = nullptr);
nlohmann::json gradcheck_report(const RunConfig& config, double h, double tol);
nlohmann::json stationarity_report(const RunConfig& config, double tol, bool omit_regularizer);

int cmd_gen(const RunConfig& config, const std::filesystem::path& out_dir);
int cmd_run(const RunConfig& config, const std::optional<std::filesystem::path>& in_dir,
            std::ostream& out, bool emit_z);
int cmd_gradcheck(const RunConfig& config, double h, double tol, std::ostream& out);
int cmd_stationarity(const RunConfig& config, double tol, bool omit_regularizer,
                     std::ostream& out);
int cmd_trace(const RunConfig& config, std::ostream& csv);
int cmd_sweep(const RunConfig& config, const SweepSpec& spec, int repeats, std::ostream& csv);

/// Argument parsing and error-to-exit-code mapping for the executable.
int main_entry(int argc, char** argv);

}  // namespace eattn::cli
