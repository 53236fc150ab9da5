#pragma once

#include <filesystem>
#include <iosfwd>

#include "run_config.hpp"

namespace advplace::cli {

// Each command writes its artifacts into `out` (created if missing) and a
// one-line summary to `log`. Errors propagate as InputError/InfeasibleError.

void cmd_build(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_gramian(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_place(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_control(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_residence(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_stability(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// Runs the CLI: parses argv, dispatches, maps errors to exit codes
/// (0 ok, 2 input error, 3 infeasible).
int run(int argc, char** argv);

}  // namespace advplace::cli
