#pragma once

// The command layer behind the regimelq executable. Every command takes a
// parsed RunConfig; artifacts land under CommandContext::output_dir.
//
// Exit codes: 0 success, 1 invalid configuration or failed assumptions,
// 2 solver failure (non-convergence, PSD loss, singular weights),
// 3 failed verification or diverging simulation, 4 I/O problems.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "regimelq/config.hpp"
#include "regimelq/error.hpp"
#include "regimelq/esre.hpp"

namespace regimelq {

enum ExitCode : int {
  kExitOk = 0,
  kExitInvalid = 1,
  kExitSolver = 2,
  kExitVerification = 3,
  kExitIo = 4,
};

int exit_code_for(ErrorKind kind) noexcept;

struct CommandContext {
  std::filesystem::path output_dir = ".";
  std::optional<std::uint64_t> seed;
};

/// validate | solve | simulate | verify | report. Catches library errors and
/// maps them to exit codes; messages go to err.
int run_command(const std::string& command, const std::filesystem::path& config_path, const CommandContext& context,
                std::ostream& out, std::ostream& err);

// Individual commands, reusable from tests. They may throw Error.
int cmd_validate(const RunConfig& cfg, const CommandContext& ctx, std::ostream& out);
int cmd_solve(const RunConfig& cfg, const CommandContext& ctx, std::ostream& out);
int cmd_simulate(const RunConfig& cfg, const CommandContext& ctx, std::ostream& out);
int cmd_verify(const RunConfig& cfg, const CommandContext& ctx, std::ostream& out);
int cmd_report(const RunConfig& cfg, const CommandContext& ctx, std::ostream& out);

/// Every applicable check on a converged solution; the document cmd_verify writes.
nlohmann::json verification_report(const RunConfig& cfg, const EsreSolution& solution, std::uint64_t seed);

}  // namespace regimelq
