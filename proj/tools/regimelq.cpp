#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "regimelq/commands.hpp"
#include "regimelq/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Regime-switching LQ control: Riccati solver, simulation and verification"};
  std::string command;
  std::string config;
  std::string output = ".";
  std::uint64_t seed = 0;

  app.add_option("command", command, "validate | solve | simulate | verify | report")
      ->required()
      ->check(CLI::IsMember({"validate", "solve", "simulate", "verify", "report"}));
  app.add_option("--config,-c", config, "YAML run configuration")->required();
  auto* seed_opt = app.add_option("--seed", seed, "override simulate.seed");
  app.add_option("--output,-o", output, "directory for all artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : regimelq::kExitInvalid;
  }

  if (const char* env = std::getenv("REGIMELQ_THREADS")) {
    try {
      regimelq::configure_threads(std::stoi(env));
    } catch (const std::exception&) {
      std::cerr << "error: REGIMELQ_THREADS must be a positive integer\n";
      return regimelq::kExitInvalid;
    }
  }

  regimelq::CommandContext ctx;
  ctx.output_dir = output;
  if (*seed_opt) ctx.seed = seed;
  return regimelq::run_command(command, config, ctx, std::cout, std::cerr);
}
