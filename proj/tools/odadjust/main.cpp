#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli.hpp"

int main(int argc, char** argv) {
  using namespace odadjust::cli;

  CLI::App app{"Origin-destination demand adjustment by inexact restoration"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* solve = app.add_subcommand("solve", "Adjust the demand to the observed link flows");
  solve->add_option("--input", cfg.input, "Network document (JSON)")->required();
  solve->add_option("--report", cfg.report, "Report file (JSON)")->required();
  solve->add_option("--log", cfg.log, "Per-iteration log (TSV)");
  solve->add_option("--set", cfg.overrides, "Solver setting override, key=value")->take_all();

  auto* tap = app.add_subcommand("tap", "Solve the traffic assignment problem for a fixed demand");
  tap->add_option("--input", cfg.input, "Network document (JSON)")->required();
  tap->add_option("--demand", cfg.demand, "Comma-separated demand, one value per commodity")->required();
  tap->add_option("--set", cfg.overrides, "Solver setting override, key=value")->take_all();

  auto* check = app.add_subcommand("check", "Validate a network document and print its dimensions");
  check->add_option("--input", cfg.input, "Network document (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  if (*solve) return run_solve(cfg, std::cout, std::cerr);
  if (*tap) return run_tap(cfg, std::cout, std::cerr);
  return run_check(cfg, std::cout, std::cerr);
}
