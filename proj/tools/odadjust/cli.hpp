#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odadjust/irm.hpp"
#include "odadjust/network.hpp"

namespace odadjust::cli {

enum ExitCode : int { kSuccess = 0, kInputError = 1, kNotConverged = 2 };

struct RunConfig {
  IRConfig solver;
  std::string input;
  std::string report;
  std::string log;
  std::vector<std::string> overrides;  // key=value, applied after the input's solver section
  std::string demand;                  // tap: comma-separated demand vector
  std::optional<std::vector<double>> initial_demand;  // solve: d0, defaults to the target
};

/// Solver settings taken from an input document plus --set overrides.
struct SolverSettings {
  IRConfig config;
  std::optional<std::vector<double>> initial_demand;
};

std::vector<double> parse_number_list(const std::string& text);

/// Applies one key=value override. Throws InvalidConfig on unknown keys or
/// unparsable values.
void apply_override(SolverSettings& settings, const std::string& key, const std::string& value);
void apply_override(SolverSettings& settings, const std::string& assignment);

/// Reads the optional `solver` object of an input document.
void apply_solver_section(SolverSettings& settings, const nlohmann::json& section);

struct Report {
  std::string input;
  std::vector<std::string> commodity_ids;
  std::vector<std::string> link_ids;
  std::vector<double> initial_demand;
  std::vector<double> d_final;
  std::vector<double> v_final;
  double F_final = 0.0;
  double F1 = 0.0;
  double F2 = 0.0;
  double F_check = 0.0;  // eta1 F1 + eta2 F2 recomputed from d_final and v_final
  std::string status;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double wall_time_s = 0.0;
  IRConfig config;

  nlohmann::json to_json() const;
};

/// F1 and F2 from aggregate flows, independent of the lifted state.
std::pair<double, double> objective_split(const Network& net, const std::vector<double>& d,
                                          const std::vector<double>& v);

std::string log_header();
std::string log_row(const IterationRecord& r);
std::string format_number(double x);

int run_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_tap(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_check(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace odadjust::cli
