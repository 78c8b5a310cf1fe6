#include "cli.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "odadjust/errors.hpp"
#include "odadjust/kkt.hpp"
#include "odadjust/tap.hpp"

namespace odadjust::cli {

namespace {

using json = nlohmann::json;

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::InvalidConfig, "cannot parse value '" + value + "' for " + key);
}

double to_double(const std::string& key, const std::string& value) {
  double x = 0.0;
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || ptr != last) bad_value(key, value);
  return x;
}

int to_int(const std::string& key, const std::string& value) {
  int x = 0;
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || ptr != last) bad_value(key, value);
  return x;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\n");
  return s.substr(b, e - b + 1);
}

using Setter = std::function<void(SolverSettings&, const std::string&, const std::string&)>;

Setter real(double IRConfig::*field) {
  return [field](SolverSettings& s, const std::string& k, const std::string& v) { s.config.*field = to_double(k, v); };
}

Setter integer(int IRConfig::*field) {
  return [field](SolverSettings& s, const std::string& k, const std::string& v) { s.config.*field = to_int(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"eta", real(&IRConfig::eta)},
      {"M_bound", real(&IRConfig::M_bound)},
      {"theta_init", real(&IRConfig::theta_init)},
      {"delta_min", real(&IRConfig::delta_min)},
      {"delta0", real(&IRConfig::delta0)},
      {"tau1", real(&IRConfig::tau1)},
      {"tau2", real(&IRConfig::tau2)},
      {"eps1", real(&IRConfig::eps1)},
      {"eps2", real(&IRConfig::eps2)},
      {"omega_scale", real(&IRConfig::omega_scale)},
      {"omega_decay", real(&IRConfig::omega_decay)},
      {"shrink", real(&IRConfig::shrink)},
      {"tap_tol", real(&IRConfig::tap_tol)},
      {"tap_max_iter", integer(&IRConfig::tap_max_iter)},
      {"max_outer", integer(&IRConfig::max_outer)},
      {"max_inner", integer(&IRConfig::max_inner)},
      {"inner_gtol", real(&IRConfig::inner_gtol)},
      {"inner_point_cap", integer(&IRConfig::inner_point_cap)},
      {"inner_iter_cap", integer(&IRConfig::inner_iter_cap)},
      {"tap_method",
       [](SolverSettings& s, const std::string& k, const std::string& v) {
         if (v == "path_equilibration") {
           s.config.tap_method = TapMethod::PathEquilibration;
         } else if (v == "frank_wolfe") {
           s.config.tap_method = TapMethod::FrankWolfe;
         } else {
           bad_value(k, v);
         }
       }},
      {"initial_demand",
       [](SolverSettings& s, const std::string&, const std::string& v) { s.initial_demand = parse_number_list(v); }},
  };
  return table;
}

std::string_view method_name(TapMethod m) {
  return m == TapMethod::FrankWolfe ? "frank_wolfe" : "path_equilibration";
}

json config_json(const IRConfig& c) {
  return json{{"eta", c.eta},
              {"M_bound", c.M_bound},
              {"theta_init", c.theta_init},
              {"delta_min", c.delta_min},
              {"delta0", c.delta0},
              {"tau1", c.tau1},
              {"tau2", c.tau2},
              {"eps1", c.eps1},
              {"eps2", c.eps2},
              {"omega_scale", c.omega_scale},
              {"omega_decay", c.omega_decay},
              {"shrink", c.shrink},
              {"tap_tol", c.tap_tol},
              {"tap_max_iter", c.tap_max_iter},
              {"tap_method", method_name(c.tap_method)},
              {"max_outer", c.max_outer},
              {"max_inner", c.max_inner},
              {"inner_gtol", c.inner_gtol},
              {"inner_point_cap", c.inner_point_cap},
              {"inner_iter_cap", c.inner_iter_cap}};
}

json read_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open input file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, path + ": " + e.what());
  }
}

SolverSettings settings_for(const RunConfig& cfg, const json& doc) {
  SolverSettings s{cfg.solver, cfg.initial_demand};
  if (auto it = doc.find("solver"); it != doc.end()) apply_solver_section(s, *it);
  for (const auto& o : cfg.overrides) apply_override(s, o);
  s.config.validate();
  return s;
}

// Errors raised while solving rather than while reading the problem.
bool is_solver_failure(ErrorCode c) {
  switch (c) {
    case ErrorCode::MaxIterations:
    case ErrorCode::ResidualTooLarge:
    case ErrorCode::SolverStalled:
    case ErrorCode::NoCandidate:
    case ErrorCode::InfeasibleTheta:
      return true;
    default:
      return false;
  }
}

int report_error(const Error& e, std::ostream& err) {
  err << "odadjust: " << e.what() << '\n';
  return is_solver_failure(e.code()) ? kNotConverged : kInputError;
}

std::vector<double> to_std(const Vector& x) { return {x.data(), x.data() + x.size()}; }

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) bad_value("number list", text);
    out.push_back(to_double("number list", t));
  }
  if (out.empty()) bad_value("number list", text);
  return out;
}

void apply_override(SolverSettings& settings, const std::string& key, const std::string& value) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw Error(ErrorCode::InvalidConfig, "unknown solver setting '" + key + "'");
  it->second(settings, key, value);
}

void apply_override(SolverSettings& settings, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "expected key=value, got '" + assignment + "'");
  }
  apply_override(settings, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void apply_solver_section(SolverSettings& settings, const json& section) {
  if (!section.is_object()) throw Error(ErrorCode::MalformedInput, "'solver' must be an object");
  for (const auto& [key, value] : section.items()) {
    if (key == "initial_demand" && value.is_array()) {
      std::vector<double> d;
      for (const auto& x : value) {
        if (!x.is_number()) throw Error(ErrorCode::MalformedInput, "solver.initial_demand must hold numbers");
        d.push_back(x.get<double>());
      }
      settings.initial_demand = d;
    } else if (value.is_string()) {
      apply_override(settings, key, value.get<std::string>());
    } else if (value.is_number()) {
      // dump() round-trips doubles, so "tau1": 1e-4 and tau1=1e-4 agree.
      apply_override(settings, key, value.dump());
    } else {
      throw Error(ErrorCode::MalformedInput, "solver." + key + " has an unsupported type");
    }
  }
}

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string log_header() {
  return "k\ti\tnormC_s\tnormC_z\tL_s\tL_v\ttheta\tdelta\tPred\tAred\taccepted\tF_value\trtan_norm";
}

std::string log_row(const IterationRecord& r) {
  std::string row = std::to_string(r.k) + '\t' + std::to_string(r.i);
  for (double x : {r.normC_s, r.normC_z, r.L_s, r.L_v, r.theta, r.delta, r.Pred, r.Ared}) {
    row += '\t' + format_number(x);
  }
  row += r.accepted ? "\t1" : "\t0";
  row += '\t' + format_number(r.F_value);
  row += '\t' + format_number(r.rtan_norm);
  return row;
}

std::pair<double, double> objective_split(const Network& net, const std::vector<double>& d,
                                          const std::vector<double>& v) {
  double f1 = 0.0;
  for (const auto& o : net.observations()) {
    const double r = v[o.link] - o.flow;
    f1 += r * r;
  }
  double f2 = 0.0;
  const auto& cs = net.commodities();
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const double r = d[i] - cs[i].target_demand;
    f2 += r * r;
  }
  return {f1, f2};
}

json Report::to_json() const {
  return json{{"input", input},
              {"commodity_ids", commodity_ids},
              {"link_ids", link_ids},
              {"initial_demand", initial_demand},
              {"d_final", d_final},
              {"v_final", v_final},
              {"F_final", F_final},
              {"F1", F1},
              {"F2", F2},
              {"F_check", F_check},
              {"status", status},
              {"outer_iterations", outer_iterations},
              {"inner_iterations", inner_iterations},
              {"wall_time_s", wall_time_s},
              {"config", config_json(config)}};
}

int run_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const json doc = read_document(cfg.input);
    const Network net = parse_network(doc.dump());
    const SolverSettings settings = settings_for(cfg, doc);
    DapProblem problem(net);
    const StateLayout& layout = problem.layout();

    StatePoint s0 = StatePoint::zeros(layout);
    if (settings.initial_demand) {
      if (settings.initial_demand->size() != net.commodity_count()) {
        throw Error(ErrorCode::DimensionMismatch, "initial_demand needs one value per commodity");
      }
      s0.d = Eigen::Map<const Vector>(settings.initial_demand->data(), layout.demand_size());
    } else {
      s0.d = problem.target_demand();
    }
    const Vector mu0 = Vector::Zero(layout.constraint_size());

    std::ofstream log;
    if (!cfg.log.empty()) {
      log.open(cfg.log);
      if (!log) throw Error(ErrorCode::MalformedInput, "cannot open log file '" + cfg.log + "'");
      log << log_header() << '\n';
    }
    IterationSink sink;
    if (log.is_open()) sink = [&log](const IterationRecord& r) { log << log_row(r) << '\n'; };

    const auto t0 = std::chrono::steady_clock::now();
    const DapResult result = solve_dap(problem, settings.config, s0, mu0, sink);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    Report rep;
    rep.input = cfg.input;
    for (const auto& c : net.commodities()) rep.commodity_ids.push_back(c.id);
    for (const auto& l : net.links()) rep.link_ids.push_back(l.id);
    rep.initial_demand = to_std(s0.d);
    rep.d_final = to_std(result.d_final);
    rep.v_final = to_std(aggregate_flows(problem.structure(), result.X_final));
    rep.F_final = result.F_final;
    std::tie(rep.F1, rep.F2) = objective_split(net, rep.d_final, rep.v_final);
    rep.F_check = net.eta1() * rep.F1 + net.eta2() * rep.F2;
    rep.status = std::string(to_string(result.status));
    rep.outer_iterations = result.outer_iterations;
    rep.inner_iterations = result.inner_iterations;
    rep.wall_time_s = wall;
    rep.config = settings.config;

    std::ofstream report(cfg.report);
    if (!report) throw Error(ErrorCode::MalformedInput, "cannot open report file '" + cfg.report + "'");
    report << rep.to_json().dump(2) << '\n';

    out << "status " << rep.status << ", F = " << format_number(rep.F_final) << ", d =";
    for (double x : rep.d_final) out << ' ' << format_number(x);
    out << '\n';
    return result.status == DapStatus::Converged ? kSuccess : kNotConverged;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int run_tap(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const json doc = read_document(cfg.input);
    const Network net = parse_network(doc.dump());
    const SolverSettings settings = settings_for(cfg, doc);
    const std::vector<double> d = parse_number_list(cfg.demand);
    if (d.size() != net.commodity_count()) {
      throw Error(ErrorCode::DimensionMismatch, "--demand needs " + std::to_string(net.commodity_count()) +
                                                    " values, got " + std::to_string(d.size()));
    }
    TapOptions opts;
    opts.tol = settings.config.tap_tol;
    opts.max_iter = settings.config.tap_max_iter;
    opts.method = settings.config.tap_method;
    const TapSolution sol = solve_tap(net, Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size())), opts);

    const Vector t = net.link_times(sol.v);
    out << "link\tflow\ttime\n";
    for (std::size_t a = 0; a < net.link_count(); ++a) {
      const auto ai = static_cast<Eigen::Index>(a);
      out << net.links()[a].id << '\t' << format_number(sol.v[ai]) << '\t' << format_number(t[ai]) << '\n';
    }
    out << "rgap\t" << format_number(sol.rgap) << '\n';
    out << "beckmann\t" << format_number(sol.beckmann) << '\n';
    out << "iterations\t" << sol.iterations << '\n';
    if (!sol.converged) {
      err << "odadjust: equilibrium not reached within " << opts.max_iter << " iterations\n";
      return kNotConverged;
    }
    return kSuccess;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int run_check(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const json doc = read_document(cfg.input);
    const Network net = parse_network(doc.dump());
    settings_for(cfg, doc);
    const StateLayout layout = StateLayout::of(net);
    out << "nodes " << net.node_count() << '\n';
    out << "links " << net.link_count() << '\n';
    out << "commodities " << net.commodity_count() << '\n';
    out << "observations " << net.observations().size() << '\n';
    out << "state " << layout.state_size() << " (d " << layout.demand_size() << ", X " << layout.flow_size()
        << ", alpha " << layout.alpha_size() << ", beta " << layout.beta_size() << ")\n";
    out << "constraints " << layout.constraint_size() << '\n';
    return kSuccess;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

}  // namespace odadjust::cli
