#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "odadjust/network.hpp"

namespace odadjust {

struct ShortestPathResult {
  std::vector<double> dist;                       // +inf when unreachable
  std::vector<std::optional<std::size_t>> pred;   // predecessor link index
};

/// Label-setting shortest paths from `origin` under fixed nonnegative link
/// costs. Ties are settled lowest node index first, and a label is only
/// replaced by a strictly shorter one, so results are reproducible.
ShortestPathResult shortest_paths(const Network& net, const Vector& link_costs, std::size_t origin);

/// Routes `demand` of one commodity along its shortest path. Returns link flows.
Vector all_or_nothing(const Network& net, const Vector& link_costs, std::size_t commodity,
                      double demand);

/// Beckmann objective sum_a int_0^{v_a} t_a(s) ds.
double beckmann_objective(const Network& net, const Vector& v);

/// Exact minimiser over [0, 1] of T(v + lambda (y - v)) by bisection on the
/// directional derivative.
double line_search_beckmann(const Network& net, const Vector& v, const Vector& y);

/// (t^T v - sum_i d_i dist_i) / max(t^T v, 1e-30) with t = t(v).
double relative_gap(const Network& net, const Vector& d, const Vector& v);

enum class TapMethod {
  /// Per-commodity route-flow equilibration with exact line searches between
  /// a route and the current shortest route.
  PathEquilibration,
  /// Commodity-disaggregated Frank-Wolfe.
  FrankWolfe,
};

struct TapOptions {
  double tol = 1e-8;
  int max_iter = 20000;
  TapMethod method = TapMethod::PathEquilibration;
};

struct TapSolution {
  Vector X;            // |C||A|, commodity-major
  Vector v;            // |A|
  double rgap = 0.0;
  int iterations = 0;
  double beckmann = 0.0;
  bool converged = false;
  std::vector<double> beckmann_trace;  // objective after each iteration
};

/// User equilibrium for demand d. Never throws on non-convergence; the best
/// iterate is returned with converged == false instead.
TapSolution solve_tap(const Network& net, const Vector& d, const TapOptions& options = {});

}  // namespace odadjust
