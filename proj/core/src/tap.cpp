#include "odadjust/tap.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <utility>

#include "odadjust/errors.hpp"

namespace odadjust {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGapDenominatorFloor = 1e-30;

void check_link_vector(const Network& net, const Vector& x, const char* what) {
  if (static_cast<std::size_t>(x.size()) != net.link_count()) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has length " +
                                                  std::to_string(x.size()) + ", expected " +
                                                  std::to_string(net.link_count()));
  }
}

void check_demand(const Network& net, const Vector& d) {
  if (static_cast<std::size_t>(d.size()) != net.commodity_count()) {
    throw Error(ErrorCode::DimensionMismatch, "demand vector has length " + std::to_string(d.size()) +
                                                  ", expected " +
                                                  std::to_string(net.commodity_count()));
  }
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i]) || d[i] < 0.0) {
      throw Error(ErrorCode::MalformedInput, "demand entries must be finite and nonnegative");
    }
  }
}

// Link sequence from origin to `target` following predecessor links.
std::vector<std::size_t> trace_path(const Network& net, const ShortestPathResult& sp,
                                    std::size_t origin, std::size_t target) {
  std::vector<std::size_t> path;
  std::size_t node = target;
  while (node != origin) {
    const auto& pred = sp.pred[node];
    if (!pred) {
      throw Error(ErrorCode::Unreachable, "node '" + net.nodes()[target] +
                                              "' is unreachable from '" + net.nodes()[origin] + "'");
    }
    path.push_back(*pred);
    node = net.links()[*pred].tail;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

double path_cost(const std::vector<std::size_t>& path, const Vector& t) {
  double c = 0.0;
  for (std::size_t a : path) c += t[static_cast<Eigen::Index>(a)];
  return c;
}

// Shortest distance to each commodity destination, one tree per distinct origin.
Vector destination_distances(const Network& net, const Vector& t) {
  std::map<std::size_t, ShortestPathResult> trees;
  Vector dist(static_cast<Eigen::Index>(net.commodity_count()));
  for (std::size_t i = 0; i < net.commodity_count(); ++i) {
    const auto& c = net.commodities()[i];
    auto it = trees.find(c.origin);
    if (it == trees.end()) it = trees.emplace(c.origin, shortest_paths(net, t, c.origin)).first;
    dist[static_cast<Eigen::Index>(i)] = it->second.dist[c.destination];
  }
  return dist;
}

struct Route {
  std::vector<std::size_t> links;
  double flow = 0.0;
};

class PathEquilibration {
 public:
  PathEquilibration(const Network& net, const Vector& d) : net_(net), routes_(net.commodity_count()) {
    const Vector t0 = net.link_times(Vector::Zero(static_cast<Eigen::Index>(net.link_count())));
    for (std::size_t i = 0; i < net.commodity_count(); ++i) {
      const double demand = d[static_cast<Eigen::Index>(i)];
      if (demand <= 0.0) continue;
      const auto& c = net.commodities()[i];
      routes_[i].push_back(Route{trace_path(net, shortest_paths(net, t0, c.origin), c.origin, c.destination), demand});
    }
    rebuild();
  }

  void sweep() {
    for (std::size_t i = 0; i < net_.commodity_count(); ++i) {
      if (routes_[i].empty()) continue;
      equilibrate(i);
    }
    rebuild();
  }

  const Vector& aggregate() const { return v_; }
  const Vector& disaggregated() const { return X_; }

 private:
  void equilibrate(std::size_t i) {
    const auto& c = net_.commodities()[i];
    auto& routes = routes_[i];
    const Vector t = net_.link_times(v_);
    auto shortest = trace_path(net_, shortest_paths(net_, t, c.origin), c.origin, c.destination);

    std::size_t best = routes.size();
    for (std::size_t r = 0; r < routes.size(); ++r) {
      if (routes[r].links == shortest) best = r;
    }
    if (best == routes.size()) routes.push_back(Route{std::move(shortest), 0.0});

    for (std::size_t r = 0; r < routes.size(); ++r) {
      if (r == best || routes[r].flow <= 0.0) continue;
      const Vector times = net_.link_times(v_);
      if (path_cost(routes[r].links, times) <= path_cost(routes[best].links, times)) continue;

      const double h = routes[r].flow;
      Vector y = v_;
      for (std::size_t a : routes[r].links) y[static_cast<Eigen::Index>(a)] -= h;
      for (std::size_t a : routes[best].links) y[static_cast<Eigen::Index>(a)] += h;
      const double lambda = line_search_beckmann(net_, v_, y);
      if (lambda <= 0.0) continue;

      const double shift = lambda >= 1.0 ? h : lambda * h;
      routes[r].flow = lambda >= 1.0 ? 0.0 : h - shift;
      routes[best].flow += shift;
      for (std::size_t a : routes[r].links) v_[static_cast<Eigen::Index>(a)] -= shift;
      for (std::size_t a : routes[best].links) v_[static_cast<Eigen::Index>(a)] += shift;
    }

    std::vector<Route> kept;
    kept.reserve(routes.size());
    for (std::size_t r = 0; r < routes.size(); ++r) {
      if (routes[r].flow > 0.0 || r == best) kept.push_back(std::move(routes[r]));
    }
    routes = std::move(kept);
  }

  // Recomputes X and v from route flows so conservation holds to roundoff.
  void rebuild() {
    const auto n_links = static_cast<Eigen::Index>(net_.link_count());
    X_ = Vector::Zero(n_links * static_cast<Eigen::Index>(net_.commodity_count()));
    for (std::size_t i = 0; i < routes_.size(); ++i) {
      const Eigen::Index base = static_cast<Eigen::Index>(i) * n_links;
      for (const auto& route : routes_[i]) {
        for (std::size_t a : route.links) X_[base + static_cast<Eigen::Index>(a)] += route.flow;
      }
    }
    v_ = Vector::Zero(n_links);
    for (std::size_t i = 0; i < routes_.size(); ++i) {
      v_ += X_.segment(static_cast<Eigen::Index>(i) * n_links, n_links);
    }
  }

  const Network& net_;
  std::vector<std::vector<Route>> routes_;
  Vector X_;
  Vector v_;
};

class FrankWolfe {
 public:
  FrankWolfe(const Network& net, const Vector& d) : net_(net), d_(d) {
    X_ = extreme_point(net.link_times(Vector::Zero(static_cast<Eigen::Index>(net.link_count()))));
    v_ = aggregate(X_);
  }

  void step() {
    const Vector Y = extreme_point(net_.link_times(v_));
    const Vector y = aggregate(Y);
    const double lambda = line_search_beckmann(net_, v_, y);
    if (lambda <= 0.0) return;
    X_ += lambda * (Y - X_);
    v_ = aggregate(X_);
  }

  const Vector& aggregate() const { return v_; }
  const Vector& disaggregated() const { return X_; }

 private:
  Vector extreme_point(const Vector& t) const {
    const auto n_links = static_cast<Eigen::Index>(net_.link_count());
    Vector Y = Vector::Zero(n_links * static_cast<Eigen::Index>(net_.commodity_count()));
    for (std::size_t i = 0; i < net_.commodity_count(); ++i) {
      const double demand = d_[static_cast<Eigen::Index>(i)];
      if (demand <= 0.0) continue;
      Y.segment(static_cast<Eigen::Index>(i) * n_links, n_links) = all_or_nothing(net_, t, i, demand);
    }
    return Y;
  }

  Vector aggregate(const Vector& X) const {
    const auto n_links = static_cast<Eigen::Index>(net_.link_count());
    Vector v = Vector::Zero(n_links);
    for (std::size_t i = 0; i < net_.commodity_count(); ++i) {
      v += X.segment(static_cast<Eigen::Index>(i) * n_links, n_links);
    }
    return v;
  }

  const Network& net_;
  const Vector& d_;
  Vector X_;
  Vector v_;
};

template <typename Solver>
TapSolution run(const Network& net, const Vector& d, const TapOptions& options) {
  Solver solver(net, d);
  TapSolution sol;
  sol.beckmann_trace.push_back(beckmann_objective(net, solver.aggregate()));
  while (true) {
    sol.rgap = relative_gap(net, d, solver.aggregate());
    if (sol.rgap <= options.tol) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= options.max_iter) break;
    if constexpr (std::is_same_v<Solver, FrankWolfe>) {
      solver.step();
    } else {
      solver.sweep();
    }
    ++sol.iterations;
    sol.beckmann_trace.push_back(beckmann_objective(net, solver.aggregate()));
  }
  sol.X = solver.disaggregated();
  sol.v = solver.aggregate();
  sol.beckmann = beckmann_objective(net, sol.v);
  return sol;
}

}  // namespace

ShortestPathResult shortest_paths(const Network& net, const Vector& link_costs, std::size_t origin) {
  check_link_vector(net, link_costs, "link cost vector");
  if (origin >= net.node_count()) {
    throw Error(ErrorCode::DimensionMismatch, "origin index out of range");
  }
  for (Eigen::Index a = 0; a < link_costs.size(); ++a) {
    if (!std::isfinite(link_costs[a]) || link_costs[a] < 0.0) {
      throw Error(ErrorCode::NegativeCost, "link '" + net.links()[static_cast<std::size_t>(a)].id +
                                               "' has negative or non-finite cost");
    }
  }

  const std::size_t n = net.node_count();
  std::vector<std::vector<std::size_t>> outgoing(n);
  for (std::size_t a = 0; a < net.link_count(); ++a) outgoing[net.links()[a].tail].push_back(a);

  ShortestPathResult result{std::vector<double>(n, kInf), std::vector<std::optional<std::size_t>>(n)};
  std::vector<bool> settled(n, false);
  using Label = std::pair<double, std::size_t>;
  std::priority_queue<Label, std::vector<Label>, std::greater<>> heap;
  result.dist[origin] = 0.0;
  heap.emplace(0.0, origin);
  while (!heap.empty()) {
    const auto [du, u] = heap.top();
    heap.pop();
    if (settled[u]) continue;
    settled[u] = true;
    for (std::size_t a : outgoing[u]) {
      const std::size_t w = net.links()[a].head;
      const double candidate = du + link_costs[static_cast<Eigen::Index>(a)];
      if (!settled[w] && candidate < result.dist[w]) {
        result.dist[w] = candidate;
        result.pred[w] = a;
        heap.emplace(candidate, w);
      }
    }
  }
  return result;
}

Vector all_or_nothing(const Network& net, const Vector& link_costs, std::size_t commodity,
                      double demand) {
  if (commodity >= net.commodity_count()) {
    throw Error(ErrorCode::DimensionMismatch, "commodity index out of range");
  }
  if (!std::isfinite(demand) || demand < 0.0) {
    throw Error(ErrorCode::MalformedInput, "demand must be finite and nonnegative");
  }
  Vector flow = Vector::Zero(static_cast<Eigen::Index>(net.link_count()));
  if (demand == 0.0) return flow;
  const auto& c = net.commodities()[commodity];
  const auto sp = shortest_paths(net, link_costs, c.origin);
  for (std::size_t a : trace_path(net, sp, c.origin, c.destination)) {
    flow[static_cast<Eigen::Index>(a)] += demand;
  }
  return flow;
}

double beckmann_objective(const Network& net, const Vector& v) {
  check_link_vector(net, v, "aggregate flow vector");
  double total = 0.0;
  for (std::size_t a = 0; a < net.link_count(); ++a) {
    total += net.links()[a].cost.integral(v[static_cast<Eigen::Index>(a)]);
  }
  return total;
}

double line_search_beckmann(const Network& net, const Vector& v, const Vector& y) {
  check_link_vector(net, v, "current flow");
  check_link_vector(net, y, "target flow");
  const Vector dir = y - v;
  if (dir.cwiseAbs().maxCoeff() == 0.0) return 0.0;

  auto slope = [&](double lambda) {
    double s = 0.0;
    for (std::size_t a = 0; a < net.link_count(); ++a) {
      const auto idx = static_cast<Eigen::Index>(a);
      if (dir[idx] == 0.0) continue;
      s += net.links()[a].cost(v[idx] + lambda * dir[idx]) * dir[idx];
    }
    return s;
  };

  constexpr double kSlopeTol = 1e-12;
  constexpr int kMaxBisections = 100;
  if (slope(0.0) >= 0.0) return 0.0;
  if (slope(1.0) <= 0.0) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  double mid = 0.5;
  for (int it = 0; it < kMaxBisections; ++it) {
    mid = 0.5 * (lo + hi);
    const double s = slope(mid);
    if (std::abs(s) <= kSlopeTol) break;
    if (s < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

double relative_gap(const Network& net, const Vector& d, const Vector& v) {
  check_demand(net, d);
  check_link_vector(net, v, "aggregate flow vector");
  const Vector t = net.link_times(v);
  const double total_cost = t.dot(v);
  const Vector dist = destination_distances(net, t);
  double shortest_total = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d[i] > 0.0) shortest_total += d[i] * dist[i];
  }
  return (total_cost - shortest_total) / std::max(total_cost, kGapDenominatorFloor);
}

TapSolution solve_tap(const Network& net, const Vector& d, const TapOptions& options) {
  check_demand(net, d);
  if (!(options.tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "TAP tolerance must be positive");

  if (d.cwiseAbs().maxCoeff() == 0.0) {
    TapSolution sol;
    const auto n_links = static_cast<Eigen::Index>(net.link_count());
    sol.X = Vector::Zero(n_links * static_cast<Eigen::Index>(net.commodity_count()));
    sol.v = Vector::Zero(n_links);
    sol.converged = true;
    sol.beckmann_trace.push_back(0.0);
    return sol;
  }

  switch (options.method) {
    case TapMethod::FrankWolfe:
      return run<FrankWolfe>(net, d, options);
    case TapMethod::PathEquilibration:
      break;
  }
  return run<PathEquilibration>(net, d, options);
}

}  // namespace odadjust
