#include <benchmark/benchmark.h>

#include <string>

#include "odadjust/irm.hpp"
#include "odadjust/projection.hpp"
#include "odadjust/tap.hpp"

using namespace odadjust;

namespace {

Network toy() {
  NetworkSpec spec;
  spec.nodes = {"1", "2", "3"};
  spec.links = {{"1", "1", "2", {0.0, 1.0}},
                {"2", "1", "3", {0.0, 1.0}},
                {"3", "2", "3", {0.0, 1.0}},
                {"4", "3", "2", {0.0, 1.0}}};
  spec.commodities = {{"1", "1", "2", 1.5}, {"2", "1", "3", 1.75}};
  spec.observations = {{"1", 1.5833333}, {"2", 1.6666667}};
  spec.eta1 = 0.5;
  spec.eta2 = 0.5;
  return Network(spec);
}

// n x n grid, arcs both ways, BPR-like quadratic costs; commodities run
// corner to corner and along the edges.
Network grid(int n) {
  NetworkSpec spec;
  auto name = [n](int r, int c) { return std::to_string(r * n + c + 1); };
  for (int k = 0; k < n * n; ++k) spec.nodes.push_back(std::to_string(k + 1));
  int id = 0;
  auto arc = [&](const std::string& a, const std::string& b, double scale) {
    spec.links.push_back({std::to_string(++id), a, b, {1.0 + 0.1 * scale, 0.2, 0.05}});
  };
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (c + 1 < n) {
        arc(name(r, c), name(r, c + 1), r);
        arc(name(r, c + 1), name(r, c), c);
      }
      if (r + 1 < n) {
        arc(name(r, c), name(r + 1, c), c);
        arc(name(r + 1, c), name(r, c), r);
      }
    }
  }
  spec.commodities = {{"1", name(0, 0), name(n - 1, n - 1), 4.0},
                      {"2", name(n - 1, 0), name(0, n - 1), 3.0},
                      {"3", name(0, n - 1), name(n - 1, 0), 2.0}};
  spec.observations = {{"1", 1.0}};
  return Network(spec);
}

void BM_SolveTapToy(benchmark::State& state) {
  const Network net = toy();
  Vector d(2);
  d << 1.5, 1.75;
  TapOptions opt;
  opt.tol = 1e-8;
  for (auto _ : state) benchmark::DoNotOptimize(solve_tap(net, d, opt));
}
BENCHMARK(BM_SolveTapToy);

void BM_SolveTapGrid(benchmark::State& state) {
  const Network net = grid(static_cast<int>(state.range(0)));
  const Vector d = net.target_demand();
  TapOptions opt;
  opt.tol = 1e-8;
  for (auto _ : state) benchmark::DoNotOptimize(solve_tap(net, d, opt));
  state.SetLabel(std::to_string(net.link_count()) + " links");
}
BENCHMARK(BM_SolveTapGrid)->Arg(3)->Arg(5)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_ProjectTangent(benchmark::State& state) {
  const DapProblem p(grid(static_cast<int>(state.range(0))));
  StatePoint s = StatePoint::zeros(p.layout());
  s.d = p.target_demand();
  const IRConfig cfg;
  const StatePoint z = restore(p, s, cfg);
  const TangentSpace T = make_tangent_space(p, z).with_box(0.1);
  const Vector mu = Vector::Zero(p.layout().constraint_size());
  const Vector target = z.flatten() - cfg.eta * eval_L_grad(p, z, mu);
  for (auto _ : state) benchmark::DoNotOptimize(project(T, target));
  state.SetLabel(std::to_string(p.layout().state_size()) + " unknowns");
}
BENCHMARK(BM_ProjectTangent)->Arg(2)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_SolveDapToy(benchmark::State& state) {
  const DapProblem p(toy());
  StatePoint s = StatePoint::zeros(p.layout());
  s.d << 1.0, 2.0;
  const Vector mu = Vector::Zero(p.layout().constraint_size());
  const IRConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(solve_dap(p, cfg, s, mu));
}
BENCHMARK(BM_SolveDapToy)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
