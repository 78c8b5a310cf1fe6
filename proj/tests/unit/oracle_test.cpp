#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "odadjust/errors.hpp"

using namespace odadjust;
using namespace odadjust::oracle;

namespace {

std::vector<std::string> link_ids(const Network& net, const Path& p) {
  std::vector<std::string> out;
  for (std::size_t a : p) out.push_back(net.links()[a].id);
  return out;
}

Network single_link() {
  NetworkSpec spec;
  spec.nodes = {"1", "2"};
  spec.links = {{"1", "1", "2", {2.0, 1.0}}};
  spec.commodities = {{"1", "1", "2", 1.0}};
  return Network(spec);
}

}  // namespace

TEST(EnumeratePaths, ToyCommodities) {
  const Network net = toy_network();
  const PathSet first = enumerate_paths(net, 0);
  ASSERT_EQ(first.size(), 2u);
  EXPECT_EQ(link_ids(net, first[0]), (std::vector<std::string>{"1"}));
  EXPECT_EQ(link_ids(net, first[1]), (std::vector<std::string>{"2", "4"}));
  const PathSet second = enumerate_paths(net, 1);
  ASSERT_EQ(second.size(), 2u);
  EXPECT_EQ(link_ids(net, second[0]), (std::vector<std::string>{"2"}));
  EXPECT_EQ(link_ids(net, second[1]), (std::vector<std::string>{"1", "3"}));
}

TEST(EnumeratePaths, SingleLink) { EXPECT_EQ(enumerate_paths(single_link(), 0).size(), 1u); }

TEST(EnumeratePaths, RefusesLargeNetworks) {
  NetworkSpec spec;
  for (int i = 1; i <= 9; ++i) spec.nodes.push_back(std::to_string(i));
  for (int i = 1; i < 9; ++i) spec.links.push_back({std::to_string(i), std::to_string(i), std::to_string(i + 1), {1.0}});
  spec.commodities = {{"1", "1", "9", 1.0}};
  const Network net(spec);
  try {
    enumerate_paths(net, 0);
    FAIL() << "expected TooLarge";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooLarge);
  }
}

TEST(OracleTap, ToyEquilibrium) {
  const Network net = toy_network();
  Vector d(2);
  d << 1.5, 1.75;
  const OracleTap r = oracle_tap(net, d);
  EXPECT_LE(r.pg_norm, 1e-10);
  EXPECT_NEAR(r.v[0], 19.0 / 12.0, 1e-8);
  EXPECT_NEAR(r.v[1], 5.0 / 3.0, 1e-8);
  EXPECT_NEAR(r.v[2], 1.0 / 12.0, 1e-8);
  EXPECT_NEAR(r.v[3], 0.0, 1e-8);
}

TEST(OracleTap, ToySymmetricDemand) {
  Vector d(2);
  d << 1.0, 1.0;
  const OracleTap r = oracle_tap(toy_network(), d);
  EXPECT_NEAR(r.v[0], 1.0, 1e-8);
  EXPECT_NEAR(r.v[1], 1.0, 1e-8);
  EXPECT_NEAR(r.v[2], 0.0, 1e-8);
  EXPECT_NEAR(r.v[3], 0.0, 1e-8);
}

TEST(OracleTap, ZeroDemand) {
  const OracleTap r = oracle_tap(toy_network(), Vector::Zero(2));
  EXPECT_EQ(r.v.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(OracleTap, WardropAndFeasibilityOnRandomNetworks) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 15; ++trial) {
    const Network net = random_network(rng);
    const Vector d = net.target_demand();
    const OracleTap r = oracle_tap(net, d);
    ASSERT_LE(r.pg_norm, 1e-10) << "trial " << trial;
    for (std::size_t i = 0; i < r.paths.size(); ++i) {
      double total = 0.0;
      double cmin = 1e300;
      std::vector<double> cost;
      for (const auto& p : r.paths[i]) {
        double c = 0.0;
        for (std::size_t a : p) c += link_cost(net.links()[a], r.v[static_cast<Eigen::Index>(a)]);
        cost.push_back(c);
        cmin = std::min(cmin, c);
      }
      for (std::size_t p = 0; p < cost.size(); ++p) {
        EXPECT_GE(r.flow[i][p], 0.0);
        total += r.flow[i][p];
        if (r.flow[i][p] > 1e-8) {
          EXPECT_LE(cost[p] - cmin, 1e-6);
        }
      }
      EXPECT_NEAR(total, d[static_cast<Eigen::Index>(i)], 1e-12);
    }
  }
}

TEST(FdGradient, SquaredNorm) {
  Vector x(2);
  x << 1.0, 2.0;
  const Vector g = fd_gradient([](const Vector& y) { return y.squaredNorm(); }, x, 1e-6);
  EXPECT_NEAR(g[0], 2.0, 1e-8);
  EXPECT_NEAR(g[1], 4.0, 1e-8);
}

TEST(FdGradient, LinearIsExact) {
  Vector c(3);
  c << 0.5, -2.0, 3.0;
  Vector x(3);
  x << 0.25, 0.5, 0.75;
  for (double h : {1e-1, 1e-3, 1.0}) {
    const Vector g = fd_gradient([&](const Vector& y) { return c.dot(y); }, x, h);
    EXPECT_LE((g - c).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(Nnls, MatchesKnownSolution) {
  Eigen::MatrixXd E(3, 2);
  E << 1, 0, 0, 1, 1, 1;
  Vector f(3);
  f << 2, -1, 1;
  // Unconstrained optimum has x2 < 0; with x2 = 0 the best x1 is 1.5.
  const Vector x = nnls(E, f);
  EXPECT_NEAR(x[0], 1.5, 1e-12);
  EXPECT_NEAR(x[1], 0.0, 1e-12);
}

TEST(DenseProjection, EqualityOnly) {
  Eigen::MatrixXd J(1, 2);
  J << 1, 1;
  const Vector inf = Vector::Constant(2, std::numeric_limits<double>::infinity());
  Vector b(2);
  b << 1, 0;
  const Vector w = dense_projection(J, Vector::Zero(2), -inf, inf, b);
  EXPECT_NEAR(w[0], 0.5, 1e-12);
  EXPECT_NEAR(w[1], -0.5, 1e-12);
}

TEST(DenseProjection, BoundsActive) {
  Eigen::MatrixXd J(1, 3);
  J << 1, 1, 1;
  Vector z(3);
  z << 1, 1, 1;
  const Vector inf = Vector::Constant(3, std::numeric_limits<double>::infinity());
  Vector b(3);
  b << 5, -5, 0;
  // sum stays 3 with w >= 0; minimiser (3, 0, 0).
  const Vector w = dense_projection(J, z, Vector::Zero(3), inf, b);
  EXPECT_NEAR(w[0], 3.0, 1e-10);
  EXPECT_NEAR(w[1], 0.0, 1e-10);
  EXPECT_NEAR(w[2], 0.0, 1e-10);
}
