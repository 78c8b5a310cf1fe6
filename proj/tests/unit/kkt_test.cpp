#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "odadjust/errors.hpp"
#include "odadjust/kkt.hpp"
#include "odadjust/tap.hpp"

using namespace odadjust;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

const Vector kToyX = vec({1.5, 0, 0, 0, 1.0 / 12, 5.0 / 3, 1.0 / 12, 0});

StatePoint toy_kkt_point() {
  StatePoint z;
  z.d = vec({1.5, 1.75});
  z.X = kToyX;
  z.alpha = vec({0, -19.0 / 12, -5.0 / 3, 0, -19.0 / 12, -5.0 / 3});
  z.beta = vec({0, 0, 0, 1.0 / 12, 0, 0, 0, 1.0 / 12});
  return z;
}

double rel_err(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace

TEST(StateLayout, ToySizes) {
  const StateLayout L = StateLayout::of(oracle::toy_network());
  EXPECT_EQ(L.state_size(), 24);
  EXPECT_EQ(L.constraint_size(), 22);
  EXPECT_EQ(L.beta_offset(), 16);
}

TEST(StatePoint, FlattenRoundTrip) {
  const StateLayout L = StateLayout::of(oracle::toy_network());
  std::mt19937_64 rng(1);
  const StatePoint s = oracle::random_state(L, rng);
  const StatePoint t = StatePoint::unflatten(L, s.flatten());
  EXPECT_EQ(t.d, s.d);
  EXPECT_EQ(t.X, s.X);
  EXPECT_EQ(t.alpha, s.alpha);
  EXPECT_EQ(t.beta, s.beta);
  EXPECT_TRUE(s.in_domain());
}

TEST(EvalF, Examples) {
  const DapProblem p(oracle::toy_network());
  // Observations are the 7-digit rounding of 19/12 and 5/3.
  EXPECT_NEAR(eval_F(p, vec({1.5, 1.75}), kToyX), 0.0, 1e-13);

  Vector X = Vector::Zero(8);
  X[0] = 1.5833333;
  X[1] = 1.6666667;
  const ObjectiveParts parts = eval_F_parts(p, vec({1.625, 1.625}), X);
  EXPECT_NEAR(parts.total, 0.015625, 1e-15);
  EXPECT_NEAR(parts.f1, 0.0, 1e-15);
  EXPECT_NEAR(parts.f2, 0.03125, 1e-15);
}

TEST(EvalFGrad, Examples) {
  const DapProblem p(oracle::toy_network());
  const ObjectiveGradient g = eval_F_grad(p, vec({1.0, 2.0}), kToyX);
  EXPECT_NEAR(g.d[0], -0.5, 1e-15);
  EXPECT_NEAR(g.d[1], 0.25, 1e-15);
  Vector X = Vector::Zero(8);
  X[0] = 1.5833333;
  X[1] = 1.6666667;
  const ObjectiveGradient g0 = eval_F_grad(p, vec({1.5, 1.75}), X);
  EXPECT_LE(g0.d.norm() + g0.X.norm(), 1e-15);
}

TEST(EvalC, ToyKktPoint) {
  const DapProblem p(oracle::toy_network());
  EXPECT_LE(eval_C(p, toy_kkt_point()).norm_inf(), 1e-14);
}

TEST(EvalC, ZeroState) {
  const DapProblem p(oracle::toy_network());
  EXPECT_EQ(eval_C(p, StatePoint::zeros(p.layout())).norm_inf(), 0.0);
}

TEST(EvalC, BetaPerturbation) {
  const DapProblem p(oracle::toy_network());
  StatePoint z = toy_kkt_point();
  z.X[0] = 19.0 / 12;
  const ConstraintResidual before = eval_C(p, z);
  z.beta[0] += 1.0;
  const ConstraintResidual after = eval_C(p, z);
  EXPECT_NEAR(after.stationarity[0] - before.stationarity[0], -1.0, 1e-15);
  EXPECT_NEAR(after.complementarity[0], 19.0 / 12, 1e-15);
}

TEST(EvalCJacobian, ToyLinearCosts) {
  const DapProblem p(oracle::toy_network());
  const Eigen::MatrixXd J(eval_C_jacobian(p, toy_kkt_point()));
  const Eigen::MatrixXd R(p.structure().R);
  EXPECT_EQ(J.block(0, 2, 8, 8), R.transpose() * R);
  StatePoint s = StatePoint::zeros(p.layout());
  s.d = vec({1, 1});
  const Eigen::MatrixXd J0(eval_C_jacobian(p, s));
  EXPECT_EQ(J0.bottomRows(8).cwiseAbs().sum(), 0.0);
}

TEST(EvalCJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const DapProblem p(oracle::random_network(rng));
    const StateLayout& L = p.layout();
    const StatePoint s = oracle::random_state(L, rng);
    const Eigen::MatrixXd J(eval_C_jacobian(p, s));
    const Eigen::MatrixXd Jfd = oracle::fd_jacobian(
        [&](const Vector& x) { return eval_C(p, StatePoint::unflatten(L, x)).flatten(); }, s.flatten());
    EXPECT_LE((J - Jfd).norm() / std::max(1.0, J.norm()), 1e-7);
  }
}

TEST(EvalCJacobian, TaylorResidualIsQuadratic) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const DapProblem p(oracle::random_network(rng));
    const StateLayout& L = p.layout();
    const StatePoint s = oracle::random_state(L, rng);
    Vector u(L.state_size());
    for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = normal(rng);
    const Vector x = s.flatten();
    const Vector c0 = eval_C(p, s).flatten();
    const Vector Ju = eval_C_jacobian(p, s) * u;
    std::vector<double> res;
    for (double h : {1e-2, 1e-3, 1e-4}) {
      const Vector ch = eval_C(p, StatePoint::unflatten(L, x + h * u)).flatten();
      res.push_back((ch - c0 - h * Ju).norm());
    }
    // Costs of degree <= 2 in X and bilinear complementarity: the residual is
    // exactly quadratic up to rounding, so each decade cuts it ~100x.
    EXPECT_LE(res[1], res[0] / 50.0 + 1e-12);
    EXPECT_LE(res[2], res[1] / 50.0 + 1e-12);
  }
}

TEST(EvalL, Examples) {
  const DapProblem p(oracle::toy_network());
  std::mt19937_64 rng(2);
  const StatePoint s = oracle::random_state(p.layout(), rng);
  const Vector zero = Vector::Zero(p.layout().constraint_size());
  EXPECT_DOUBLE_EQ(eval_L(p, s, zero), eval_F(p, s.d, s.X));
  EXPECT_LE((eval_L_grad(p, s, zero) - eval_F_grad_full(p, s)).norm(), 1e-15);

  const StatePoint z = toy_kkt_point();
  Vector mu(p.layout().constraint_size());
  for (Eigen::Index j = 0; j < mu.size(); ++j) mu[j] = std::sin(static_cast<double>(j));
  EXPECT_NEAR(eval_L(p, z, mu), eval_F(p, z.d, z.X), 1e-13);
}

TEST(EvalL, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const DapProblem p(oracle::random_network(rng));
    const StateLayout& L = p.layout();
    const StatePoint s = oracle::random_state(L, rng);
    Vector mu(L.constraint_size());
    for (Eigen::Index j = 0; j < mu.size(); ++j) mu[j] = u(rng);
    const auto Lf = [&](const Vector& x) { return eval_L(p, StatePoint::unflatten(L, x), mu); };
    EXPECT_LE(rel_err(eval_L_grad(p, s, mu), oracle::fd_gradient(Lf, s.flatten())), 1e-5);
    const auto Ff = [&](const Vector& x) {
      const StatePoint t = StatePoint::unflatten(L, x);
      return eval_F(p, t.d, t.X);
    };
    EXPECT_LE(rel_err(eval_F_grad_full(p, s), oracle::fd_gradient(Ff, s.flatten())), 1e-5);
  }
}

TEST(RecoverMultipliers, ToyEquilibrium) {
  const DapProblem p(oracle::toy_network());
  const Vector d = vec({1.5, 1.75});
  const Vector t = p.network().link_times(aggregate_flows(p.structure(), kToyX));
  const Multipliers m = recover_multipliers(p, d, kToyX, t);
  const StatePoint z = toy_kkt_point();
  EXPECT_LE((m.alpha - z.alpha).lpNorm<Eigen::Infinity>(), 1e-14);
  EXPECT_LE((m.beta - z.beta).lpNorm<Eigen::Infinity>(), 1e-14);
  EXPECT_NEAR(m.beta.dot(kToyX), 0.0, 1e-15);
}

TEST(RecoverMultipliers, SingleLink) {
  NetworkSpec spec;
  spec.nodes = {"1", "2"};
  spec.links = {{"1", "1", "2", {0.0, 1.0}}};
  spec.commodities = {{"1", "1", "2", 2.0}};
  const DapProblem p{Network(spec)};
  const Multipliers m = recover_multipliers(p, vec({2.0}), vec({2.0}), vec({2.0}));
  EXPECT_EQ(m.alpha, vec({0.0, -2.0}));
  EXPECT_EQ(m.beta, vec({0.0}));
}

TEST(RecoverMultipliers, RejectsNonEquilibrium) {
  const DapProblem p(oracle::toy_network());
  const Vector X = vec({1.5, 0, 0, 0, 0, 1.75, 0, 0});
  const Vector t = p.network().link_times(aggregate_flows(p.structure(), X));
  // Commodity 2 uses link 2 (cost 1.75) while 1->2->3 costs 1.5.
  EXPECT_THROW(recover_multipliers(p, vec({1.5, 1.75}), X, t), Error);
}

TEST(RecoverMultipliers, BoundedLeastSquaresAgrees) {
  const DapProblem p(oracle::toy_network());
  const Vector d = vec({1.5, 1.75});
  const Vector t = p.network().link_times(aggregate_flows(p.structure(), kToyX));
  const Multipliers m = recover_multipliers(p, d, kToyX, t, MultiplierRecovery::BoundedLeastSquares);
  StatePoint z = toy_kkt_point();
  z.alpha = m.alpha;
  z.beta = m.beta;
  EXPECT_GE(m.beta.minCoeff(), 0.0);
  EXPECT_LE(eval_C(p, z).norm_inf(), 1e-8);
}

TEST(RecoverMultipliers, PropertiesOnRandomEquilibria) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const DapProblem p(oracle::random_network(rng));
    const Vector d = p.target_demand();
    const TapSolution eq = solve_tap(p.network(), d);
    ASSERT_TRUE(eq.converged);
    const Vector t = p.network().link_times(eq.v);
    const Multipliers m = recover_multipliers(p, d, eq.X, t);
    EXPECT_GE(m.beta.minCoeff(), 0.0);
    EXPECT_TRUE(m.alpha.allFinite());
    EXPECT_LE(std::abs(m.beta.dot(eq.X)), 1e-6 * (1.0 + eq.X.lpNorm<1>()));
    const StatePoint z{d, eq.X, m.alpha, m.beta};
    const double scale = 1.0 + t.lpNorm<Eigen::Infinity>();
    EXPECT_LE(eval_C(p, z).norm_inf(), std::max(1e-6, 10.0 * 1e-8 * scale));
  }
}
