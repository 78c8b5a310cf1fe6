#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "oracle.hpp"
#include "odadjust/errors.hpp"
#include "odadjust/projection.hpp"

using namespace odadjust;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TangentSpace tangent(const oracle::ProjectionInstance& q, bool with_box = true) {
  TangentSpace T;
  T.point = q.point;
  T.jacobian = q.J.sparseView();
  T.lower = q.lower;
  if (with_box && q.radius > 0.0) T.radius = q.radius;
  return T;
}

Vector oracle_projection(const oracle::ProjectionInstance& q, const Vector& b, bool with_box = true) {
  Vector lo = q.lower;
  Vector hi = Vector::Constant(q.point.size(), kInf);
  if (with_box && q.radius > 0.0) {
    lo = lo.cwiseMax((q.point.array() - q.radius).matrix());
    hi = (q.point.array() + q.radius).matrix();
  }
  return oracle::dense_projection(q.J, q.point, lo, hi, b);
}

double infeasibility(const oracle::ProjectionInstance& q, const Vector& w) {
  double worst = q.J.rows() ? (q.J * (w - q.point)).lpNorm<Eigen::Infinity>() : 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    worst = std::max(worst, q.lower[j] - w[j]);
    if (q.radius > 0.0) worst = std::max(worst, std::abs(w[j] - q.point[j]) - q.radius);
  }
  return worst;
}

}  // namespace

TEST(MinNormSolve, Examples) {
  Vector r(3);
  r << 1, -2, 3;
  EXPECT_LE((min_norm_solve(Eigen::MatrixXd::Identity(3, 3), r) - r).norm(), 1e-15);

  Eigen::MatrixXd J(1, 2);
  J << 1, 1;
  Vector two(1);
  two << 2;
  const Vector y = min_norm_solve(J, two);
  EXPECT_NEAR(y[0], 1.0, 1e-14);
  EXPECT_NEAR(y[1], 1.0, 1e-14);

  Eigen::MatrixXd Jd(2, 2);
  Jd << 1, 1, 1, 1;
  Vector tt(2);
  tt << 2, 2;
  EXPECT_LE((min_norm_solve(Jd, tt) - y).norm(), 1e-14);

  EXPECT_THROW(min_norm_solve(J, tt), Error);
  EXPECT_EQ(min_norm_solve(Eigen::MatrixXd::Zero(2, 3), tt), Vector::Zero(3));
}

TEST(Project, FeasiblePointsAreFixed) {
  Eigen::MatrixXd J(1, 3);
  J << 1, 1, 1;
  TangentSpace T;
  T.point = Vector::Constant(3, 1.0);
  T.jacobian = J.sparseView();
  T.lower = Vector::Zero(3);
  EXPECT_LE((project(T, T.point) - T.point).norm(), 1e-15);
  Vector b(3);
  b << 0.5, 1.5, 1.0;
  EXPECT_LE((project(T, b) - b).norm(), 1e-14);
  EXPECT_LE((project(T.with_box(1.0), b) - b).norm(), 1e-14);
}

TEST(Project, EqualityOnlySmokeCase) {
  Eigen::MatrixXd J(1, 2);
  J << 1, 1;
  TangentSpace T;
  T.point = Vector::Zero(2);
  T.jacobian = J.sparseView();
  T.lower = Vector::Constant(2, -kInf);
  Vector b(2);
  b << 1, 0;
  const Vector w = project(T, b);
  EXPECT_NEAR(w[0], 0.5, 1e-14);
  EXPECT_NEAR(w[1], -0.5, 1e-14);
}

TEST(Project, ZeroRadiusReturnsPoint) {
  TangentSpace T;
  T.point = Vector::Ones(2);
  T.jacobian = Eigen::MatrixXd::Zero(0, 2).sparseView();
  T.lower = Vector::Zero(2);
  EXPECT_EQ(project(T.with_box(0.0), Vector::Constant(2, 5.0)), T.point);
  EXPECT_THROW(project(T, Vector::Zero(3)), Error);
}

TEST(Project, RandomInstancesAgainstOracle) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const oracle::ProjectionInstance q = oracle::random_projection_instance(rng, 30);
    const TangentSpace T = tangent(q);
    const Vector w = project(T, q.b);

    EXPECT_LE(infeasibility(q, w), 1e-8) << "trial " << trial;
    EXPECT_LE((w - oracle_projection(q, q.b)).lpNorm<Eigen::Infinity>(), 1e-6) << "trial " << trial;
    EXPECT_LE((project(T, w) - w).lpNorm<Eigen::Infinity>(), 1e-8);

    Vector b2 = q.b;
    for (Eigen::Index j = 0; j < b2.size(); ++j) b2[j] += normal(rng);
    const Vector w2 = project(T, b2);
    EXPECT_LE((w - w2).norm(), (q.b - b2).norm() + 1e-9);
  }
}

TEST(Project, OrthogonalityWithoutBounds) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    oracle::ProjectionInstance q = oracle::random_projection_instance(rng, 20);
    q.lower.setConstant(-kInf);
    q.radius = 0.0;
    const Vector w = project(tangent(q, false), q.b);
    if (q.J.rows() == 0) {
      EXPECT_LE((w - q.b).norm(), 1e-12);
      continue;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(q.J, Eigen::ComputeFullV);
    Eigen::Index rank = 0;
    while (rank < svd.singularValues().size() && svd.singularValues()[rank] > 1e-10 * svd.singularValues()[0]) ++rank;
    const Eigen::MatrixXd N = svd.matrixV().rightCols(q.J.cols() - rank);
    EXPECT_LE((N.transpose() * (q.b - w)).norm(), 1e-6);
  }
}
