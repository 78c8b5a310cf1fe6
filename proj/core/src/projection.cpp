#include "odadjust/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "odadjust/errors.hpp"

namespace odadjust {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRankThreshold = 1e-10;

enum class Bound : unsigned char { Free, Lower, Upper };

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& J, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(J.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = J.col(cols[k]);
  return out;
}

}  // namespace

Vector min_norm_solve(const Eigen::MatrixXd& J, const Vector& r) {
  if (J.rows() != r.size()) {
    throw Error(ErrorCode::DimensionMismatch, "right-hand side length does not match matrix rows");
  }
  if (J.rows() == 0 || J.cols() == 0) return Vector::Zero(J.cols());
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(kRankThreshold);
  cod.compute(J);
  if (cod.rank() == 0) return Vector::Zero(J.cols());
  return cod.solve(r);
}

Vector project(const TangentSpace& T, const Vector& b) {
  const Eigen::Index n = T.point.size();
  if (b.size() != n || T.lower.size() != n || T.jacobian.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "projection data dimensions disagree");
  }
  if (T.radius && !(*T.radius >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "trust-region radius must be nonnegative");
  }
  if (T.radius && *T.radius == 0.0) return T.point;

  Vector lo = T.lower;
  Vector hi = Vector::Constant(n, kInf);
  if (T.radius) {
    lo = lo.cwiseMax((T.point.array() - *T.radius).matrix());
    hi = (T.point.array() + *T.radius).matrix();
  }

  const Eigen::MatrixXd J(T.jacobian);
  Vector w = T.point.cwiseMax(lo).cwiseMin(hi);
  std::vector<Bound> state(static_cast<std::size_t>(n), Bound::Free);

  const double scale = 1.0 + b.lpNorm<Eigen::Infinity>() + T.point.lpNorm<Eigen::Infinity>();
  const double step_tol = 1e-12 * scale;
  const double mult_tol = 1e-11 * scale;
  const long max_iter = 50L * std::max<Eigen::Index>(n, 1);

  for (long iter = 0; iter < max_iter; ++iter) {
    std::vector<Eigen::Index> free_idx;
    std::vector<Eigen::Index> fixed_idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      (state[static_cast<std::size_t>(i)] == Bound::Free ? free_idx : fixed_idx).push_back(i);
    }
    const Eigen::MatrixXd JF = select_columns(J, free_idx);

    // Step to the minimiser over the current working set: the null-space
    // component of (b - w) restricted to the free coordinates.
    Vector p = Vector::Zero(n);
    if (!free_idx.empty()) {
      Vector g(static_cast<Eigen::Index>(free_idx.size()));
      for (std::size_t k = 0; k < free_idx.size(); ++k) g[static_cast<Eigen::Index>(k)] = b[free_idx[k]] - w[free_idx[k]];
      const Vector pf = g - min_norm_solve(JF, JF * g);
      for (std::size_t k = 0; k < free_idx.size(); ++k) p[free_idx[k]] = pf[static_cast<Eigen::Index>(k)];
    }

    const double p_norm = p.lpNorm<Eigen::Infinity>();
    if (p_norm <= step_tol) {
      // Stationary on the working set; check the bound multipliers.
      const Vector grad = w - b;
      Vector lambda = Vector::Zero(J.rows());
      if (!free_idx.empty()) {
        Vector gf(static_cast<Eigen::Index>(free_idx.size()));
        for (std::size_t k = 0; k < free_idx.size(); ++k) gf[static_cast<Eigen::Index>(k)] = grad[free_idx[k]];
        lambda = min_norm_solve(JF.transpose(), gf);
      }
      const Vector jt_lambda = J.transpose() * lambda;
      Eigen::Index release = -1;
      for (Eigen::Index i : fixed_idx) {
        const double nu = grad[i] - jt_lambda[i];
        const Bound side = state[static_cast<std::size_t>(i)];
        if ((side == Bound::Lower && nu < -mult_tol) || (side == Bound::Upper && nu > mult_tol)) {
          release = i;  // lowest violating index
          break;
        }
      }
      if (release < 0) return w;
      state[static_cast<std::size_t>(release)] = Bound::Free;
      continue;
    }

    // Ratio test; ties go to the lowest index.
    double alpha = 1.0;
    Eigen::Index blocking = -1;
    Bound blocking_side = Bound::Free;
    const double p_tol = 1e-12 * p_norm;
    for (Eigen::Index i : free_idx) {
      double ratio = kInf;
      Bound side = Bound::Free;
      if (p[i] < -p_tol && std::isfinite(lo[i])) {
        ratio = std::max(0.0, (lo[i] - w[i]) / p[i]);
        side = Bound::Lower;
      } else if (p[i] > p_tol && std::isfinite(hi[i])) {
        ratio = std::max(0.0, (hi[i] - w[i]) / p[i]);
        side = Bound::Upper;
      }
      if (ratio < alpha) {
        alpha = ratio;
        blocking = i;
        blocking_side = side;
      }
    }

    w += alpha * p;
    if (blocking >= 0) {
      w[blocking] = blocking_side == Bound::Lower ? lo[blocking] : hi[blocking];
      state[static_cast<std::size_t>(blocking)] = blocking_side;
    }
    w = w.cwiseMax(lo).cwiseMin(hi);
  }
  throw Error(ErrorCode::SolverStalled, "active-set projection exceeded its iteration cap");
}

}  // namespace odadjust
