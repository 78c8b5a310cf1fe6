#pragma once

#include <optional>

#include <Eigen/Core>

#include "odadjust/network.hpp"

namespace odadjust {

/// Linearised feasible set {w : J (w - point) = 0, w >= lower} around `point`,
/// optionally intersected with the box ||w - point||_inf <= radius.
struct TangentSpace {
  Vector point;
  SparseMatrix jacobian;
  Vector lower;  // -infinity marks an unbounded coordinate
  std::optional<double> radius;

  TangentSpace with_box(double r) const {
    TangentSpace t = *this;
    t.radius = r;
    return t;
  }
};

/// Euclidean projection of b onto the tangent set: minimises 0.5 ||w - b||^2.
/// Primal active-set on the bound and box constraints; the equality part is
/// handled by minimum-norm steps so rank-deficient Jacobians need no row
/// selection. Throws SolverStalled past 50 * dim iterations.
Vector project(const TangentSpace& T, const Vector& b);

/// y minimising ||J y - r||_2 and, among minimisers, ||y||_2. Rank is decided
/// by a complete orthogonal decomposition with relative threshold 1e-10.
Vector min_norm_solve(const Eigen::MatrixXd& J, const Vector& r);

}  // namespace odadjust
