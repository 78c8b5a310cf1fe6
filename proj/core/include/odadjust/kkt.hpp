#pragma once

#include <cstddef>

#include "odadjust/network.hpp"

namespace odadjust {

/// Offsets of the four blocks of a flattened state s = (d, X, alpha, beta)
/// and of the three blocks of the lifted constraint C(s).
struct StateLayout {
  std::size_t commodities = 0;
  std::size_t links = 0;
  std::size_t nodes = 0;

  static StateLayout of(const Network& net) {
    return {net.commodity_count(), net.link_count(), net.node_count()};
  }

  Eigen::Index demand_size() const { return idx(commodities); }
  Eigen::Index flow_size() const { return idx(commodities * links); }
  Eigen::Index alpha_size() const { return idx(commodities * nodes); }
  Eigen::Index beta_size() const { return flow_size(); }

  Eigen::Index demand_offset() const { return 0; }
  Eigen::Index flow_offset() const { return demand_size(); }
  Eigen::Index alpha_offset() const { return flow_offset() + flow_size(); }
  Eigen::Index beta_offset() const { return alpha_offset() + alpha_size(); }
  Eigen::Index state_size() const { return beta_offset() + beta_size(); }

  Eigen::Index stationarity_offset() const { return 0; }
  Eigen::Index conservation_offset() const { return flow_size(); }
  Eigen::Index complementarity_offset() const { return conservation_offset() + alpha_size(); }
  Eigen::Index constraint_size() const { return complementarity_offset() + flow_size(); }

 private:
  static Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }
};

/// Iterate of the lifted problem: demand, disaggregated flows, multipliers of
/// the conservation equalities (alpha) and of X >= 0 (beta).
struct StatePoint {
  Vector d;
  Vector X;
  Vector alpha;
  Vector beta;

  static StatePoint zeros(const StateLayout& layout);
  static StatePoint unflatten(const StateLayout& layout, const Vector& s);
  Vector flatten() const;

  /// d, X, beta >= -tol componentwise.
  bool in_domain(double tol = 0.0) const;
};

/// C(s) = (T(X) + M^T alpha - beta; Gamma d - M X; beta_j X_j).
struct ConstraintResidual {
  Vector stationarity;
  Vector conservation;
  Vector complementarity;

  Vector flatten() const;
  double norm() const;  // Euclidean
  double norm_inf() const;
};

/// Network plus the structure matrices built from it; the problem data shared
/// by every evaluation routine.
class DapProblem {
 public:
  explicit DapProblem(Network net);

  const Network& network() const { return net_; }
  const StructureMatrices& structure() const { return structure_; }
  const StateLayout& layout() const { return layout_; }
  const Vector& target_demand() const { return target_; }

 private:
  Network net_;
  StructureMatrices structure_;
  StateLayout layout_;
  Vector target_;
};

struct ObjectiveParts {
  double f1 = 0.0;  // sum over observed links of (v_a - observed_a)^2
  double f2 = 0.0;  // ||d - target||^2
  double total = 0.0;  // eta1 f1 + eta2 f2
};

ObjectiveParts eval_F_parts(const DapProblem& p, const Vector& d, const Vector& X);
double eval_F(const DapProblem& p, const Vector& d, const Vector& X);

struct ObjectiveGradient {
  Vector d;
  Vector X;
};

ObjectiveGradient eval_F_grad(const DapProblem& p, const Vector& d, const Vector& X);
/// Gradient of F over the full state (zero on the alpha and beta blocks).
Vector eval_F_grad_full(const DapProblem& p, const StatePoint& s);

/// T(X) = R^T t(R X).
Vector lifted_link_times(const DapProblem& p, const Vector& X);

ConstraintResidual eval_C(const DapProblem& p, const StatePoint& s);
SparseMatrix eval_C_jacobian(const DapProblem& p, const StatePoint& s);

/// L(s, mu) = F(d, X) + C(s)^T mu.
double eval_L(const DapProblem& p, const StatePoint& s, const Vector& mu);
Vector eval_L_grad(const DapProblem& p, const StatePoint& s, const Vector& mu);

struct Multipliers {
  Vector alpha;
  Vector beta;
};

enum class MultiplierRecovery {
  /// alpha^i = -(shortest-path potentials from the commodity origin).
  ShortestPathPotentials,
  /// min ||T(X) + M^T alpha - beta||^2 + ||X o beta||^2 subject to beta >= 0.
  BoundedLeastSquares,
};

/// Multipliers (alpha, beta) compatible with an equilibrium (d, X) under link
/// times t(RX). Throws ResidualTooLarge when X is not accurate enough for the
/// potentials to satisfy the KKT system.
Multipliers recover_multipliers(const DapProblem& p, const Vector& d, const Vector& X,
                                const Vector& link_times,
                                MultiplierRecovery method = MultiplierRecovery::ShortestPathPotentials);

}  // namespace odadjust
