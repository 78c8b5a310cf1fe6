#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "odadjust/kkt.hpp"
#include "odadjust/projection.hpp"
#include "odadjust/tap.hpp"

namespace odadjust {

/// Constants of the inexact-restoration scheme. Defaults are the library's
/// choices; every field can be overridden from the input document or CLI.
struct IRConfig {
  double eta = 1.0;             // Cauchy step scale
  double M_bound = 1e6;         // |mu_trial| <= M_bound componentwise
  double theta_init = 0.9;      // theta_{-1}
  double delta_min = 0.1;
  double delta0 = 1.0;
  double tau1 = 1e-4;
  double tau2 = 1e-4;
  double eps1 = 1e-5;           // ||z - s||_inf stopping tolerance
  double eps2 = 1e-5;           // ||r_tan||_inf stopping tolerance
  double omega_scale = 0.1;     // omega^k = omega_scale * omega_decay^k
  double omega_decay = 0.5;
  double shrink = 0.5;
  double tap_tol = 1e-8;
  int tap_max_iter = 20000;
  TapMethod tap_method = TapMethod::PathEquilibration;
  int max_outer = 200;
  int max_inner = 60;           // trust-region reductions per outer iteration
  double inner_gtol = 1e-3;
  int inner_point_cap = 100;
  int inner_iter_cap = 10;

  double omega(int k) const;
  /// Throws InvalidConfig naming the first violated constraint.
  void validate() const;
};

struct IterationRecord {
  int k = 0;
  int i = 0;
  double normC_s = 0.0;
  double normC_z = 0.0;
  double L_s = 0.0;
  double L_v = 0.0;
  double theta = 0.0;
  double delta = 0.0;
  double Pred = 0.0;
  double Ared = 0.0;
  bool accepted = false;
  double F_value = 0.0;
  double rtan_norm = 0.0;
};

enum class DapStatus { Converged, MaxOuter, Stalled };
std::string_view to_string(DapStatus status) noexcept;

struct DapResult {
  Vector d_final;
  Vector X_final;
  double F_final = 0.0;
  DapStatus status = DapStatus::MaxOuter;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double final_rtan_norm = 0.0;  // ||r_tan||_inf at the last restored point (NaN if none computed)
  std::vector<IterationRecord> history;
  std::vector<double> theta_history;  // theta_{-1}, theta_0, theta_1, ...
};

using IterationSink = std::function<void(const IterationRecord&)>;

/// theta_{k,-1} = min{1, min{1, theta_history...} + omega_k}, with
/// theta_history = (theta_{-1}, theta_0, ..., theta_{k-1}).
double init_penalty(const std::vector<double>& theta_history, double omega_k);

/// Replaces the flow and multiplier blocks of s with an exact lower-level KKT
/// point at the demand of s.
StatePoint restore(const DapProblem& p, const StatePoint& s, const IRConfig& cfg);

/// Tangent set at z: J = C'(z), lower bound 0 on d, X, beta; alpha free.
TangentSpace make_tangent_space(const DapProblem& p, const StatePoint& z);

/// r_tan = P[z - eta grad_s L(z, mu)] - z over the tangent set (no box).
Vector cauchy_direction(const DapProblem& p, const StatePoint& z, const Vector& mu,
                        const IRConfig& cfg, const TangentSpace& T);

/// ||z - s||_inf < eps1 and ||r_tan||_inf < eps2.
bool check_stop(const StatePoint& s, const StatePoint& z, const Vector& r_tan, double eps1, double eps2);

/// Scalar function on the flattened state with the two gradients the
/// tangent descent needs: L drives acceptance, F drives the search direction.
struct TangentObjective {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Vector(const Vector&)> direction_gradient;
};

struct Candidate {
  Vector v;                // flattened state
  double L_v = 0.0;        // L(v, mu)
  double L_bound = 0.0;    // right-hand side of the descent test
  double t_break = 0.0;
  int points_tested = 0;
  bool used_fallback = false;
};

/// Projected-gradient descent in T intersected with the box of radius delta
/// around T.point. Each iterate r_v = P(v - direction_gradient(v)) - v is
/// followed by an Armijo backtracking on `value`; the first iterate passing
/// the descent test is returned, else z + t_break r_tan.
Candidate tangent_descent(const TangentSpace& T, const Vector& r_tan, double delta, const IRConfig& cfg,
                          const TangentObjective& objective);

/// Trial point in the tangent set within the trust region that satisfies
/// L(v, mu) <= max{L(z + t r_tan, mu), L(z, mu) - tau1 delta, L(z, mu) - tau2}
/// with t = min{1, delta / ||r_tan||_inf}.
Candidate find_candidate(const DapProblem& p, const StatePoint& z, const Vector& mu,
                         const Vector& r_tan, double delta, const IRConfig& cfg, const TangentSpace& T);

/// Least-squares multiplier estimate min ||grad F(v) + C'(v)^T mu||, clipped
/// to [-M_bound, M_bound].
Vector trial_multipliers(const DapProblem& p, const StatePoint& v, double M_bound);

struct ThetaChoice {
  double theta = 0.0;
  double Pred = 0.0;
};

/// Largest theta in [0, theta_prev] with Pred(theta) = theta a + (1 - theta) b
/// >= b / 2, where a is the optimality and b the feasibility reduction.
/// Throws InfeasibleTheta if no such theta exists.
ThetaChoice choose_theta(double a, double b, double theta_prev);

enum class StepDecision { Accept, Shrink };

/// Accept iff Ared >= 0.1 Pred.
StepDecision accept_step(double Ared, double Pred);

/// Runs the scheme from (s0, mu0). Records go to `sink` as they are produced.
DapResult solve_dap(const DapProblem& p, const IRConfig& cfg, const StatePoint& s0, const Vector& mu0,
                    const IterationSink& sink = {});

}  // namespace odadjust
