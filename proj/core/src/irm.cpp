#include "odadjust/irm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "odadjust/errors.hpp"

namespace odadjust {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArmijo = 1e-4;
constexpr double kStallRatio = 1e-12;

double inf_norm(const Vector& x) { return x.size() == 0 ? 0.0 : x.lpNorm<Eigen::Infinity>(); }

bool negligible(const Vector& r, const Vector& z) { return inf_norm(r) <= 1e-14 * (1.0 + inf_norm(z)); }

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, what);
}

}  // namespace

double IRConfig::omega(int k) const { return omega_scale * std::pow(omega_decay, k); }

void IRConfig::validate() const {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  require(positive(eta), "eta must be positive");
  require(positive(M_bound), "M_bound must be positive");
  require(theta_init > 0.0 && theta_init < 1.0, "theta_init must lie in (0, 1)");
  require(positive(delta_min), "delta_min must be positive");
  require(positive(delta0), "delta0 must be positive");
  require(positive(tau1) && positive(tau2), "tau1 and tau2 must be positive");
  require(positive(eps1) && positive(eps2), "eps1 and eps2 must be positive");
  require(positive(omega_scale), "omega_scale must be positive");
  require(omega_decay > 0.0 && omega_decay < 1.0, "omega_decay must lie in (0, 1)");
  require(shrink >= 0.1 && shrink <= 0.9, "shrink must lie in [0.1, 0.9]");
  require(positive(tap_tol), "tap_tol must be positive");
  require(tap_max_iter > 0, "tap_max_iter must be positive");
  require(max_outer >= 0, "max_outer must be nonnegative");
  require(max_inner > 0, "max_inner must be positive");
  require(positive(inner_gtol), "inner_gtol must be positive");
  require(inner_point_cap > 0 && inner_iter_cap > 0, "inner caps must be positive");
}

std::string_view to_string(DapStatus status) noexcept {
  switch (status) {
    case DapStatus::Converged: return "converged";
    case DapStatus::MaxOuter: return "max_outer";
    case DapStatus::Stalled: return "stalled";
  }
  return "unknown";
}

double init_penalty(const std::vector<double>& theta_history, double omega_k) {
  double smallest = 1.0;
  for (double t : theta_history) smallest = std::min(smallest, t);
  return std::min(1.0, smallest + omega_k);
}

StatePoint restore(const DapProblem& p, const StatePoint& s, const IRConfig& cfg) {
  const Network& net = p.network();
  TapOptions opts;
  opts.tol = cfg.tap_tol;
  opts.max_iter = cfg.tap_max_iter;
  opts.method = cfg.tap_method;
  const TapSolution eq = solve_tap(net, s.d, opts);
  if (!eq.converged) {
    throw Error(ErrorCode::MaxIterations,
                "equilibrium not reached within " + std::to_string(opts.max_iter) + " iterations (rgap " +
                    std::to_string(eq.rgap) + ")");
  }
  const Multipliers m = recover_multipliers(p, s.d, eq.X, net.link_times(eq.v));
  StatePoint z;
  z.d = s.d;
  z.X = eq.X;
  z.alpha = m.alpha;
  z.beta = m.beta;
  return z;
}

TangentSpace make_tangent_space(const DapProblem& p, const StatePoint& z) {
  const StateLayout& L = p.layout();
  TangentSpace T;
  T.point = z.flatten();
  T.jacobian = eval_C_jacobian(p, z);
  T.lower = Vector::Zero(L.state_size());
  T.lower.segment(L.alpha_offset(), L.alpha_size()).setConstant(-kInf);
  return T;
}

Vector cauchy_direction(const DapProblem& p, const StatePoint& z, const Vector& mu, const IRConfig& cfg,
                        const TangentSpace& T) {
  const Vector zf = z.flatten();
  const Vector grad = eval_L_grad(p, z, mu);
  return project(T, zf - cfg.eta * grad) - zf;
}

bool check_stop(const StatePoint& s, const StatePoint& z, const Vector& r_tan, double eps1, double eps2) {
  return inf_norm(z.flatten() - s.flatten()) < eps1 && inf_norm(r_tan) < eps2;
}

Candidate tangent_descent(const TangentSpace& T, const Vector& r_tan, double delta, const IRConfig& cfg,
                          const TangentObjective& objective) {
  const Vector& z = T.point;
  Candidate out;
  const double L_z = objective.value(z);
  if (negligible(r_tan, z)) {
    out.v = z;
    out.L_v = L_z;
    out.L_bound = L_z;
    return out;
  }

  out.t_break = std::min(1.0, delta / inf_norm(r_tan));
  const Vector fallback = z + out.t_break * r_tan;
  const double L_fallback = objective.value(fallback);
  out.L_bound = std::max({L_fallback, L_z - cfg.tau1 * delta, L_z - cfg.tau2});

  const TangentSpace box = T.with_box(delta);
  Vector v = z;
  double L_v = L_z;
  int points = 0;
  for (int it = 0; it < cfg.inner_iter_cap && points < cfg.inner_point_cap; ++it) {
    Vector r_v;
    try {
      r_v = project(box, v - objective.direction_gradient(v)) - v;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SolverStalled) throw;
      break;
    }
    if (inf_norm(r_v) < cfg.inner_gtol) break;
    const double slope = r_v.dot(objective.gradient(v));
    if (!(slope < 0.0)) break;  // not a descent direction for L

    bool moved = false;
    double step = 1.0;
    while (points < cfg.inner_point_cap) {
      const Vector trial = v + step * r_v;
      const double L_trial = objective.value(trial);
      ++points;
      if (L_trial <= L_v + kArmijo * step * slope) {
        v = trial;
        L_v = L_trial;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    if (L_v <= out.L_bound) {
      out.v = v;
      out.L_v = L_v;
      out.points_tested = points;
      return out;
    }
  }

  out.v = fallback;
  out.L_v = L_fallback;
  out.points_tested = points;
  out.used_fallback = true;
  return out;
}

Candidate find_candidate(const DapProblem& p, const StatePoint& z, const Vector& mu, const Vector& r_tan,
                         double delta, const IRConfig& cfg, const TangentSpace& T) {
  const StateLayout& layout = p.layout();
  TangentObjective obj;
  obj.value = [&](const Vector& x) { return eval_L(p, StatePoint::unflatten(layout, x), mu); };
  obj.gradient = [&](const Vector& x) { return eval_L_grad(p, StatePoint::unflatten(layout, x), mu); };
  obj.direction_gradient = [&](const Vector& x) { return eval_F_grad_full(p, StatePoint::unflatten(layout, x)); };
  TangentSpace at_z = T;
  at_z.point = z.flatten();
  return tangent_descent(at_z, r_tan, delta, cfg, obj);
}

Vector trial_multipliers(const DapProblem& p, const StatePoint& v, double M_bound) {
  const Eigen::MatrixXd Jt = Eigen::MatrixXd(eval_C_jacobian(p, v)).transpose();
  const Vector mu = min_norm_solve(Jt, -eval_F_grad_full(p, v));
  return mu.cwiseMax(-M_bound).cwiseMin(M_bound);
}

ThetaChoice choose_theta(double a, double b, double theta_prev) {
  // theta (a - b) >= -b / 2
  double theta = theta_prev;
  if (a >= b) {
    if (b < 0.0) {
      const double need = a > b ? -b / (2.0 * (a - b)) : kInf;
      if (need > theta_prev) {
        throw Error(ErrorCode::InfeasibleTheta, "no penalty parameter satisfies the predicted-reduction test");
      }
    }
  } else {
    const double cap = b / (2.0 * (b - a));
    if (cap < 0.0) {
      throw Error(ErrorCode::InfeasibleTheta, "no penalty parameter satisfies the predicted-reduction test");
    }
    theta = std::min(theta_prev, cap);
  }
  return {theta, theta * a + (1.0 - theta) * b};
}

StepDecision accept_step(double Ared, double Pred) {
  return Ared >= 0.1 * Pred ? StepDecision::Accept : StepDecision::Shrink;
}

DapResult solve_dap(const DapProblem& p, const IRConfig& cfg, const StatePoint& s0, const Vector& mu0,
                    const IterationSink& sink) {
  cfg.validate();
  const StateLayout& layout = p.layout();
  if (s0.d.size() != layout.demand_size() || s0.X.size() != layout.flow_size() ||
      s0.alpha.size() != layout.alpha_size() || s0.beta.size() != layout.beta_size()) {
    throw Error(ErrorCode::DimensionMismatch, "initial state does not match the network");
  }
  if (mu0.size() != layout.constraint_size()) {
    throw Error(ErrorCode::DimensionMismatch, "initial multiplier does not match the network");
  }
  if ((s0.d.array() < 0.0).any()) throw Error(ErrorCode::MalformedInput, "initial demand must be nonnegative");

  DapResult result;
  result.final_rtan_norm = std::numeric_limits<double>::quiet_NaN();
  result.theta_history.push_back(cfg.theta_init);
  StatePoint s = s0;
  Vector mu = mu0;
  double delta_prev = cfg.delta0;
  StatePoint z;
  bool have_z = false;
  int k = 0;

  for (;; ++k) {
    if (k >= cfg.max_outer) {
      result.status = DapStatus::MaxOuter;
      break;
    }
    const double theta_start = init_penalty(result.theta_history, cfg.omega(k));

    z = restore(p, s, cfg);
    have_z = true;
    const TangentSpace T = make_tangent_space(p, z);
    const Vector r_tan = cauchy_direction(p, z, mu, cfg, T);
    result.final_rtan_norm = inf_norm(r_tan);
    if (check_stop(s, z, r_tan, cfg.eps1, cfg.eps2)) {
      result.status = DapStatus::Converged;
      break;
    }

    const double normC_s = eval_C(p, s).norm();
    const double normC_z = eval_C(p, z).norm();
    const double L_s = eval_L(p, s, mu);
    const Vector C_z = eval_C(p, z).flatten();
    const double b = normC_s - normC_z;
    const bool flat = negligible(r_tan, z.flatten());
    const double rtan_norm = inf_norm(r_tan);

    double delta = k == 0 ? std::max(cfg.delta_min, cfg.delta0) : std::max(cfg.delta_min, delta_prev);
    double theta_prev = theta_start;
    bool accepted = false;

    for (int i = 0;; ++i) {
      if (i >= cfg.max_inner || delta < kStallRatio * cfg.delta0) break;
      ++result.inner_iterations;

      StatePoint v;
      Vector mu_trial;
      if (flat) {
        v = z;
        mu_trial = mu;
      } else {
        const Candidate cand = find_candidate(p, z, mu, r_tan, delta, cfg, T);
        v = StatePoint::unflatten(layout, cand.v);
        mu_trial = trial_multipliers(p, v, cfg.M_bound);
      }

      IterationRecord rec;
      rec.k = k;
      rec.i = i;
      rec.normC_s = normC_s;
      rec.normC_z = normC_z;
      rec.L_s = L_s;
      rec.L_v = eval_L(p, v, mu);
      rec.delta = delta;
      rec.F_value = eval_F(p, v.d, v.X);
      rec.rtan_norm = rtan_norm;

      const double a = L_s - rec.L_v - C_z.dot(mu_trial - mu);
      bool ok = true;
      try {
        const ThetaChoice choice = choose_theta(a, b, theta_prev);
        rec.theta = choice.theta;
        rec.Pred = choice.Pred;
        rec.Ared = choice.theta * (L_s - eval_L(p, v, mu_trial)) + (1.0 - choice.theta) * (normC_s - eval_C(p, v).norm());
        ok = accept_step(rec.Ared, rec.Pred) == StepDecision::Accept;
        theta_prev = choice.theta;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::InfeasibleTheta) throw;
        rec.theta = theta_prev;
        rec.Pred = std::numeric_limits<double>::quiet_NaN();
        rec.Ared = std::numeric_limits<double>::quiet_NaN();
        ok = false;
      }
      rec.accepted = ok;
      result.history.push_back(rec);
      if (sink) sink(rec);

      if (ok) {
        s = v;
        mu = mu_trial;
        result.theta_history.push_back(rec.theta);
        delta_prev = delta;
        accepted = true;
        break;
      }
      delta *= cfg.shrink;
    }
    if (!accepted) {
      result.status = DapStatus::Stalled;
      break;
    }
  }

  if (!have_z) z = restore(p, s, cfg);
  result.outer_iterations = k;
  result.d_final = z.d;
  result.X_final = z.X;
  result.F_final = eval_F(p, z.d, z.X);
  return result;
}

}  // namespace odadjust
