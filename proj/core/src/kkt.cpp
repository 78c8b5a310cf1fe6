#include "odadjust/kkt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "odadjust/errors.hpp"
#include "odadjust/projection.hpp"
#include "odadjust/tap.hpp"

namespace odadjust {

namespace {

using Triplet = Eigen::Triplet<double>;

void expect_size(const Vector& x, Eigen::Index n, const char* what) {
  if (x.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has length " +
                                                  std::to_string(x.size()) + ", expected " +
                                                  std::to_string(n));
  }
}

void check_state(const StateLayout& layout, const StatePoint& s) {
  expect_size(s.d, layout.demand_size(), "demand block");
  expect_size(s.X, layout.flow_size(), "flow block");
  expect_size(s.alpha, layout.alpha_size(), "alpha block");
  expect_size(s.beta, layout.beta_size(), "beta block");
}

// Lawson-Hanson active set for min ||G u - h|| with u_j >= 0 for j in `bounded`.
Vector bounded_least_squares(const Eigen::MatrixXd& G, const Vector& h, const std::vector<bool>& bounded) {
  const Eigen::Index n = G.cols();
  std::vector<bool> passive(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) passive[static_cast<std::size_t>(j)] = !bounded[static_cast<std::size_t>(j)];

  auto solve_passive = [&]() {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    }
    Eigen::MatrixXd Gp(G.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) Gp.col(static_cast<Eigen::Index>(k)) = G.col(cols[k]);
    const Vector zp = min_norm_solve(Gp, h);
    Vector z = Vector::Zero(n);
    for (std::size_t k = 0; k < cols.size(); ++k) z[cols[k]] = zp[static_cast<Eigen::Index>(k)];
    return z;
  };

  Vector u = solve_passive();
  const double tol = 1e-12 * std::max(1.0, G.cwiseAbs().maxCoeff() * std::max(1.0, h.cwiseAbs().maxCoeff()));
  const int max_outer = static_cast<int>(3 * n + 10);
  for (int outer = 0; outer < max_outer; ++outer) {
    const Vector w = G.transpose() * (h - G * u);
    Eigen::Index enter = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w[j] > best) {
        best = w[j];
        enter = j;
      }
    }
    if (enter < 0) break;
    passive[static_cast<std::size_t>(enter)] = true;

    for (int inner = 0; inner < max_outer; ++inner) {
      const Vector z = solve_passive();
      double step = 1.0;
      bool blocked = false;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (bounded[static_cast<std::size_t>(j)] && passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) {
          const double denom = u[j] - z[j];
          if (denom > 0.0) {
            step = std::min(step, u[j] / denom);
            blocked = true;
          }
        }
      }
      if (!blocked) {
        u = z;
        break;
      }
      u += step * (z - u);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (bounded[static_cast<std::size_t>(j)] && passive[static_cast<std::size_t>(j)] && u[j] <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          u[j] = 0.0;
        }
      }
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (bounded[static_cast<std::size_t>(j)]) u[j] = std::max(u[j], 0.0);
  }
  return u;
}

}  // namespace

StatePoint StatePoint::zeros(const StateLayout& layout) {
  return StatePoint{Vector::Zero(layout.demand_size()), Vector::Zero(layout.flow_size()),
                    Vector::Zero(layout.alpha_size()), Vector::Zero(layout.beta_size())};
}

StatePoint StatePoint::unflatten(const StateLayout& layout, const Vector& s) {
  expect_size(s, layout.state_size(), "state vector");
  return StatePoint{s.segment(layout.demand_offset(), layout.demand_size()),
                    s.segment(layout.flow_offset(), layout.flow_size()),
                    s.segment(layout.alpha_offset(), layout.alpha_size()),
                    s.segment(layout.beta_offset(), layout.beta_size())};
}

Vector StatePoint::flatten() const {
  Vector s(d.size() + X.size() + alpha.size() + beta.size());
  s << d, X, alpha, beta;
  return s;
}

bool StatePoint::in_domain(double tol) const {
  auto ok = [tol](const Vector& x) { return x.size() == 0 || x.minCoeff() >= -tol; };
  return ok(d) && ok(X) && ok(beta);
}

Vector ConstraintResidual::flatten() const {
  Vector c(stationarity.size() + conservation.size() + complementarity.size());
  c << stationarity, conservation, complementarity;
  return c;
}

double ConstraintResidual::norm() const {
  return std::sqrt(stationarity.squaredNorm() + conservation.squaredNorm() + complementarity.squaredNorm());
}

double ConstraintResidual::norm_inf() const {
  double m = 0.0;
  for (const Vector* block : {&stationarity, &conservation, &complementarity}) {
    if (block->size() > 0) m = std::max(m, block->cwiseAbs().maxCoeff());
  }
  return m;
}

DapProblem::DapProblem(Network net)
    : net_(std::move(net)),
      structure_(build_structure(net_)),
      layout_(StateLayout::of(net_)),
      target_(net_.target_demand()) {}

ObjectiveParts eval_F_parts(const DapProblem& p, const Vector& d, const Vector& X) {
  expect_size(d, p.layout().demand_size(), "demand block");
  const Vector v = aggregate_flows(p.structure(), X);
  ObjectiveParts parts;
  for (const auto& obs : p.network().observations()) {
    const double e = v[static_cast<Eigen::Index>(obs.link)] - obs.flow;
    parts.f1 += e * e;
  }
  parts.f2 = (d - p.target_demand()).squaredNorm();
  parts.total = p.network().eta1() * parts.f1 + p.network().eta2() * parts.f2;
  return parts;
}

double eval_F(const DapProblem& p, const Vector& d, const Vector& X) {
  return eval_F_parts(p, d, X).total;
}

ObjectiveGradient eval_F_grad(const DapProblem& p, const Vector& d, const Vector& X) {
  expect_size(d, p.layout().demand_size(), "demand block");
  const Vector v = aggregate_flows(p.structure(), X);
  Vector residual = Vector::Zero(v.size());
  for (const auto& obs : p.network().observations()) {
    const auto a = static_cast<Eigen::Index>(obs.link);
    residual[a] = v[a] - obs.flow;
  }
  ObjectiveGradient g;
  g.d = 2.0 * p.network().eta2() * (d - p.target_demand());
  g.X = 2.0 * p.network().eta1() * (p.structure().R.transpose() * residual);
  return g;
}

Vector eval_F_grad_full(const DapProblem& p, const StatePoint& s) {
  check_state(p.layout(), s);
  const auto g = eval_F_grad(p, s.d, s.X);
  StatePoint out{g.d, g.X, Vector::Zero(s.alpha.size()), Vector::Zero(s.beta.size())};
  return out.flatten();
}

Vector lifted_link_times(const DapProblem& p, const Vector& X) {
  const Vector v = aggregate_flows(p.structure(), X);
  return p.structure().R.transpose() * p.network().link_times(v);
}

ConstraintResidual eval_C(const DapProblem& p, const StatePoint& s) {
  check_state(p.layout(), s);
  const auto& S = p.structure();
  ConstraintResidual c;
  c.stationarity = lifted_link_times(p, s.X) + S.M.transpose() * s.alpha - s.beta;
  c.conservation = S.Gamma * s.d - S.M * s.X;
  c.complementarity = s.beta.cwiseProduct(s.X);
  return c;
}

SparseMatrix eval_C_jacobian(const DapProblem& p, const StatePoint& s) {
  const auto& layout = p.layout();
  check_state(layout, s);
  const auto& S = p.structure();
  const auto n_links = static_cast<Eigen::Index>(layout.links);
  const auto n_comm = static_cast<Eigen::Index>(layout.commodities);

  const Vector v = aggregate_flows(S, s.X);
  const Vector dt = p.network().link_time_derivatives(v);

  std::vector<Triplet> entries;
  const Eigen::Index r_stat = layout.stationarity_offset();
  const Eigen::Index r_cons = layout.conservation_offset();
  const Eigen::Index r_comp = layout.complementarity_offset();

  // Stationarity rows: [0, T'(X), M^T, -I] with T'(X) = R^T diag(t'(RX)) R.
  for (Eigen::Index i = 0; i < n_comm; ++i) {
    for (Eigen::Index j = 0; j < n_comm; ++j) {
      for (Eigen::Index a = 0; a < n_links; ++a) {
        if (dt[a] != 0.0) {
          entries.emplace_back(r_stat + i * n_links + a, layout.flow_offset() + j * n_links + a, dt[a]);
        }
      }
    }
  }
  for (Eigen::Index k = 0; k < S.M.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(S.M, k); it; ++it) {
      // M(row=node block, col=link block); its transpose feeds the alpha columns.
      entries.emplace_back(r_stat + it.col(), layout.alpha_offset() + it.row(), it.value());
      entries.emplace_back(r_cons + it.row(), layout.flow_offset() + it.col(), -it.value());
    }
  }
  for (Eigen::Index j = 0; j < layout.beta_size(); ++j) {
    entries.emplace_back(r_stat + j, layout.beta_offset() + j, -1.0);
  }

  // Conservation rows: [Gamma, -M, 0, 0].
  for (Eigen::Index k = 0; k < S.Gamma.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(S.Gamma, k); it; ++it) {
      entries.emplace_back(r_cons + it.row(), layout.demand_offset() + it.col(), it.value());
    }
  }

  // Complementarity rows: [0, diag(beta), 0, diag(X)].
  for (Eigen::Index j = 0; j < layout.flow_size(); ++j) {
    if (s.beta[j] != 0.0) entries.emplace_back(r_comp + j, layout.flow_offset() + j, s.beta[j]);
    if (s.X[j] != 0.0) entries.emplace_back(r_comp + j, layout.beta_offset() + j, s.X[j]);
  }

  SparseMatrix J(layout.constraint_size(), layout.state_size());
  J.setFromTriplets(entries.begin(), entries.end());
  J.makeCompressed();
  return J;
}

double eval_L(const DapProblem& p, const StatePoint& s, const Vector& mu) {
  expect_size(mu, p.layout().constraint_size(), "multiplier vector");
  return eval_F(p, s.d, s.X) + eval_C(p, s).flatten().dot(mu);
}

Vector eval_L_grad(const DapProblem& p, const StatePoint& s, const Vector& mu) {
  expect_size(mu, p.layout().constraint_size(), "multiplier vector");
  return eval_F_grad_full(p, s) + eval_C_jacobian(p, s).transpose() * mu;
}

Multipliers recover_multipliers(const DapProblem& p, const Vector& d, const Vector& X,
                                const Vector& link_times, MultiplierRecovery method) {
  const auto& layout = p.layout();
  const auto& net = p.network();
  const auto& S = p.structure();
  expect_size(d, layout.demand_size(), "demand block");
  expect_size(X, layout.flow_size(), "flow block");
  expect_size(link_times, static_cast<Eigen::Index>(layout.links), "link time vector");

  const Vector lifted = S.R.transpose() * link_times;
  const auto n_nodes = static_cast<Eigen::Index>(layout.nodes);

  if (method == MultiplierRecovery::BoundedLeastSquares) {
    const Eigen::Index na = layout.alpha_size();
    const Eigen::Index nb = layout.beta_size();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(2 * nb, na + nb);
    G.topLeftCorner(nb, na) = Eigen::MatrixXd(S.M.transpose());
    G.topRightCorner(nb, nb) = -Eigen::MatrixXd::Identity(nb, nb);
    G.bottomRightCorner(nb, nb) = X.asDiagonal();
    Vector h = Vector::Zero(2 * nb);
    h.head(nb) = -lifted;
    std::vector<bool> bounded(static_cast<std::size_t>(na + nb), false);
    std::fill(bounded.begin() + na, bounded.end(), true);
    const Vector u = bounded_least_squares(G, h, bounded);
    return Multipliers{u.head(na), u.tail(nb)};
  }

  Multipliers m{Vector::Zero(layout.alpha_size()), Vector::Zero(layout.beta_size())};
  for (std::size_t i = 0; i < layout.commodities; ++i) {
    const auto sp = shortest_paths(net, link_times, net.commodities()[i].origin);
    double max_finite = 0.0;
    for (double dist : sp.dist) {
      if (std::isfinite(dist)) max_finite = std::max(max_finite, dist);
    }
    for (Eigen::Index u = 0; u < n_nodes; ++u) {
      const double dist = sp.dist[static_cast<std::size_t>(u)];
      m.alpha[static_cast<Eigen::Index>(i) * n_nodes + u] = std::isfinite(dist) ? -dist : -(max_finite + 1.0);
    }
  }

  m.beta = lifted + S.M.transpose() * m.alpha;
  const double clip_tol = 1e-8 * std::max(1.0, lifted.size() > 0 ? lifted.cwiseAbs().maxCoeff() : 0.0);
  for (Eigen::Index j = 0; j < m.beta.size(); ++j) {
    if (m.beta[j] < 0.0) {
      if (m.beta[j] < -clip_tol) {
        throw Error(ErrorCode::ResidualTooLarge, "negative reduced cost " + std::to_string(m.beta[j]));
      }
      m.beta[j] = 0.0;
    }
  }
  const double slack = std::abs(m.beta.dot(X));
  const double allowed = 1e-6 * (1.0 + X.lpNorm<1>());
  if (slack > allowed) {
    throw Error(ErrorCode::ResidualTooLarge, "complementarity beta^T X = " + std::to_string(slack) +
                                                 " exceeds " + std::to_string(allowed) +
                                                 "; tighten the TAP tolerance");
  }
  return m;
}

}  // namespace odadjust
