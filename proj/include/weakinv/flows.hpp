#pragma once

#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <utility>
#include <vector>

#include "invariance.hpp"

namespace weakinv {

enum class Scheme { RK4Ambient, LieEulerExp, RKMK4 };
enum class Projection { None, ConstraintProjection };

struct IntegratorConfig
{
  Scheme scheme{Scheme::RK4Ambient};
  double step{1e-3};
  Projection projection{Projection::ConstraintProjection};
  double blowup{1e12};
};

/// One row per step: time and ambient coordinates.
using Trajectory = std::vector<std::pair<double, Eigen::VectorXd>>;

namespace detail {

/// Uniform grid with h = t / n and n = ceil(|t| / step).
inline std::pair<int, double> grid(double t, double step)
{
  if (!(step > 0.0)) { throw ConfigurationError("integrator step must be > 0"); }
  if (t == 0.0) { return {0, 0.0}; }
  int n = static_cast<int>(std::ceil(std::abs(t) / step - 1e-9));
  n     = std::max(n, 1);
  return {n, t / n};
}

inline void check_blowup(const Eigen::VectorXd & x, double bound, double time)
{
  double nrm = x.norm();
  if (!(nrm < bound)) { throw DivergenceError("integration diverged at t = " + std::to_string(time), time); }
}

inline void check_blowup(const Eigen::MatrixXd & x, double bound, double time)
{
  double nrm = x.norm();
  if (!(nrm < bound)) { throw DivergenceError("integration diverged at t = " + std::to_string(time), time); }
}

}  // namespace detail

/// Classical RK4 step for x' = f(t, x).
template<typename F>
Eigen::VectorXd rk4_step(const F & f, double t, const Eigen::VectorXd & x, double h)
{
  Eigen::VectorXd k1 = f(t, x);
  Eigen::VectorXd k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
  Eigen::VectorXd k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
  Eigen::VectorXd k4 = f(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// dexp^{-1}_{-u}(b) truncated after the double commutator (enough for order 4).
inline Eigen::MatrixXd dexpinv_left(const Eigen::MatrixXd & u, const Eigen::MatrixXd & b)
{
  Eigen::MatrixXd ub = bracket(u, b);
  return b + 0.5 * ub + (1.0 / 12.0) * bracket(u, ub);
}

/**
 * @brief One Runge-Kutta-Munthe-Kaas step for g' = g xi(t, g).
 *
 * `xi` returns the left-trivialized velocity as an algebra matrix. The step is
 * g exp(Omega) with Omega from the RK4 tableau applied to the pulled-back
 * equation Omega' = dexp^{-1}_{-Omega}(xi(t, g exp(Omega))).
 */
template<typename Xi>
Eigen::MatrixXd rkmk4_step(const LieGroup & G, const Xi & xi, double t, const Eigen::MatrixXd & g, double h)
{
  auto expm = [&](const Eigen::MatrixXd & u) { return G.exp(G.vee(u)); };
  Eigen::MatrixXd k1 = h * xi(t, g);
  Eigen::MatrixXd u2 = 0.5 * k1;
  Eigen::MatrixXd k2 = h * dexpinv_left(u2, xi(t + 0.5 * h, g * expm(u2)));
  Eigen::MatrixXd u3 = 0.5 * k2;
  Eigen::MatrixXd k3 = h * dexpinv_left(u3, xi(t + 0.5 * h, g * expm(u3)));
  Eigen::MatrixXd u4 = k3;
  Eigen::MatrixXd k4 = h * dexpinv_left(u4, xi(t + h, g * expm(u4)));
  Eigen::MatrixXd omega = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
  return g * expm(omega);
}

template<typename Xi>
Eigen::MatrixXd lie_euler_step(const LieGroup & G, const Xi & xi, double t, const Eigen::MatrixXd & g, double h)
{
  return g * G.exp(G.vee(h * xi(t, g)));
}

/// Left-trivialized velocity of W at g, snapped onto the algebra.
inline Eigen::MatrixXd trivialized_velocity(const VectorFieldG & W, const Eigen::MatrixXd & g)
{
  const auto & G = *W.group();
  GroupElement ge(W.group(), g, false);
  return G.hat(G.vee(G.inverse(g) * W.matrix_at(ge)));
}

/// Integrate a field on G. Records every step into `traj` when given.
inline GroupElement integrate(const VectorFieldG & W, const IntegratorConfig & config, double t, const GroupElement & g0,
                              Trajectory * traj = nullptr)
{
  require_same_group(W.group(), g0.group(), "integrate");
  const auto & G = *W.group();
  auto [n, h]    = detail::grid(t, config.step);
  Eigen::MatrixXd g = g0.matrix();
  if (traj) { traj->emplace_back(0.0, flatten(g)); }
  auto xi = [&W](double, const Eigen::MatrixXd & x) { return trivialized_velocity(W, x); };
  auto f  = [&W](double, const Eigen::VectorXd & x) {
    auto k = W.group()->matrix_dim();
    return flatten(W.matrix_at(GroupElement(W.group(), unflatten(x, k), false)));
  };
  for (int i = 0; i < n; ++i) {
    double ti = i * h;
    switch (config.scheme) {
      case Scheme::RKMK4: g = rkmk4_step(G, xi, ti, g, h); break;
      case Scheme::LieEulerExp: g = lie_euler_step(G, xi, ti, g, h); break;
      case Scheme::RK4Ambient: {
        g = unflatten(rk4_step(f, ti, flatten(g), h), G.matrix_dim());
        if (config.projection == Projection::ConstraintProjection) { g = G.project(g); }
        break;
      }
    }
    detail::check_blowup(g, config.blowup, ti + h);
    if (traj) { traj->emplace_back(ti + h, flatten(g)); }
  }
  return {W.group(), g, false};
}

/// Integrate a field on M. Group-valued lifted fields use the Lie schemes when requested.
inline Eigen::VectorXd integrate(const VectorFieldM & V, const IntegratorConfig & config, double t, const Eigen::VectorXd & p0,
                                 Trajectory * traj = nullptr)
{
  const auto & M = *V.manifold();
  M.check_dim(p0);
  if (config.scheme != Scheme::RK4Ambient) {
    if (!V.group_lift()) { throw ConfigurationError("Lie-group integrators need a field on a group manifold"); }
    const auto & W = *V.group_lift();
    auto g = integrate(W, config, t, GroupElement(W.group(), unflatten(p0, W.group()->matrix_dim()), false), traj);
    return flatten(g.matrix());
  }
  auto [n, h] = detail::grid(t, config.step);
  Eigen::VectorXd x = p0;
  if (traj) { traj->emplace_back(0.0, x); }
  auto f = [&V](double, const Eigen::VectorXd & y) { return V.at(y); };
  for (int i = 0; i < n; ++i) {
    double ti = i * h;
    x         = rk4_step(f, ti, x, h);
    if (config.projection == Projection::ConstraintProjection) { x = M.project(x); }
    detail::check_blowup(x, config.blowup, ti + h);
    if (traj) { traj->emplace_back(ti + h, x); }
  }
  return x;
}

inline ManifoldPoint integrate(const VectorFieldM & V, const IntegratorConfig & config, double t, const ManifoldPoint & p0)
{
  require_same_manifold(V.manifold(), p0.manifold, "integrate");
  return {V.manifold(), integrate(V, config, t, p0.coords)};
}

/// Numerical flow of a field on M.
class ManifoldFlow
{
public:
  ManifoldFlow(VectorFieldM field, IntegratorConfig config) : field_(std::move(field)), config_(config) {}

  [[nodiscard]] Eigen::VectorXd operator()(double t, const Eigen::VectorXd & p) const { return integrate(field_, config_, t, p); }
  [[nodiscard]] ManifoldPoint evaluate(double t, const ManifoldPoint & p) const { return integrate(field_, config_, t, p); }
  [[nodiscard]] Trajectory trajectory(double t, const Eigen::VectorXd & p) const
  {
    Trajectory out;
    integrate(field_, config_, t, p, &out);
    return out;
  }

  [[nodiscard]] const VectorFieldM & field() const noexcept { return field_; }
  [[nodiscard]] const IntegratorConfig & config() const noexcept { return config_; }

private:
  VectorFieldM field_;
  IntegratorConfig config_;
};

/// Numerical flow of a field on G.
class GroupFlow
{
public:
  GroupFlow(VectorFieldG field, IntegratorConfig config) : field_(std::move(field)), config_(config) {}

  [[nodiscard]] GroupElement operator()(double t, const GroupElement & g) const { return integrate(field_, config_, t, g); }
  [[nodiscard]] GroupElement evaluate(double t, const GroupElement & g) const { return integrate(field_, config_, t, g); }

  [[nodiscard]] const VectorFieldG & field() const noexcept { return field_; }
  [[nodiscard]] const IntegratorConfig & config() const noexcept { return config_; }

private:
  VectorFieldG field_;
  IntegratorConfig config_;
};

/// phi_t as a diffeomorphism; the differential is a central difference of the forward map.
inline Diffeomorphism flow_diffeomorphism(const ManifoldFlow & flow, double t)
{
  return {flow.field().manifold(), [flow, t](const Eigen::VectorXd & p) { return flow(t, p); },
          [flow, t](const Eigen::VectorXd & p) { return flow(-t, p); },
          [flow, t](const Eigen::VectorXd & p, const Eigen::VectorXd & v) -> Eigen::VectorXd {
            const double h = 1e-6;
            return (flow(t, p + h * v) - flow(t, p - h * v)) / (2.0 * h);
          }};
}

// ---------------------------------------------------------------------------
// flow-level checks

/// (g, q) pairs for flow checks: plan.point_samples of each, zipped.
inline std::vector<std::pair<GroupElement, Eigen::VectorXd>> flow_samples(const GroupAction & action, const SamplingPlan & plan,
                                                                          std::string_view stream)
{
  auto gs = sample_group(action.group(), plan, plan.point_samples, std::string(stream) + "/g");
  auto qs = action.manifold()->sample(plan, plan.point_samples, std::string(stream) + "/q");
  std::vector<std::pair<GroupElement, Eigen::VectorXd>> out;
  for (std::size_t i = 0; i < gs.size(); ++i) { out.emplace_back(gs[i], qs[i]); }
  return out;
}

/// max ||Phi(phi^W_t(g), phi^V_t(q)) - phi^V_t(Phi(g, q))|| over sampled (t, g, q).
inline ResidualStats check_flow_weak_invariance(const ManifoldFlow & Vflow, const GroupFlow & Wflow, const GroupAction & action,
                                                const std::vector<double> & times, const SamplingPlan & plan)
{
  require_same_group(Wflow.field().group(), action.group(), "check_flow_weak_invariance");
  require_same_manifold(Vflow.field().manifold(), action.manifold(), "check_flow_weak_invariance");
  ResidualStats out;
  for (const auto & [g, q] : flow_samples(action, plan, "flow_invariance")) {
    for (double t : times) {
      Eigen::VectorXd lhs = action.apply(Wflow(t, g).matrix(), Vflow(t, q));
      Eigen::VectorXd rhs = Vflow(t, action.apply(g.matrix(), q));
      out.add((lhs - rhs).norm());
    }
  }
  return out;
}

struct FlowDerivativePair
{
  Eigen::VectorXd lhs;  ///< d/dt Phi(phi^W_t(g), phi^V_t(q)) at t = 0
  Eigen::VectorXd rhs;  ///< d/dt phi^V_t(Phi(g, q)) at t = 0
};

/// Central differences of both sides of the flow relation at t = 0.
inline FlowDerivativePair differentiate_flow_at_zero(const ManifoldFlow & Vflow, const GroupFlow & Wflow,
                                                     const GroupAction & action, const GroupElement & g,
                                                     const Eigen::VectorXd & q, double h = 1e-5)
{
  auto lhs = [&](double t) { return action.apply(Wflow(t, g).matrix(), Vflow(t, q)); };
  Eigen::VectorXd gq = action.apply(g.matrix(), q);
  auto rhs = [&](double t) { return Vflow(t, gq); };
  return {(lhs(h) - lhs(-h)) / (2.0 * h), (rhs(h) - rhs(-h)) / (2.0 * h)};
}

/// max ||lhs - rhs|| of differentiate_flow_at_zero over sampled (g, q).
inline ResidualStats check_vector_field_relation(const ManifoldFlow & Vflow, const GroupFlow & Wflow, const GroupAction & action,
                                                 const SamplingPlan & plan)
{
  ResidualStats out;
  for (const auto & [g, q] : flow_samples(action, plan, "flow_derivative")) {
    auto d = differentiate_flow_at_zero(Vflow, Wflow, action, g, q);
    out.add((d.lhs - d.rhs).norm());
  }
  return out;
}

struct SmallTimeCheck
{
  ResidualStats residual;
  bool recovered{true};
  std::string failure;
};

/**
 * @brief Weak invariance of phi_{n delta} with respect to (sigma_delta)^n.
 *
 * sigma_delta is recovered once per iterate from phi_delta; phi_{n delta} is
 * integrated directly, so the check exercises the flow group law as well.
 */
inline SmallTimeCheck check_small_time_extension(const ManifoldFlow & Vflow, const ActionPtr & action, double delta, int n_max,
                                                 const SamplingPlan & plan)
{
  SmallTimeCheck out;
  auto points = action->manifold()->sample(plan, plan.point_samples, "points");
  SigmaProblem sigma_delta(action, flow_diffeomorphism(Vflow, delta), points);
  auto checks = action->manifold()->sample(plan, plan.point_samples, "small_time/p");
  auto gs     = sample_group(action->group(), plan, plan.point_samples, "small_time/g");

  // phi_{-n delta}(p) for each check point, computed once per n
  std::vector<std::vector<Eigen::VectorXd>> back(static_cast<std::size_t>(n_max) + 1);
  for (int n = 1; n <= n_max; ++n) {
    for (const auto & p : checks) { back[static_cast<std::size_t>(n)].push_back(Vflow(-n * delta, p)); }
  }
  for (const auto & g : gs) {
    GroupElement sn = g;
    for (int n = 1; n <= n_max; ++n) {
      try {
        sn = sigma_delta.recover(sn).sigma;
      } catch (const RecoveryFailed & e) {
        out.recovered = false;
        out.failure   = e.what();
        out.residual.add(std::numeric_limits<double>::infinity());
        break;
      }
      for (std::size_t j = 0; j < checks.size(); ++j) {
        Eigen::VectorXd lhs = Vflow(n * delta, action->apply(g.matrix(), back[static_cast<std::size_t>(n)][j]));
        Eigen::VectorXd rhs = action->apply(sn.matrix(), checks[j]);
        out.residual.add((lhs - rhs).norm());
      }
    }
  }
  return out;
}

struct SigmaFlowCheck
{
  ResidualStats composition;  ///< ||sigma_t1(sigma_t2(g)) - sigma_{t1+t2}(g)||_F
  ResidualStats identity;     ///< ||sigma_0(g) - g||_F
};

/// sigma_t recovered independently at each t (a fresh problem per call).
inline std::function<GroupMap(double)> sigma_family(const ManifoldFlow & Vflow, const ActionPtr & action,
                                                    std::vector<Eigen::VectorXd> points)
{
  return [Vflow, action, points = std::move(points)](double t) {
    return recovered_sigma(flow_diffeomorphism(Vflow, t), action, points);
  };
}

inline SigmaFlowCheck check_sigma_is_flow(const std::function<GroupMap(double)> & sigma_at,
                                          const std::vector<std::pair<double, double>> & time_pairs, const GroupPtr & group,
                                          const SamplingPlan & plan)
{
  SigmaFlowCheck out;
  auto gs     = sample_group(group, plan, plan.point_samples, "sigma_flow");
  auto sigma0 = sigma_at(0.0);
  for (const auto & g : gs) { out.identity.add((sigma0(g).matrix() - g.matrix()).norm()); }
  for (const auto & [t1, t2] : time_pairs) {
    auto s1  = sigma_at(t1);
    auto s2  = sigma_at(t2);
    auto s12 = sigma_at(t1 + t2);
    for (const auto & g : gs) {
      try {
        out.composition.add((s1(s2(g)).matrix() - s12(g).matrix()).norm());
      } catch (const RecoveryFailed &) {
        out.composition.add(std::numeric_limits<double>::infinity());
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// export

/// CSV with header `t,coord_0,...,coord_{N-1}`; 17 significant digits.
inline void write_trajectory_csv(std::ostream & os, const Trajectory & traj)
{
  Eigen::Index n = traj.empty() ? 0 : traj.front().second.size();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) { os << ",coord_" << i; }
  os << "\n" << std::setprecision(17);
  for (const auto & [t, x] : traj) {
    os << t;
    for (Eigen::Index i = 0; i < x.size(); ++i) { os << "," << x(i); }
    os << "\n";
  }
}

}  // namespace weakinv
