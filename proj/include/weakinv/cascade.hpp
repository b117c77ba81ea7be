#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "flows.hpp"

namespace weakinv {

/**
 * @brief Global trivialization M = (M/G) x G for a free action with a global section.
 *
 * Quotient points are plain coordinate vectors of length quotient_dim (empty
 * for transitive actions). decompose returns (g, y) with p = Phi(g, s(y)).
 */
class BundleChart
{
public:
  using ProjectFn   = std::function<Eigen::VectorXd(const Eigen::VectorXd & p)>;
  using SectionFn   = std::function<Eigen::VectorXd(const Eigen::VectorXd & y)>;
  using DProjectFn  = std::function<Eigen::VectorXd(const Eigen::VectorXd & p, const Eigen::VectorXd & v)>;
  using DSectionFn  = std::function<Eigen::VectorXd(const Eigen::VectorXd & y, const Eigen::VectorXd & ydot)>;
  using DecomposeFn = std::function<std::pair<Eigen::MatrixXd, Eigen::VectorXd>(const Eigen::VectorXd & p)>;

  struct Maps
  {
    ProjectFn project;
    SectionFn section;
    DProjectFn d_project;
    DSectionFn d_section;
    DecomposeFn decompose;
  };

  BundleChart(std::string name, ActionPtr action, Eigen::Index quotient_dim, Maps maps)
      : name_(std::move(name)), action_(std::move(action)), quotient_dim_(quotient_dim), maps_(std::move(maps))
  {}

  [[nodiscard]] const std::string & name() const noexcept { return name_; }
  [[nodiscard]] const ActionPtr & action() const noexcept { return action_; }
  [[nodiscard]] Eigen::Index quotient_dim() const noexcept { return quotient_dim_; }

  [[nodiscard]] Eigen::VectorXd project(const Eigen::VectorXd & p) const { return maps_.project(p); }
  [[nodiscard]] Eigen::VectorXd section(const Eigen::VectorXd & y) const
  {
    check_quotient(y);
    return maps_.section(y);
  }
  [[nodiscard]] Eigen::VectorXd d_project(const Eigen::VectorXd & p, const Eigen::VectorXd & v) const
  {
    return maps_.d_project(p, v);
  }
  [[nodiscard]] Eigen::VectorXd d_section(const Eigen::VectorXd & y, const Eigen::VectorXd & ydot) const
  {
    check_quotient(y);
    return maps_.d_section(y, ydot);
  }
  [[nodiscard]] std::pair<GroupElement, Eigen::VectorXd> decompose(const Eigen::VectorXd & p) const
  {
    auto [g, y] = maps_.decompose(p);
    return {GroupElement(action_->group(), std::move(g)), std::move(y)};
  }

  void check_quotient(const Eigen::VectorXd & y) const
  {
    if (y.size() != quotient_dim_) {
      throw DescriptorMismatch(name_ + ": quotient point needs " + std::to_string(quotient_dim_) + " coordinates, got " +
                               std::to_string(y.size()));
    }
  }

private:
  std::string name_;
  ActionPtr action_;
  Eigen::Index quotient_dim_;
  Maps maps_;
};

using ChartPtr = std::shared_ptr<const BundleChart>;

/// R^k translating `axes` of R^N; the quotient keeps the remaining axes, s inserts zeros.
inline ChartPtr translation_chart(Eigen::Index n, std::vector<Eigen::Index> axes)
{
  auto action = translation_action(n, axes);
  std::vector<bool> moved(static_cast<std::size_t>(n), false);
  for (auto a : axes) { moved[static_cast<std::size_t>(a)] = true; }
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!moved[static_cast<std::size_t>(i)]) { kept.push_back(i); }
  }
  auto k = static_cast<Eigen::Index>(axes.size());
  auto q = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd keep = Eigen::MatrixXd::Zero(q, n);
  for (Eigen::Index i = 0; i < q; ++i) { keep(i, kept[static_cast<std::size_t>(i)]) = 1.0; }
  Eigen::MatrixXd move = Eigen::MatrixXd::Zero(k, n);
  for (Eigen::Index i = 0; i < k; ++i) { move(i, axes[static_cast<std::size_t>(i)]) = 1.0; }

  BundleChart::Maps maps{
    [keep](const Eigen::VectorXd & p) -> Eigen::VectorXd { return keep * p; },
    [keep](const Eigen::VectorXd & y) -> Eigen::VectorXd { return keep.transpose() * y; },
    [keep](const Eigen::VectorXd &, const Eigen::VectorXd & v) -> Eigen::VectorXd { return keep * v; },
    [keep](const Eigen::VectorXd &, const Eigen::VectorXd & yd) -> Eigen::VectorXd { return keep.transpose() * yd; },
    [keep, move, k](const Eigen::VectorXd & p) -> std::pair<Eigen::MatrixXd, Eigen::VectorXd> {
      Eigen::MatrixXd g       = Eigen::MatrixXd::Identity(k + 1, k + 1);
      g.col(k).head(k)        = move * p;
      return {g, keep * p};
    }};
  return std::make_shared<BundleChart>("translation", action, q, std::move(maps));
}

/// Left action of G on itself: quotient is a point, s = e, decompose(p) = (p, {}).
inline ChartPtr group_chart(const GroupPtr & group)
{
  auto action = left_action(group);
  auto n      = group->matrix_dim();
  Eigen::VectorXd e = flatten(group->identity_matrix());
  BundleChart::Maps maps{
    [](const Eigen::VectorXd &) -> Eigen::VectorXd { return Eigen::VectorXd(0); },
    [e](const Eigen::VectorXd &) -> Eigen::VectorXd { return e; },
    [](const Eigen::VectorXd &, const Eigen::VectorXd &) -> Eigen::VectorXd { return Eigen::VectorXd(0); },
    [e](const Eigen::VectorXd &, const Eigen::VectorXd &) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(e.size()); },
    [n](const Eigen::VectorXd & p) -> std::pair<Eigen::MatrixXd, Eigen::VectorXd> {
      return {unflatten(p, n), Eigen::VectorXd(0)};
    }};
  return std::make_shared<BundleChart>("group", action, 0, std::move(maps));
}

/// SO2 rotating R^2 minus a ball: y = |p|, s(r) = (r, 0).
inline ChartPtr radial_chart(double excluded_radius = 0.1)
{
  auto action = rotation_action(2, excluded_radius);
  BundleChart::Maps maps{
    [](const Eigen::VectorXd & p) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(1, p.norm()); },
    [](const Eigen::VectorXd & y) -> Eigen::VectorXd { return Eigen::Vector2d(y(0), 0.0); },
    [](const Eigen::VectorXd & p, const Eigen::VectorXd & v) -> Eigen::VectorXd {
      return Eigen::VectorXd::Constant(1, p.dot(v) / p.norm());
    },
    [](const Eigen::VectorXd &, const Eigen::VectorXd & yd) -> Eigen::VectorXd { return Eigen::Vector2d(yd(0), 0.0); },
    [](const Eigen::VectorXd & p) -> std::pair<Eigen::MatrixXd, Eigen::VectorXd> {
      double th = std::atan2(p(1), p(0));
      Eigen::MatrixXd r(2, 2);
      r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
      return {r, Eigen::VectorXd::Constant(1, p.norm())};
    }};
  return std::make_shared<BundleChart>("radial", action, 1, std::move(maps));
}

struct ChartCheck
{
  ResidualStats project_section;   ///< ||pi(s(y)) - y||
  ResidualStats decompose_roundtrip;  ///< ||Phi(g, s(y)) - p|| for (g, y) = decompose(p)
  ResidualStats d_project_section;    ///< ||dpi(ds(ydot)) - ydot||
};

inline ChartCheck check_chart(const BundleChart & chart, const SamplingPlan & plan, std::size_t count = 100)
{
  ChartCheck out;
  auto pts = chart.action()->manifold()->sample(plan, count, "chart/p");
  for (const auto & p : pts) {
    auto [g, y] = chart.decompose(p);
    out.decompose_roundtrip.add((chart.action()->apply(g.matrix(), chart.section(y)) - p).norm());
    out.project_section.add((chart.project(chart.section(y)) - y).norm());
    if (chart.quotient_dim() > 0) {
      Eigen::VectorXd yd = plan.coords(static_cast<std::size_t>(chart.quotient_dim()), 1, "chart/yd")[0];
      Eigen::VectorXd s  = chart.section(y);
      out.d_project_section.add((chart.d_project(s, chart.d_section(y, yd)) - yd).norm());
    } else {
      out.d_project_section.add(0.0);
    }
  }
  return out;
}

/// p = Phi_g(s(y)).
inline Eigen::VectorXd reconstruct(const BundleChart & chart, const Eigen::VectorXd & y, const GroupElement & g)
{
  require_same_group(chart.action()->group(), g.group(), "reconstruct");
  return chart.action()->apply(g.matrix(), chart.section(y));
}

/// V~(y) = dpi(V(s(y))).
inline Eigen::VectorXd induced_quotient_field(const VectorFieldM & V, const BundleChart & chart, const Eigen::VectorXd & y)
{
  Eigen::VectorXd s = chart.section(y);
  return chart.d_project(s, V.at(s));
}

/// max ||dpi V(p) - dpi V(Phi(g, p))|| over sampled (g, p).
inline ResidualStats check_well_definedness(const VectorFieldM & V, const BundleChart & chart, const SamplingPlan & plan)
{
  ResidualStats out;
  const auto & action = *chart.action();
  auto pts = action.manifold()->sample(plan, plan.point_samples, "points");
  auto gs  = sample_group(action.group(), plan, plan.group_samples, "well_defined");
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const auto & p     = pts[i % pts.size()];
    Eigen::VectorXd gp = action.apply(gs[i].matrix(), p);
    out.add((chart.d_project(p, V.at(p)) - chart.d_project(gp, V.at(gp))).norm());
  }
  return out;
}

struct ForcingTerm
{
  Eigen::VectorXd xi;           ///< V^(y) in algebra coordinates
  double substitution{0.0};     ///< ||generator(s(y)) xi - (V(s(y)) - ds(V~(y)))||
};

/**
 * @brief V^(y) = (dPhi^{s(y)})^{-1}(V(s(y)) - ds(V~(y))) by least squares.
 *
 * Throws ConsistencyError when the right-hand side is not orbit-tangent
 * within `tol` (relative to its norm, floored at 1).
 */
inline ForcingTerm forcing_term(const VectorFieldM & V, const BundleChart & chart, const Eigen::VectorXd & y, double tol = 1e-8)
{
  const auto & action = *chart.action();
  Eigen::VectorXd s   = chart.section(y);
  Eigen::MatrixXd gm  = generator_matrix(action, s);
  Eigen::VectorXd rhs = V.at(s) - chart.d_section(y, induced_quotient_field(V, chart, y));
  ForcingTerm out;
  out.xi           = gm.colPivHouseholderQr().solve(rhs);
  out.substitution = (gm * out.xi - rhs).norm();
  if (!(out.substitution < tol * std::max(1.0, rhs.norm()))) {
    throw ConsistencyError("forcing_term: V(s(y)) - ds(V~(y)) is not orbit-tangent (residual " +
                             std::to_string(out.substitution) + ")",
                           out.substitution);
  }
  return out;
}

/// y' = V~(y), g' = W(g) + dL_g V^(y).
struct CascadeSystem
{
  std::function<Eigen::VectorXd(const Eigen::VectorXd &)> Vtilde;
  VectorFieldG W;
  std::function<Eigen::VectorXd(const Eigen::VectorXd &)> Vhat;
  ChartPtr chart;
};

inline CascadeSystem build_cascade(const VectorFieldM & V, const VectorFieldG & W, const ChartPtr & chart, double tol = 1e-8)
{
  require_same_manifold(V.manifold(), chart->action()->manifold(), "build_cascade");
  require_same_group(W.group(), chart->action()->group(), "build_cascade");
  return {[V, chart](const Eigen::VectorXd & y) { return induced_quotient_field(V, *chart, y); }, W,
          [V, chart, tol](const Eigen::VectorXd & y) { return forcing_term(V, *chart, y, tol).xi; }, chart};
}

struct CascadeTrajectoryRow
{
  double t;
  Eigen::VectorXd y;
  Eigen::MatrixXd g;
};

struct CascadeResult
{
  Eigen::VectorXd y;
  GroupElement g;
  std::vector<CascadeTrajectoryRow> rows;
};

/**
 * @brief Integrate the quotient equation, then the driven equation on G.
 *
 * The quotient trajectory is computed first with RK4 on the same grid; stage
 * values of y inside a step come from cubic Hermite interpolation of the
 * stored (y, V~(y)) pairs. The group equation uses RKMK4 (or Lie-Euler when
 * configured).
 */
inline CascadeResult integrate_cascade(const CascadeSystem & sys, const IntegratorConfig & config, double t,
                                       const Eigen::VectorXd & y0, const GroupElement & g0, bool record = false)
{
  sys.chart->check_quotient(y0);
  require_same_group(sys.W.group(), g0.group(), "integrate_cascade");
  const auto & G = *sys.W.group();
  auto [n, h]    = detail::grid(t, config.step);

  std::vector<Eigen::VectorXd> ys{y0};
  std::vector<Eigen::VectorXd> dys{sys.Vtilde(y0)};
  auto fq = [&sys](double, const Eigen::VectorXd & y) { return sys.Vtilde(y); };
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd next = y0.size() == 0 ? y0 : rk4_step(fq, k * h, ys.back(), h);
    detail::check_blowup(next, config.blowup, (k + 1) * h);
    ys.push_back(next);
    dys.push_back(sys.Vtilde(next));
  }

  auto y_at = [&](int k, double theta) -> Eigen::VectorXd {
    if (y0.size() == 0) { return y0; }
    double t2 = theta * theta;
    double t3 = t2 * theta;
    auto kk   = static_cast<std::size_t>(k);
    return (2 * t3 - 3 * t2 + 1) * ys[kk] + (t3 - 2 * t2 + theta) * h * dys[kk] + (-2 * t3 + 3 * t2) * ys[kk + 1] +
           (t3 - t2) * h * dys[kk + 1];
  };

  CascadeResult out{y0, g0, {}};
  Eigen::MatrixXd g = g0.matrix();
  if (record) { out.rows.push_back({0.0, y0, g}); }
  for (int k = 0; k < n; ++k) {
    double tk = k * h;
    auto xi   = [&](double s, const Eigen::MatrixXd & x) -> Eigen::MatrixXd {
      double theta = h == 0.0 ? 0.0 : (s - tk) / h;
      return trivialized_velocity(sys.W, x) + G.hat(sys.Vhat(y_at(k, theta)));
    };
    g = config.scheme == Scheme::LieEulerExp ? lie_euler_step(G, xi, tk, g, h) : rkmk4_step(G, xi, tk, g, h);
    detail::check_blowup(g, config.blowup, tk + h);
    if (record) { out.rows.push_back({tk + h, ys[static_cast<std::size_t>(k) + 1], g}); }
  }
  out.y = ys.back();
  out.g = GroupElement(sys.W.group(), g, false);
  return out;
}

/// CSV `t,y_*,g_*,p_*` with g row-major and p = reconstruct(y, g).
inline void write_cascade_csv(std::ostream & os, const BundleChart & chart, const std::vector<CascadeTrajectoryRow> & rows)
{
  auto q = chart.quotient_dim();
  auto m = chart.action()->group()->matrix_dim();
  auto N = chart.action()->manifold()->ambient_dim();
  os << "t";
  for (Eigen::Index i = 0; i < q; ++i) { os << ",y_" << i; }
  for (Eigen::Index i = 0; i < m * m; ++i) { os << ",g_" << i; }
  for (Eigen::Index i = 0; i < N; ++i) { os << ",p_" << i; }
  os << "\n" << std::setprecision(17);
  for (const auto & r : rows) {
    os << r.t;
    for (Eigen::Index i = 0; i < r.y.size(); ++i) { os << "," << r.y(i); }
    Eigen::VectorXd gf = flatten(r.g);
    for (Eigen::Index i = 0; i < gf.size(); ++i) { os << "," << gf(i); }
    Eigen::VectorXd p = chart.action()->apply(r.g, chart.section(r.y));
    for (Eigen::Index i = 0; i < p.size(); ++i) { os << "," << p(i); }
    os << "\n";
  }
}

// ---------------------------------------------------------------------------
// group affine fields

/// A field on a group manifold viewed as a field on G.
inline VectorFieldG as_group_field(const VectorFieldM & V)
{
  if (V.group_lift()) { return *V.group_lift(); }
  if (V.manifold()->kind() != ManifoldKind::MatrixGroup) { throw ConfigurationError("as_group_field: manifold is not a Lie group"); }
  auto G = V.manifold()->group();
  return {G, [V](const GroupElement & g) -> Eigen::MatrixXd {
            return unflatten(V.at(flatten(g.matrix())), g.group()->matrix_dim());
          }};
}

/// Residual of V(gh) = dL_g V(h) + dR_h V(g) - dL_g dR_h V(e) over sampled pairs.
inline ResidualStats check_group_affine(const VectorFieldG & V, const SamplingPlan & plan)
{
  ResidualStats out;
  for (const auto & [g, h] : sample_group_pairs(V.group(), plan, plan.group_samples, "group_affine")) {
    out.add(group_affine_residual(V, g, h));
  }
  return out;
}

inline ResidualStats check_group_affine(const VectorFieldM & V, const SamplingPlan & plan)
{
  return check_group_affine(as_group_field(V), plan);
}

struct GroupAffineDecomposition
{
  VectorFieldG W;
  AlgebraVector U;
  GroupLinearCheck group_linear;
};

/// V(g) = W(g) + dL_g U with U = V(e) and W group linear; throws ConsistencyError otherwise.
inline GroupAffineDecomposition group_affine_decompose(const VectorFieldG & V, const SamplingPlan & plan, double tol = 1e-8)
{
  const auto & G = V.group();
  AlgebraVector U = left_trivialize(V, GroupElement::identity(G));
  Eigen::MatrixXd u = U.matrix();
  VectorFieldG W(G, [V, u](const GroupElement & g) -> Eigen::MatrixXd { return V.matrix_at(g) - g.matrix() * u; });
  auto gl = check_group_linear(W, plan, tol);
  if (!gl.passed) {
    throw ConsistencyError("group_affine_decompose: extracted W is not group linear (residual " + std::to_string(gl.stats.max) +
                             ")",
                           gl.stats.max);
  }
  return {W, U, gl};
}

}  // namespace weakinv
