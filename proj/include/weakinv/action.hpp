#pragma once

#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "manifold.hpp"
#include "vector_field_g.hpp"

namespace weakinv {

/**
 * @brief A smooth left action of a matrix group on an embedded manifold.
 *
 * Both partial differentials are analytic:
 *  - dphi_m(g, p, v): differential of Phi_g at p applied to v in T_p M.
 *  - dphi_g(p, g, V): differential of the orbit map Phi^p at g applied to V in T_g G.
 */
class GroupAction
{
public:
  using ApplyFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd & g, const Eigen::VectorXd & p)>;
  using DiffMFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd & g, const Eigen::VectorXd & p, const Eigen::VectorXd & v)>;
  using DiffGFn = std::function<Eigen::VectorXd(const Eigen::VectorXd & p, const Eigen::MatrixXd & g, const Eigen::MatrixXd & v)>;

  struct Properties
  {
    bool free{false};
    bool effective{true};
    bool transitive{false};
  };

  GroupAction(std::string name, GroupPtr group, ManifoldPtr manifold, ApplyFn apply, DiffMFn dphi_m, DiffGFn dphi_g,
              Properties props)
      : name_(std::move(name)),
        group_(std::move(group)),
        manifold_(std::move(manifold)),
        apply_(std::move(apply)),
        dphi_m_(std::move(dphi_m)),
        dphi_g_(std::move(dphi_g)),
        props_(props)
  {}

  [[nodiscard]] const std::string & name() const noexcept { return name_; }
  [[nodiscard]] const GroupPtr & group() const noexcept { return group_; }
  [[nodiscard]] const ManifoldPtr & manifold() const noexcept { return manifold_; }
  [[nodiscard]] bool declared_free() const noexcept { return props_.free; }
  [[nodiscard]] bool declared_effective() const noexcept { return props_.effective; }
  [[nodiscard]] bool declared_transitive() const noexcept { return props_.transitive; }

  [[nodiscard]] Eigen::VectorXd apply(const Eigen::MatrixXd & g, const Eigen::VectorXd & p) const { return apply_(g, p); }
  [[nodiscard]] Eigen::VectorXd dphi_m(const Eigen::MatrixXd & g, const Eigen::VectorXd & p, const Eigen::VectorXd & v) const
  {
    return dphi_m_(g, p, v);
  }
  [[nodiscard]] Eigen::VectorXd dphi_g(const Eigen::VectorXd & p, const Eigen::MatrixXd & g, const Eigen::MatrixXd & v) const
  {
    return dphi_g_(p, g, v);
  }

  [[nodiscard]] ManifoldPoint apply(const GroupElement & g, const ManifoldPoint & p) const
  {
    require_same_group(group_, g.group(), name_.c_str());
    require_same_manifold(manifold_, p.manifold, name_.c_str());
    return {manifold_, apply_(g.matrix(), p.coords)};
  }

  /// dPhi_g : T_p M -> T_{g.p} M.
  [[nodiscard]] TangentVectorM dPhi_g(const GroupElement & g, const TangentVectorM & v) const
  {
    require_same_group(group_, g.group(), name_.c_str());
    require_same_manifold(manifold_, v.base.manifold, name_.c_str());
    return {apply(g, v.base), dphi_m_(g.matrix(), v.base.coords, v.dir)};
  }

  /// dPhi^p : T_g G -> T_{g.p} M.
  [[nodiscard]] TangentVectorM dPhi_p(const ManifoldPoint & p, const TangentVectorG & v) const
  {
    require_same_group(group_, v.base.group(), name_.c_str());
    require_same_manifold(manifold_, p.manifold, name_.c_str());
    return {apply(v.base, p), dphi_g_(p.coords, v.base.matrix(), v.matrix)};
  }

private:
  std::string name_;
  GroupPtr group_;
  ManifoldPtr manifold_;
  ApplyFn apply_;
  DiffMFn dphi_m_;
  DiffGFn dphi_g_;
  Properties props_;
};

using ActionPtr = std::shared_ptr<const GroupAction>;

// ---------------------------------------------------------------------------
// builtin actions

/// R^k translating the listed axes of R^N (defaults to all axes).
inline ActionPtr translation_action(Eigen::Index n, std::vector<Eigen::Index> axes = {})
{
  if (axes.empty()) {
    axes.resize(static_cast<std::size_t>(n));
    std::iota(axes.begin(), axes.end(), Eigen::Index{0});
  }
  for (auto a : axes) {
    if (a < 0 || a >= n) { throw ConfigurationError("translation action: axis " + std::to_string(a) + " out of range"); }
  }
  auto k          = static_cast<Eigen::Index>(axes.size());
  auto group      = LieGroup::translation(static_cast<int>(k));
  Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index j = 0; j < k; ++j) { sel(axes[static_cast<std::size_t>(j)], j) = 1.0; }
  return std::make_shared<GroupAction>(
    "translation", group, Manifold::euclidean(n),
    [sel, k](const Eigen::MatrixXd & g, const Eigen::VectorXd & p) -> Eigen::VectorXd {
      return p + sel * g.col(k).head(k);
    },
    [](const Eigen::MatrixXd &, const Eigen::VectorXd &, const Eigen::VectorXd & v) -> Eigen::VectorXd { return v; },
    [sel, k](const Eigen::VectorXd &, const Eigen::MatrixXd &, const Eigen::MatrixXd & v) -> Eigen::VectorXd {
      return sel * v.col(k).head(k);
    },
    GroupAction::Properties{.free = true, .effective = true, .transitive = k == n});
}

/// Left translation of G on itself.
inline ActionPtr left_action(const GroupPtr & group)
{
  auto n = group->matrix_dim();
  return std::make_shared<GroupAction>(
    "left", group, Manifold::group(group),
    [n](const Eigen::MatrixXd & g, const Eigen::VectorXd & p) -> Eigen::VectorXd { return flatten(g * unflatten(p, n)); },
    [n](const Eigen::MatrixXd & g, const Eigen::VectorXd &, const Eigen::VectorXd & v) -> Eigen::VectorXd {
      return flatten(g * unflatten(v, n));
    },
    [n](const Eigen::VectorXd & p, const Eigen::MatrixXd &, const Eigen::MatrixXd & v) -> Eigen::VectorXd {
      return flatten(v * unflatten(p, n));
    },
    GroupAction::Properties{.free = true, .effective = true, .transitive = true});
}

/// SO(n) rotating R^n (n = 2, 3). Free on R^2 minus a ball; never free for n = 3.
inline ActionPtr rotation_action(int n, double excluded_radius = 0.0)
{
  GroupPtr group;
  if (n == 2) {
    group = LieGroup::so2();
  } else if (n == 3) {
    group = LieGroup::so3();
  } else {
    throw ConfigurationError("rotation action: only n = 2 or 3");
  }
  return std::make_shared<GroupAction>(
    "rotation", group, Manifold::euclidean(n, excluded_radius),
    [](const Eigen::MatrixXd & g, const Eigen::VectorXd & p) -> Eigen::VectorXd { return g * p; },
    [](const Eigen::MatrixXd & g, const Eigen::VectorXd &, const Eigen::VectorXd & v) -> Eigen::VectorXd { return g * v; },
    [](const Eigen::VectorXd & p, const Eigen::MatrixXd &, const Eigen::MatrixXd & v) -> Eigen::VectorXd { return v * p; },
    GroupAction::Properties{.free = n == 2 && excluded_radius > 0.0, .effective = true, .transitive = false});
}

/// SE(n) acting on R^n by p -> R p + t (n = 2, 3). Transitive, not free.
inline ActionPtr rigid_action(int n)
{
  GroupPtr group;
  if (n == 2) {
    group = LieGroup::se2();
  } else if (n == 3) {
    group = LieGroup::se3();
  } else {
    throw ConfigurationError("rigid action: only n = 2 or 3");
  }
  return std::make_shared<GroupAction>(
    "rigid", group, Manifold::euclidean(n),
    [n](const Eigen::MatrixXd & g, const Eigen::VectorXd & p) -> Eigen::VectorXd {
      return g.topLeftCorner(n, n) * p + g.topRightCorner(n, 1);
    },
    [n](const Eigen::MatrixXd & g, const Eigen::VectorXd &, const Eigen::VectorXd & v) -> Eigen::VectorXd {
      return g.topLeftCorner(n, n) * v;
    },
    [n](const Eigen::VectorXd & p, const Eigen::MatrixXd &, const Eigen::MatrixXd & v) -> Eigen::VectorXd {
      return v.topLeftCorner(n, n) * p + v.topRightCorner(n, 1);
    },
    GroupAction::Properties{.free = false, .effective = true, .transitive = true});
}

/// (R, +) acting on R^N by p -> e^s p. Free on R^N minus a ball.
inline ActionPtr scaling_action(Eigen::Index n, double excluded_radius = 0.0)
{
  return std::make_shared<GroupAction>(
    "scaling", LieGroup::translation(1), Manifold::euclidean(n, excluded_radius),
    [](const Eigen::MatrixXd & g, const Eigen::VectorXd & p) -> Eigen::VectorXd { return std::exp(g(0, 1)) * p; },
    [](const Eigen::MatrixXd & g, const Eigen::VectorXd &, const Eigen::VectorXd & v) -> Eigen::VectorXd {
      return std::exp(g(0, 1)) * v;
    },
    [](const Eigen::VectorXd & p, const Eigen::MatrixXd & g, const Eigen::MatrixXd & v) -> Eigen::VectorXd {
      return v(0, 1) * std::exp(g(0, 1)) * p;
    },
    GroupAction::Properties{.free = excluded_radius > 0.0, .effective = true, .transitive = false});
}

// ---------------------------------------------------------------------------
// generators and property checks

/// xi_M(p) = d/dt Phi(exp(t xi), p) at t = 0.
inline TangentVectorM infinitesimal_generator(const GroupAction & action, const AlgebraVector & xi, const ManifoldPoint & p)
{
  require_same_group(action.group(), xi.group, "infinitesimal_generator");
  return action.dPhi_p(p, at_identity(xi));
}

/// N x d matrix whose column j is the generator of basis element j at p.
inline Eigen::MatrixXd generator_matrix(const GroupAction & action, const Eigen::VectorXd & p)
{
  const auto & G = *action.group();
  Eigen::MatrixXd out(action.manifold()->ambient_dim(), G.algebra_dim());
  Eigen::MatrixXd e = G.identity_matrix();
  for (Eigen::Index j = 0; j < G.algebra_dim(); ++j) { out.col(j) = action.dphi_g(p, e, G.basis()[static_cast<std::size_t>(j)]); }
  return out;
}

inline Eigen::MatrixXd generator_matrix(const GroupAction & action, const ManifoldPoint & p)
{
  require_same_manifold(action.manifold(), p.manifold, "generator_matrix");
  return generator_matrix(action, p.coords);
}

/// Smallest singular value of the generator matrix (0 when d > N).
inline double min_generator_singular_value(const GroupAction & action, const Eigen::VectorXd & p)
{
  Eigen::MatrixXd gm = generator_matrix(action, p);
  if (gm.cols() > gm.rows()) { return 0.0; }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gm);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

struct FreenessCheck
{
  bool free{true};
  double min_singular_value{std::numeric_limits<double>::infinity()};
  std::size_t points{0};
};

/// Infinitesimal freeness: injectivity of dPhi^p at sampled p.
inline FreenessCheck check_free(const GroupAction & action, const SamplingPlan & plan, double tol = 1e-8)
{
  FreenessCheck out;
  for (const auto & p : action.manifold()->sample(plan, plan.point_samples, "points")) {
    double s               = min_generator_singular_value(action, p);
    out.min_singular_value = std::min(out.min_singular_value, s);
    ++out.points;
  }
  out.free = out.min_singular_value >= tol;
  return out;
}

struct ActionAxiomCheck
{
  ResidualStats identity;
  ResidualStats compatibility;
  [[nodiscard]] bool passed(double tol = 1e-10) const { return identity.below(tol) && compatibility.below(tol); }
};

/// Residuals of Phi(e, p) = p and Phi(g, Phi(h, p)) = Phi(gh, p).
inline ActionAxiomCheck check_action_axioms(const GroupAction & action, const SamplingPlan & plan)
{
  ActionAxiomCheck out;
  const auto & G  = action.group();
  auto pts        = action.manifold()->sample(plan, plan.point_samples, "points");
  auto pairs      = sample_group_pairs(G, plan, plan.group_samples, "axioms");
  Eigen::MatrixXd e = G->identity_matrix();
  for (const auto & p : pts) { out.identity.add((action.apply(e, p) - p).norm()); }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto & [g, h] = pairs[i];
    const auto & p      = pts[i % pts.size()];
    Eigen::VectorXd lhs = action.apply(g.matrix(), action.apply(h.matrix(), p));
    Eigen::VectorXd rhs = action.apply(g.matrix() * h.matrix(), p);
    out.compatibility.add((lhs - rhs).norm());
  }
  return out;
}

struct DifferentialCheck
{
  ResidualStats manifold_slot;  ///< relative error of dPhi_g vs central differences
  ResidualStats group_slot;     ///< relative error of dPhi^p vs central differences
  [[nodiscard]] bool passed(double tol = 1e-5) const { return manifold_slot.below(tol) && group_slot.below(tol); }
};

/// Analytic differentials against central finite differences with step `h`.
inline DifferentialCheck check_action_differentials(const GroupAction & action, const SamplingPlan & plan, double h = 1e-5)
{
  DifferentialCheck out;
  const auto & G = action.group();
  const auto & M = action.manifold();
  auto pts       = M->sample(plan, plan.point_samples, "points");
  auto gs        = sample_group(G, plan, plan.point_samples, "diff_g");
  auto dirs      = plan.coords(static_cast<std::size_t>(G->algebra_dim()), plan.point_samples, "diff_xi");
  auto mdirs     = plan.coords(static_cast<std::size_t>(M->ambient_dim()), plan.point_samples, "diff_v");
  auto rel       = [](const Eigen::VectorXd & a, const Eigen::VectorXd & b) { return (a - b).norm() / std::max(1.0, b.norm()); };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto & p = pts[i];
    const auto & g = gs[i].matrix();

    // group slot along g exp(t X), tangent g X
    Eigen::MatrixXd x  = G->hat(dirs[i]);
    Eigen::VectorXd fd = (action.apply(g * G->exp(h * dirs[i]), p) - action.apply(g * G->exp(-h * dirs[i]), p)) / (2.0 * h);
    out.group_slot.add(rel(action.dphi_g(p, g, g * x), fd));

    // manifold slot: along a tangent curve; matrix manifolds use p exp(t X)
    Eigen::VectorXd v;
    Eigen::VectorXd fdm;
    if (M->kind() == ManifoldKind::MatrixGroup) {
      const auto & H    = M->group();
      auto k            = H->matrix_dim();
      Eigen::MatrixXd pm = unflatten(p, k);
      Eigen::VectorXd xi = plan.coords(static_cast<std::size_t>(H->algebra_dim()), i + 1, "diff_v_group")[i];
      v                 = flatten(pm * H->hat(xi));
      fdm = (action.apply(g, flatten(pm * H->exp(h * xi))) - action.apply(g, flatten(pm * H->exp(-h * xi)))) / (2.0 * h);
    } else {
      v   = mdirs[i];
      fdm = (action.apply(g, p + h * v) - action.apply(g, p - h * v)) / (2.0 * h);
    }
    out.manifold_slot.add(rel(action.dphi_m(g, p, v), fdm));
  }
  return out;
}

}  // namespace weakinv
