#pragma once

#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "action.hpp"
#include "vector_field_m.hpp"

namespace weakinv {

enum class Classification { Strong, Weak, PartialOnly, None };

inline std::string_view to_string(Classification c)
{
  switch (c) {
    case Classification::Strong: return "Strong";
    case Classification::Weak: return "Weak";
    case Classification::PartialOnly: return "PartialOnly";
    case Classification::None: return "None";
  }
  return "None";
}

/// Classification thresholds. `strong` and `weak` are relative to the field scale.
struct Tolerances
{
  double strong{1e-9};
  double weak{1e-8};
  double rank{1e-8};
  double group_linear{1e-8};
  double automorphism{1e-8};
  double sigma_match{1e-8};
};

/// A diffeomorphism of an embedded manifold with its inverse and differential.
class Diffeomorphism
{
public:
  using MapFn  = std::function<Eigen::VectorXd(const Eigen::VectorXd &)>;
  using DiffFn = std::function<Eigen::VectorXd(const Eigen::VectorXd & p, const Eigen::VectorXd & v)>;

  Diffeomorphism(ManifoldPtr manifold, MapFn forward, MapFn inverse, DiffFn differential)
      : manifold_(std::move(manifold)), forward_(std::move(forward)), inverse_(std::move(inverse)), differential_(std::move(differential))
  {}

  [[nodiscard]] const ManifoldPtr & manifold() const noexcept { return manifold_; }
  [[nodiscard]] Eigen::VectorXd forward(const Eigen::VectorXd & p) const { return forward_(p); }
  [[nodiscard]] Eigen::VectorXd inverse(const Eigen::VectorXd & p) const { return inverse_(p); }
  [[nodiscard]] Eigen::VectorXd differential(const Eigen::VectorXd & p, const Eigen::VectorXd & v) const
  {
    return differential_(p, v);
  }

  [[nodiscard]] ManifoldPoint operator()(const ManifoldPoint & p) const
  {
    require_same_manifold(manifold_, p.manifold, "Diffeomorphism");
    return {manifold_, forward_(p.coords)};
  }

private:
  ManifoldPtr manifold_;
  MapFn forward_;
  MapFn inverse_;
  DiffFn differential_;
};

inline Diffeomorphism identity_map(const ManifoldPtr & m)
{
  return {m, [](const Eigen::VectorXd & p) { return p; }, [](const Eigen::VectorXd & p) { return p; },
          [](const Eigen::VectorXd &, const Eigen::VectorXd & v) { return v; }};
}

/// Phi_h as a diffeomorphism of M.
inline Diffeomorphism action_map(const ActionPtr & action, const GroupElement & h)
{
  require_same_group(action->group(), h.group(), "action_map");
  Eigen::MatrixXd hm   = h.matrix();
  Eigen::MatrixXd hinv = h.group()->inverse(hm);
  return {action->manifold(), [action, hm](const Eigen::VectorXd & p) { return action->apply(hm, p); },
          [action, hinv](const Eigen::VectorXd & p) { return action->apply(hinv, p); },
          [action, hm](const Eigen::VectorXd & p, const Eigen::VectorXd & v) { return action->dphi_m(hm, p, v); }};
}

/// Right translation p -> p k on the manifold G.
inline Diffeomorphism right_translation_map(const GroupElement & k)
{
  auto G               = k.group();
  auto n               = G->matrix_dim();
  Eigen::MatrixXd km   = k.matrix();
  Eigen::MatrixXd kinv = G->inverse(km);
  return {Manifold::group(G), [km, n](const Eigen::VectorXd & p) { return flatten(unflatten(p, n) * km); },
          [kinv, n](const Eigen::VectorXd & p) { return flatten(unflatten(p, n) * kinv); },
          [km, n](const Eigen::VectorXd &, const Eigen::VectorXd & v) { return flatten(unflatten(v, n) * km); }};
}

/// p -> p + c on R^N.
inline Diffeomorphism translation_map(const Eigen::VectorXd & c)
{
  return {Manifold::euclidean(c.size()), [c](const Eigen::VectorXd & p) -> Eigen::VectorXd { return p + c; },
          [c](const Eigen::VectorXd & p) -> Eigen::VectorXd { return p - c; },
          [](const Eigen::VectorXd &, const Eigen::VectorXd & v) { return v; }};
}

/// A map G -> G.
class GroupMap
{
public:
  using EvalFn = std::function<GroupElement(const GroupElement &)>;

  GroupMap(GroupPtr group, EvalFn eval) : group_(std::move(group)), eval_(std::move(eval)) {}

  [[nodiscard]] const GroupPtr & group() const noexcept { return group_; }
  [[nodiscard]] GroupElement operator()(const GroupElement & g) const
  {
    require_same_group(group_, g.group(), "GroupMap");
    return eval_(g);
  }

private:
  GroupPtr group_;
  EvalFn eval_;
};

// ---------------------------------------------------------------------------
// residual and xi^W recovery

/// Ambient coordinates of dPhi_{g^-1} V(Phi_g p) - V(p).
inline Eigen::VectorXd residual_field_at(const VectorFieldM & V, const GroupAction & action, const Eigen::MatrixXd & g,
                                         const Eigen::VectorXd & p)
{
  Eigen::MatrixXd ginv = action.group()->inverse(g);
  Eigen::VectorXd gp   = action.apply(g, p);
  return action.dphi_m(ginv, gp, V.at(gp)) - V.at(p);
}

inline TangentVectorM residual_field(const VectorFieldM & V, const GroupAction & action, const GroupElement & g,
                                     const ManifoldPoint & p)
{
  require_same_manifold(V.manifold(), action.manifold(), "residual_field");
  require_same_group(action.group(), g.group(), "residual_field");
  return {p, residual_field_at(V, action, g.matrix(), p.coords)};
}

struct XiSolve
{
  Eigen::VectorXd xi;        ///< algebra coordinates of xi^W(g)
  double consistency{0.0};   ///< worst per-point ||generator(p) xi - residual(p)||
};

inline std::string describe_point(const Eigen::VectorXd & p)
{
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < p.size(); ++i) { os << (i ? ", " : "") << p(i); }
  os << ")";
  return os.str();
}

/**
 * @brief Least-squares xi with xi_M(p) = residual(p) stacked over all points.
 *
 * Throws RankDeficient when the generator matrix at some point has a singular
 * value below `rank_tol`. A large consistency residual is evidence against
 * weak invariance, not an error.
 */
inline XiSolve solve_xiW(const VectorFieldM & V, const GroupAction & action, const Eigen::MatrixXd & g,
                         const std::vector<Eigen::VectorXd> & points, double rank_tol = 1e-8)
{
  if (points.empty()) { throw ConfigurationError("solve_xiW: need at least one point"); }
  auto N = action.manifold()->ambient_dim();
  auto d = action.group()->algebra_dim();
  Eigen::MatrixXd A(N * static_cast<Eigen::Index>(points.size()), d);
  Eigen::VectorXd b(A.rows());
  for (std::size_t i = 0; i < points.size(); ++i) {
    Eigen::MatrixXd gm = generator_matrix(action, points[i]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(gm);
    double smin = gm.cols() > gm.rows() ? 0.0 : svd.singularValues()(svd.singularValues().size() - 1);
    if (smin < rank_tol) {
      throw RankDeficient("solve_xiW: action is not infinitesimally free at p = " + describe_point(points[i]));
    }
    auto row                  = static_cast<Eigen::Index>(i) * N;
    A.middleRows(row, N)      = gm;
    b.segment(row, N)         = residual_field_at(V, action, g, points[i]);
  }
  XiSolve out;
  out.xi = A.colPivHouseholderQr().solve(b);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto row        = static_cast<Eigen::Index>(i) * N;
    out.consistency = std::max(out.consistency, (A.middleRows(row, N) * out.xi - b.segment(row, N)).norm());
  }
  return out;
}

inline XiSolve solve_xiW(const VectorFieldM & V, const GroupAction & action, const GroupElement & g,
                         const std::vector<ManifoldPoint> & points, double rank_tol = 1e-8)
{
  require_same_manifold(V.manifold(), action.manifold(), "solve_xiW");
  std::vector<Eigen::VectorXd> raw;
  raw.reserve(points.size());
  for (const auto & p : points) { raw.push_back(p.coords); }
  return solve_xiW(V, action, g.matrix(), raw, rank_tol);
}

/**
 * @brief xi^W solver for a fixed point batch.
 *
 * The stacked generator matrix depends only on the points, so it is checked
 * for rank and factorized once; each solve costs one residual evaluation per
 * point plus a back-substitution.
 */
class XiSolver
{
public:
  XiSolver(VectorFieldM V, ActionPtr action, std::vector<Eigen::VectorXd> points, double rank_tol = 1e-8)
      : V_(std::move(V)), action_(std::move(action)), points_(std::move(points))
  {
    if (points_.empty()) { throw ConfigurationError("XiSolver: need at least one point"); }
    auto N = action_->manifold()->ambient_dim();
    A_.resize(N * static_cast<Eigen::Index>(points_.size()), action_->group()->algebra_dim());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (min_generator_singular_value(*action_, points_[i]) < rank_tol) {
        throw RankDeficient("XiSolver: action is not infinitesimally free at p = " + describe_point(points_[i]));
      }
      A_.middleRows(static_cast<Eigen::Index>(i) * N, N) = generator_matrix(*action_, points_[i]);
    }
    qr_ = A_.colPivHouseholderQr();
  }

  [[nodiscard]] XiSolve solve(const Eigen::MatrixXd & g) const
  {
    auto N = action_->manifold()->ambient_dim();
    Eigen::VectorXd b(A_.rows());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      b.segment(static_cast<Eigen::Index>(i) * N, N) = residual_field_at(V_, *action_, g, points_[i]);
    }
    XiSolve out;
    out.xi = qr_.solve(b);
    for (std::size_t i = 0; i < points_.size(); ++i) {
      auto row        = static_cast<Eigen::Index>(i) * N;
      out.consistency = std::max(out.consistency, (A_.middleRows(row, N) * out.xi - b.segment(row, N)).norm());
    }
    return out;
  }

  [[nodiscard]] const ActionPtr & action() const noexcept { return action_; }

private:
  VectorFieldM V_;
  ActionPtr action_;
  std::vector<Eigen::VectorXd> points_;
  Eigen::MatrixXd A_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

/// W(g) = g xi^W(g) with xi^W(g) solved from the given point batch on demand.
inline VectorFieldG solver_backed_W(const VectorFieldM & V, const ActionPtr & action, std::vector<Eigen::VectorXd> points,
                                    double rank_tol = 1e-8)
{
  auto solver = std::make_shared<const XiSolver>(V, action, std::move(points), rank_tol);
  auto G      = action->group();
  return {G, [solver, G](const GroupElement & g) -> Eigen::MatrixXd { return g.matrix() * G->hat(solver->solve(g.matrix()).xi); }};
}

/// Field scale used to make thresholds relative: max ||V(p)|| over points, floored at 1.
inline double field_scale(const VectorFieldM & V, const std::vector<Eigen::VectorXd> & points)
{
  double s = 1.0;
  for (const auto & p : points) { s = std::max(s, V.at(p).norm()); }
  return s;
}

// ---------------------------------------------------------------------------
// reports

struct XiTableRow
{
  Eigen::MatrixXd g;
  Eigen::VectorXd xi;
};

struct SigmaTableRow
{
  Eigen::MatrixXd g;
  Eigen::MatrixXd sigma;
};

/// Outcome of classifying a vector field or diffeomorphism at sampled points.
struct InvarianceReport
{
  Classification classification{Classification::None};
  std::optional<VectorFieldG> recovered_W;
  std::optional<GroupMap> recovered_sigma;
  std::map<std::string, ResidualStats> residual_stats;
  std::map<std::string, double> scalars;
  SamplingPlan samples;
  Tolerances tolerances;
  bool infinitesimally_free{false};
  std::vector<XiTableRow> xiW_table;
  std::vector<SigmaTableRow> sigma_table;
  std::vector<std::string> notes;
};

/**
 * @brief Strong / Weak / PartialOnly / None classification of V under Phi.
 *
 * Strong: the residual field vanishes at every sampled (g, p).
 * Weak: for every sampled g one algebra element explains the residual at all
 * points at once; the recovered W is then checked for group linearity.
 * PartialOnly: the residual is orbit-tangent pointwise but not explained by a
 * single algebra element.
 */
inline InvarianceReport classify_vector_field(const VectorFieldM & V, const ActionPtr & action, const SamplingPlan & plan,
                                              const Tolerances & tol = {})
{
  require_same_manifold(V.manifold(), action->manifold(), "classify_vector_field");
  if (!action->declared_effective()) { throw ConfigurationError("classify_vector_field: action must be effective"); }

  InvarianceReport rep;
  rep.samples    = plan;
  rep.tolerances = tol;
  const auto & G = action->group();
  auto points    = action->manifold()->sample(plan, plan.point_samples, "points");
  auto gs        = sample_group(G, plan, plan.group_samples, "group");
  double scale   = field_scale(V, points);
  rep.scalars["field_scale"] = scale;

  ResidualStats strong;
  for (const auto & g : gs) {
    for (const auto & p : points) { strong.add(residual_field_at(V, *action, g.matrix(), p).norm() / scale); }
  }
  rep.residual_stats["strong_residual"] = strong;

  double smin = std::numeric_limits<double>::infinity();
  for (const auto & p : points) { smin = std::min(smin, min_generator_singular_value(*action, p)); }
  rep.scalars["min_generator_singular_value"] = smin;
  rep.infinitesimally_free                   = smin >= tol.rank;

  if (strong.below(tol.strong)) {
    rep.classification = Classification::Strong;
    rep.recovered_W    = zero_field(G);
    if (rep.infinitesimally_free) {
      XiSolver solver(V, action, points, tol.rank);
      ResidualStats xi_norm;
      for (const auto & g : gs) { xi_norm.add(solver.solve(g.matrix()).xi.norm()); }
      rep.residual_stats["xiW_norm"] = xi_norm;
    }
    return rep;
  }

  if (!rep.infinitesimally_free) {
    rep.classification = Classification::None;
    rep.notes.emplace_back("action not infinitesimally free on the samples; only Strong/None are decidable");
    return rep;
  }

  XiSolver solver(V, action, points, tol.rank);
  ResidualStats consistency;
  std::vector<XiTableRow> table;
  for (const auto & g : gs) {
    auto s = solver.solve(g.matrix());
    consistency.add(s.consistency / scale);
    table.push_back({g.matrix(), s.xi});
  }
  rep.residual_stats["weak_consistency"] = consistency;

  if (consistency.below(tol.weak)) {
    rep.classification = Classification::Weak;
    rep.xiW_table      = std::move(table);
    rep.recovered_W    = solver_backed_W(V, action, points, tol.rank);
    auto gl            = check_group_linear(*rep.recovered_W, plan, tol.group_linear);
    rep.residual_stats["group_linear"] = gl.stats;
    rep.scalars["W_at_identity"]       = gl.at_identity;
    return rep;
  }

  // orbit tangency point by point
  ResidualStats pointwise;
  for (const auto & g : gs) {
    for (const auto & p : points) {
      auto s = solve_xiW(V, *action, g.matrix(), std::vector<Eigen::VectorXd>{p}, tol.rank);
      pointwise.add(s.consistency / scale);
    }
  }
  rep.residual_stats["orbit_tangency"] = pointwise;
  rep.classification = pointwise.below(tol.weak) ? Classification::PartialOnly : Classification::None;
  return rep;
}

// ---------------------------------------------------------------------------
// sigma recovery

class RecoveryFailed : public Error
{
public:
  RecoveryFailed(const std::string & what, GroupElement best, double residual)
      : Error(what), best_(std::move(best)), residual_(residual)
  {}
  [[nodiscard]] const GroupElement & best() const noexcept { return best_; }
  [[nodiscard]] double residual() const noexcept { return residual_; }

private:
  GroupElement best_;
  double residual_;
};

struct SigmaRecovery
{
  GroupElement sigma;
  double match_residual{0.0};  ///< sqrt of the final least-squares objective
  int iterations{0};
};

struct GaussNewtonOptions
{
  int max_iterations{50};
  double step_tol{1e-13};
  double gradient_tol{1e-9};
};

/**
 * @brief Gauss-Newton for h = argmin sum_i ||Phi(h, p_i) - target_i||^2, h = h0 exp(x).
 *
 * The Jacobian columns are dPhi^{p_i}(h E_j), i.e. analytic.
 */
inline SigmaRecovery fit_group_element(const GroupAction & action, const GroupElement & h0,
                                       const std::vector<Eigen::VectorXd> & points,
                                       const std::vector<Eigen::VectorXd> & targets, const GaussNewtonOptions & opts = {})
{
  const auto & G = action.group();
  auto N         = action.manifold()->ambient_dim();
  auto d         = G->algebra_dim();
  auto rows      = N * static_cast<Eigen::Index>(points.size());
  double scale   = 1.0;
  for (const auto & t : targets) { scale = std::max(scale, t.norm()); }

  auto residual = [&](const Eigen::MatrixXd & h) {
    Eigen::VectorXd r(rows);
    for (std::size_t i = 0; i < points.size(); ++i) {
      r.segment(static_cast<Eigen::Index>(i) * N, N) = action.apply(h, points[i]) - targets[i];
    }
    return r;
  };

  Eigen::MatrixXd h = h0.matrix();
  Eigen::VectorXd r = residual(h);
  double cost       = r.squaredNorm();
  int it            = 0;
  for (; it < opts.max_iterations; ++it) {
    if (std::sqrt(cost) < 1e-15 * scale) { break; }
    Eigen::MatrixXd J(rows, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::MatrixXd col_t = h * G->basis()[static_cast<std::size_t>(j)];
      for (std::size_t i = 0; i < points.size(); ++i) {
        J.block(static_cast<Eigen::Index>(i) * N, j, N, 1) = action.dphi_g(points[i], h, col_t);
      }
    }
    Eigen::VectorXd grad = J.transpose() * r;
    Eigen::VectorXd dx   = J.completeOrthogonalDecomposition().solve(-r);
    double alpha         = 1.0;
    bool improved        = false;
    Eigen::MatrixXd h_new;
    Eigen::VectorXd r_new;
    double cost_new = cost;
    for (int ls = 0; ls < 30; ++ls) {
      h_new    = G->project(h * G->exp(alpha * dx));
      r_new    = residual(h_new);
      cost_new = r_new.squaredNorm();
      if (cost_new < cost) {
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) {
      if (grad.norm() <= opts.gradient_tol * scale * scale) { break; }  // at a (local) minimum
      throw RecoveryFailed("Gauss-Newton stagnated with gradient " + std::to_string(grad.norm()),
                           GroupElement(G, h, false), std::sqrt(cost));
    }
    h    = h_new;
    r    = r_new;
    cost = cost_new;
    if ((alpha * dx).norm() < opts.step_tol) {
      ++it;
      break;
    }
  }
  if (it >= opts.max_iterations) {
    Eigen::MatrixXd J(rows, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::MatrixXd col_t = h * G->basis()[static_cast<std::size_t>(j)];
      for (std::size_t i = 0; i < points.size(); ++i) {
        J.block(static_cast<Eigen::Index>(i) * N, j, N, 1) = action.dphi_g(points[i], h, col_t);
      }
    }
    double gn = (J.transpose() * r).norm();
    if (gn > opts.gradient_tol * scale * scale) {
      throw RecoveryFailed("Gauss-Newton did not converge in " + std::to_string(opts.max_iterations) + " iterations",
                           GroupElement(G, h, false), std::sqrt(cost));
    }
  }
  return {GroupElement(G, h, false), std::sqrt(cost), it};
}

/// Precomputed f^{-1}(p_i) so sigma can be evaluated at many g cheaply.
struct SigmaProblem
{
  ActionPtr action;
  Diffeomorphism f;
  std::vector<Eigen::VectorXd> points;
  std::vector<Eigen::VectorXd> preimages;

  SigmaProblem(ActionPtr a, Diffeomorphism fm, std::vector<Eigen::VectorXd> pts)
      : action(std::move(a)), f(std::move(fm)), points(std::move(pts))
  {
    if (points.empty()) { throw ConfigurationError("sigma recovery: need at least one point"); }
    if (!action->declared_effective()) { throw ConfigurationError("sigma recovery: action must be effective"); }
    require_same_manifold(action->manifold(), f.manifold(), "sigma recovery");
    preimages.reserve(points.size());
    for (const auto & p : points) { preimages.push_back(f.inverse(p)); }
  }

  /// sigma(g) = Phi-hat^{-1}(f o Phi_g o f^{-1}), found by Gauss-Newton from h0 = g.
  [[nodiscard]] SigmaRecovery recover(const GroupElement & g, const GaussNewtonOptions & opts = {}) const
  {
    require_same_group(action->group(), g.group(), "recover_sigma_at");
    std::vector<Eigen::VectorXd> targets;
    targets.reserve(points.size());
    for (const auto & q : preimages) { targets.push_back(f.forward(action->apply(g.matrix(), q))); }
    return fit_group_element(*action, g, points, targets, opts);
  }
};

inline SigmaRecovery recover_sigma_at(const Diffeomorphism & f, const ActionPtr & action, const GroupElement & g,
                                      const std::vector<ManifoldPoint> & points, const GaussNewtonOptions & opts = {})
{
  std::vector<Eigen::VectorXd> raw;
  raw.reserve(points.size());
  for (const auto & p : points) {
    require_same_manifold(action->manifold(), p.manifold, "recover_sigma_at");
    raw.push_back(p.coords);
  }
  return SigmaProblem(action, f, std::move(raw)).recover(g, opts);
}

/// sigma as a GroupMap backed by Gauss-Newton; throws RecoveryFailed where recovery fails.
inline GroupMap recovered_sigma(const Diffeomorphism & f, const ActionPtr & action, std::vector<Eigen::VectorXd> points)
{
  auto problem = std::make_shared<const SigmaProblem>(action, f, std::move(points));
  return {action->group(), [problem](const GroupElement & g) { return problem->recover(g).sigma; }};
}

struct AutomorphismCheck
{
  ResidualStats homomorphism;  ///< ||sigma(g) sigma(h) - sigma(gh)||_F
  double identity{0.0};        ///< ||sigma(e) - e||_F
  ResidualStats inverse;       ///< ||sigma(x) - y||_F after solving sigma(x) = y
  std::size_t inverse_failures{0};

  [[nodiscard]] bool passed(double tol) const
  {
    return homomorphism.below(tol) && identity < tol && inverse_failures == 0 && inverse.below(std::max(tol, 1e-8));
  }
};

/// Solve sigma(x) = y by Gauss-Newton with a central-difference Jacobian, x0 = y.
inline std::optional<double> invert_group_map(const GroupMap & sigma, const GroupElement & y, int max_iterations = 30)
{
  const auto & G = sigma.group();
  auto d         = G->algebra_dim();
  auto resid     = [&](const Eigen::MatrixXd & x) { return flatten(sigma(GroupElement(G, x, false)).matrix() - y.matrix()); };
  Eigen::MatrixXd x = y.matrix();
  Eigen::VectorXd r = resid(x);
  const double eps  = 1e-6;
  for (int it = 0; it < max_iterations && r.norm() > 1e-13; ++it) {
    Eigen::MatrixXd J(r.size(), d);
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Unit(d, j) * eps;
      J.col(j)          = (resid(x * G->exp(e)) - resid(x * G->exp(-e))) / (2.0 * eps);
    }
    Eigen::VectorXd dx = J.completeOrthogonalDecomposition().solve(-r);
    double alpha       = 1.0;
    bool improved      = false;
    for (int ls = 0; ls < 20; ++ls) {
      Eigen::MatrixXd xn = G->project(x * G->exp(alpha * dx));
      Eigen::VectorXd rn = resid(xn);
      if (rn.norm() < r.norm()) {
        x        = xn;
        r        = rn;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) { break; }
  }
  return r.norm();
}

/**
 * @brief Pointwise automorphism evidence for sigma.
 *
 * Homomorphism residual over sampled pairs, identity preservation, and
 * invertibility (sigma(x) = y solvable) at up to `inverse_samples` points.
 */
inline AutomorphismCheck check_automorphism(const GroupMap & sigma, const SamplingPlan & plan, std::size_t inverse_samples = 8)
{
  AutomorphismCheck out;
  const auto & G = sigma.group();
  for (const auto & [g, h] : sample_group_pairs(G, plan, plan.group_samples, "automorphism")) {
    try {
      Eigen::MatrixXd lhs = sigma(g).matrix() * sigma(h).matrix();
      Eigen::MatrixXd rhs = sigma(compose(g, h)).matrix();
      out.homomorphism.add((lhs - rhs).norm());
    } catch (const RecoveryFailed & e) {
      out.homomorphism.add(std::numeric_limits<double>::infinity());
    }
  }
  auto e       = GroupElement::identity(G);
  out.identity = (sigma(e).matrix() - e.matrix()).norm();
  for (const auto & y : sample_group(G, plan, std::min(inverse_samples, plan.group_samples), "automorphism_inverse")) {
    try {
      auto r = invert_group_map(sigma, y);
      if (!r || !(*r < 1e-6)) { ++out.inverse_failures; }
      out.inverse.add(r.value_or(std::numeric_limits<double>::infinity()));
    } catch (const Error &) {
      ++out.inverse_failures;
    }
  }
  return out;
}

/// Weak invariance of a diffeomorphism: recover sigma at sampled g and check Aut(G) membership.
inline InvarianceReport classify_diffeomorphism(const Diffeomorphism & f, const ActionPtr & action, const SamplingPlan & plan,
                                                const Tolerances & tol = {})
{
  InvarianceReport rep;
  rep.samples    = plan;
  rep.tolerances = tol;
  const auto & G = action->group();
  auto points    = action->manifold()->sample(plan, plan.point_samples, "points");
  auto gs        = sample_group(G, plan, plan.group_samples, "group");
  SigmaProblem problem(action, f, points);

  double smin = std::numeric_limits<double>::infinity();
  for (const auto & p : points) { smin = std::min(smin, min_generator_singular_value(*action, p)); }
  rep.scalars["min_generator_singular_value"] = smin;
  rep.infinitesimally_free                   = smin >= tol.rank;

  double scale = 1.0;
  for (const auto & p : points) { scale = std::max(scale, p.norm()); }

  ResidualStats match;
  ResidualStats deviation;
  bool failed = false;
  for (const auto & g : gs) {
    try {
      auto s = problem.recover(g);
      match.add(s.match_residual / scale);
      deviation.add((s.sigma.matrix() - g.matrix()).norm());
      rep.sigma_table.push_back({g.matrix(), s.sigma.matrix()});
    } catch (const RecoveryFailed & e) {
      failed = true;
      match.add(e.residual() / scale);
      rep.notes.emplace_back(std::string("sigma recovery failed: ") + e.what());
    }
  }
  rep.residual_stats["sigma_match"]     = match;
  rep.residual_stats["sigma_deviation"] = deviation;

  if (failed || !match.below(tol.sigma_match)) {
    rep.classification = Classification::None;
    rep.sigma_table.clear();
    return rep;
  }
  rep.classification  = deviation.below(tol.sigma_match) ? Classification::Strong : Classification::Weak;
  rep.recovered_sigma = GroupMap(G, [problem](const GroupElement & g) { return problem.recover(g).sigma; });
  auto aut            = check_automorphism(*rep.recovered_sigma, plan);
  rep.residual_stats["automorphism_homomorphism"] = aut.homomorphism;
  rep.residual_stats["automorphism_inverse"]      = aut.inverse;
  rep.scalars["automorphism_identity"]            = aut.identity;
  rep.scalars["automorphism_inverse_failures"]    = static_cast<double>(aut.inverse_failures);
  return rep;
}

}  // namespace weakinv
