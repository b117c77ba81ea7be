#pragma once

#include <functional>
#include <string_view>
#include <utility>
#include <variant>

#include "lie_group.hpp"
#include "sampling.hpp"

namespace weakinv {

/// W(g) = D g - g D, group linear whenever D normalizes the algebra.
struct InnerDerivationKind
{
  Eigen::MatrixXd D;
};

/// V(g) = D g - g D + g U.
struct GroupAffineKind
{
  Eigen::MatrixXd D;
  Eigen::VectorXd U;
};

/// V(g) = g xi.
struct LeftInvariantKind
{
  Eigen::VectorXd xi;
};

struct CustomKind
{};

using VectorFieldGKind = std::variant<InnerDerivationKind, GroupAffineKind, LeftInvariantKind, CustomKind>;

/// A vector field on a matrix Lie group; eval returns the ambient tangent matrix at g.
class VectorFieldG
{
public:
  using EvalFn = std::function<Eigen::MatrixXd(const GroupElement &)>;

  VectorFieldG(GroupPtr group, EvalFn eval, VectorFieldGKind kind = CustomKind{})
      : group_(std::move(group)), eval_(std::move(eval)), kind_(std::move(kind))
  {}

  [[nodiscard]] const GroupPtr & group() const noexcept { return group_; }
  [[nodiscard]] const VectorFieldGKind & kind() const noexcept { return kind_; }

  [[nodiscard]] TangentVectorG operator()(const GroupElement & g) const
  {
    require_same_group(group_, g.group(), "VectorFieldG");
    return {g, eval_(g)};
  }

  [[nodiscard]] Eigen::MatrixXd matrix_at(const GroupElement & g) const { return eval_(g); }

private:
  GroupPtr group_;
  EvalFn eval_;
  VectorFieldGKind kind_;
};

inline VectorFieldG zero_field(const GroupPtr & group)
{
  auto n = group->matrix_dim();
  return {group, [n](const GroupElement &) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(n, n); }, CustomKind{}};
}

inline VectorFieldG inner_derivation_field(const GroupPtr & group, Eigen::MatrixXd D)
{
  if (D.rows() != group->matrix_dim() || D.cols() != group->matrix_dim()) {
    throw DescriptorMismatch("inner derivation: D must be " + std::to_string(group->matrix_dim()) + "x" +
                             std::to_string(group->matrix_dim()));
  }
  return {group,
          [D](const GroupElement & g) -> Eigen::MatrixXd { return D * g.matrix() - g.matrix() * D; },
          InnerDerivationKind{D}};
}

inline VectorFieldG group_affine_field(const GroupPtr & group, Eigen::MatrixXd D, const Eigen::VectorXd & U)
{
  if (D.rows() != group->matrix_dim() || D.cols() != group->matrix_dim()) {
    throw DescriptorMismatch("group affine field: D must be " + std::to_string(group->matrix_dim()) + "x" +
                             std::to_string(group->matrix_dim()));
  }
  Eigen::MatrixXd u = group->hat(U);
  return {group,
          [D, u](const GroupElement & g) -> Eigen::MatrixXd {
            return D * g.matrix() - g.matrix() * D + g.matrix() * u;
          },
          GroupAffineKind{D, U}};
}

inline VectorFieldG left_invariant_field(const AlgebraVector & xi)
{
  Eigen::MatrixXd x = xi.matrix();
  return {xi.group, [x](const GroupElement & g) -> Eigen::MatrixXd { return g.matrix() * x; }, LeftInvariantKind{xi.coords}};
}

/// Coordinates of g^{-1} W(g). Throws InvalidTangent if that matrix is not in the algebra.
inline AlgebraVector left_trivialize(const VectorFieldG & W, const GroupElement & g)
{
  const auto & G     = *W.group();
  Eigen::MatrixXd x  = G.inverse(g.matrix()) * W.matrix_at(g);
  Eigen::VectorXd xi = G.vee(x);
  double off         = (x - G.hat(xi)).norm();
  if (!(off < 1e-8 * std::max(1.0, x.norm()))) {
    throw InvalidTangent("left_trivialize: g^-1 W(g) is off the algebra by " + std::to_string(off));
  }
  return {W.group(), xi};
}

/// Group elements exp(x) for sampled algebra coordinates x.
inline std::vector<GroupElement> sample_group(const GroupPtr & group, const SamplingPlan & plan, std::size_t count,
                                              std::string_view stream)
{
  std::vector<GroupElement> out;
  out.reserve(count);
  for (const auto & x : plan.coords(static_cast<std::size_t>(group->algebra_dim()), count, stream)) {
    out.push_back(exp(AlgebraVector(group, x)));
  }
  return out;
}

/// Pairs (g, h) drawn from one 2d-dimensional stream.
inline std::vector<std::pair<GroupElement, GroupElement>> sample_group_pairs(const GroupPtr & group,
                                                                             const SamplingPlan & plan,
                                                                             std::size_t count,
                                                                             std::string_view stream)
{
  auto d = group->algebra_dim();
  std::vector<std::pair<GroupElement, GroupElement>> out;
  out.reserve(count);
  for (const auto & x : plan.coords(static_cast<std::size_t>(2 * d), count, stream)) {
    out.emplace_back(exp(AlgebraVector(group, x.head(d))), exp(AlgebraVector(group, x.tail(d))));
  }
  return out;
}

/// Residual of W(gh) = dL_g W(h) + dR_h W(g).
inline double group_linear_residual(const VectorFieldG & W, const GroupElement & g, const GroupElement & h)
{
  GroupElement gh = compose(g, h);
  return (W.matrix_at(gh) - g.matrix() * W.matrix_at(h) - W.matrix_at(g) * h.matrix()).norm();
}

struct GroupLinearCheck
{
  ResidualStats stats;
  double at_identity{0.0};  ///< ||W(e)||_F, zero for every group-linear field
  bool passed{false};
};

inline GroupLinearCheck check_group_linear(const VectorFieldG & W, const SamplingPlan & plan, double tol = 1e-8)
{
  GroupLinearCheck out;
  for (const auto & [g, h] : sample_group_pairs(W.group(), plan, plan.group_samples, "group_linear")) {
    out.stats.add(group_linear_residual(W, g, h));
  }
  out.at_identity = W.matrix_at(GroupElement::identity(W.group())).norm();
  out.passed      = out.stats.below(tol);
  return out;
}

/// Residual of V(gh) = dL_g V(h) + dR_h V(g) - dL_g dR_h V(e).
inline double group_affine_residual(const VectorFieldG & V, const GroupElement & g, const GroupElement & h)
{
  GroupElement gh     = compose(g, h);
  Eigen::MatrixXd ve  = V.matrix_at(GroupElement::identity(V.group()));
  return (V.matrix_at(gh) - g.matrix() * V.matrix_at(h) - V.matrix_at(g) * h.matrix() + g.matrix() * ve * h.matrix())
    .norm();
}

}  // namespace weakinv
