#pragma once

#include <array>
#include <functional>
#include <optional>
#include <variant>

#include "manifold.hpp"
#include "vector_field_g.hpp"

namespace weakinv {

/// V(p) = A p + b.
struct AffineOnRNKind
{
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

/// V_i(p) = b_i + (A p)_i + p^T Q_i p.
struct QuadraticOnRNKind
{
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  std::vector<Eigen::MatrixXd> Q;
};

/// A field on G, viewed as a field on the manifold G.
struct GroupFieldKind
{};

/**
 * Parameters of the three-dimensional cascade family
 *   V(x, y, z) = (f1(x,y) + k x z, f2(x,y), c z + h(x,y)),
 * where f1, f2, h are quadratics with coefficients on [1, x, y, x^2, xy, y^2].
 * k = 0 makes V weakly invariant under z-translation.
 */
struct CascadeSyntheticKind
{
  std::array<double, 6> f1{};
  std::array<double, 6> f2{};
  std::array<double, 6> h{};
  double c{0.0};
  double xz_coupling{0.0};
};

struct CustomFieldKind
{};

using VectorFieldMKind = std::variant<AffineOnRNKind, QuadraticOnRNKind, GroupFieldKind, CascadeSyntheticKind, CustomFieldKind>;

/// A vector field on an embedded manifold, in ambient coordinates.
class VectorFieldM
{
public:
  using EvalFn = std::function<Eigen::VectorXd(const Eigen::VectorXd &)>;

  VectorFieldM(ManifoldPtr manifold, EvalFn eval, VectorFieldMKind kind = CustomFieldKind{},
               std::optional<VectorFieldG> lift = std::nullopt)
      : manifold_(std::move(manifold)), eval_(std::move(eval)), kind_(std::move(kind)), lift_(std::move(lift))
  {}

  [[nodiscard]] const ManifoldPtr & manifold() const noexcept { return manifold_; }
  [[nodiscard]] const VectorFieldMKind & kind() const noexcept { return kind_; }
  /// The underlying field on G when this field lives on a group manifold.
  [[nodiscard]] const std::optional<VectorFieldG> & group_lift() const noexcept { return lift_; }

  [[nodiscard]] Eigen::VectorXd at(const Eigen::VectorXd & p) const { return eval_(p); }

  [[nodiscard]] TangentVectorM operator()(const ManifoldPoint & p) const
  {
    require_same_manifold(manifold_, p.manifold, "VectorFieldM");
    return {p, eval_(p.coords)};
  }

private:
  ManifoldPtr manifold_;
  EvalFn eval_;
  VectorFieldMKind kind_;
  std::optional<VectorFieldG> lift_;
};

inline VectorFieldM affine_field(const Eigen::MatrixXd & A, const Eigen::VectorXd & b, double excluded_radius = 0.0)
{
  if (A.rows() != A.cols() || A.rows() != b.size()) { throw DescriptorMismatch("affine field: A must be NxN and b length N"); }
  return {Manifold::euclidean(A.rows(), excluded_radius),
          [A, b](const Eigen::VectorXd & p) -> Eigen::VectorXd { return A * p + b; },
          AffineOnRNKind{A, b}};
}

inline VectorFieldM quadratic_field(const Eigen::MatrixXd & A, const Eigen::VectorXd & b, const std::vector<Eigen::MatrixXd> & Q,
                                    double excluded_radius = 0.0)
{
  auto n = A.rows();
  if (A.cols() != n || b.size() != n || static_cast<Eigen::Index>(Q.size()) != n) {
    throw DescriptorMismatch("quadratic field: need NxN A, length-N b and N matrices Q");
  }
  for (const auto & q : Q) {
    if (q.rows() != n || q.cols() != n) { throw DescriptorMismatch("quadratic field: every Q_i must be NxN"); }
  }
  return {Manifold::euclidean(n, excluded_radius),
          [A, b, Q](const Eigen::VectorXd & p) -> Eigen::VectorXd {
            Eigen::VectorXd out = A * p + b;
            for (std::size_t i = 0; i < Q.size(); ++i) { out(static_cast<Eigen::Index>(i)) += p.dot(Q[i] * p); }
            return out;
          },
          QuadraticOnRNKind{A, b, Q}};
}

/// A field on G lifted to the manifold G (row-major flattened matrices).
inline VectorFieldM lifted_field(const VectorFieldG & W)
{
  auto G = W.group();
  auto n = G->matrix_dim();
  return {Manifold::group(G),
          [W, G, n](const Eigen::VectorXd & p) -> Eigen::VectorXd {
            return flatten(W.matrix_at(GroupElement(G, unflatten(p, n), false)));
          },
          GroupFieldKind{}, W};
}

namespace detail {
inline double quad2(const std::array<double, 6> & c, double x, double y)
{
  return c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y;
}
}  // namespace detail

inline VectorFieldM cascade_synthetic_field(const CascadeSyntheticKind & k)
{
  return {Manifold::euclidean(3),
          [k](const Eigen::VectorXd & p) -> Eigen::VectorXd {
            double x = p(0);
            double y = p(1);
            double z = p(2);
            Eigen::VectorXd v(3);
            v << detail::quad2(k.f1, x, y) + k.xz_coupling * x * z, detail::quad2(k.f2, x, y), k.c * z + detail::quad2(k.h, x, y);
            return v;
          },
          k};
}

}  // namespace weakinv
