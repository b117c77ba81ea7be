#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"

namespace weakinv {

enum class GroupKind { TranslationRn, SO2, SO3, SE2, SE3, DirectProduct };

class LieGroup;
using GroupPtr = std::shared_ptr<const LieGroup>;

/// Row-major flattening, the ambient coordinate convention for matrices.
inline Eigen::VectorXd flatten(const Eigen::MatrixXd & m)
{
  Eigen::VectorXd v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) { v(i * m.cols() + j) = m(i, j); }
  }
  return v;
}

inline Eigen::MatrixXd unflatten(const Eigen::VectorXd & v, Eigen::Index n)
{
  if (v.size() != n * n) { throw DescriptorMismatch("unflatten: expected " + std::to_string(n * n) + " coordinates"); }
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) { m(i, j) = v(i * n + j); }
  }
  return m;
}

inline Eigen::Matrix3d skew3(const Eigen::Vector3d & w)
{
  Eigen::Matrix3d s;
  s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return s;
}

/// Nearest rotation (polar factor) of a square matrix.
inline Eigen::MatrixXd nearest_rotation(const Eigen::MatrixXd & a)
{
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd u = svd.matrixU();
  Eigen::MatrixXd r = u * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    u.col(u.cols() - 1) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

/**
 * @brief Descriptor of an embedded matrix Lie group.
 *
 * Embeddings and algebra bases:
 *  - R^n:  (n+1)x(n+1) homogeneous translations, basis E_i = e_i e_n^T.
 *  - SO2:  2x2 rotations, basis J = [[0,-1],[1,0]].
 *  - SO3:  3x3 rotations, basis Lx, Ly, Lz with hat(w) = [w]x.
 *  - SE2:  3x3 homogeneous, coordinates (vx, vy, w).
 *  - SE3:  4x4 homogeneous, coordinates (vx, vy, vz, wx, wy, wz).
 *  - products: block-diagonal, coordinates concatenated in factor order.
 *
 * Descriptors are immutable and shared. Two descriptors denote the same
 * group iff their names are equal.
 */
class LieGroup
{
public:
  static GroupPtr translation(int n)
  {
    if (n < 1) { throw ConfigurationError("translation group needs n >= 1"); }
    auto g   = std::shared_ptr<LieGroup>(new LieGroup(GroupKind::TranslationRn, "R" + std::to_string(n), n + 1, n));
    g->n_    = n;
    for (int i = 0; i < n; ++i) {
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n + 1, n + 1);
      b(i, n)           = 1.0;
      g->basis_.push_back(b);
    }
    g->finish();
    return g;
  }

  static GroupPtr so2()
  {
    auto g = std::shared_ptr<LieGroup>(new LieGroup(GroupKind::SO2, "SO2", 2, 1));
    g->n_  = 2;
    Eigen::MatrixXd j(2, 2);
    j << 0.0, -1.0, 1.0, 0.0;
    g->basis_.push_back(j);
    g->finish();
    return g;
  }

  static GroupPtr so3()
  {
    auto g = std::shared_ptr<LieGroup>(new LieGroup(GroupKind::SO3, "SO3", 3, 3));
    g->n_  = 3;
    for (int i = 0; i < 3; ++i) { g->basis_.emplace_back(skew3(Eigen::Vector3d::Unit(i))); }
    g->finish();
    return g;
  }

  static GroupPtr se2()
  {
    auto g = std::shared_ptr<LieGroup>(new LieGroup(GroupKind::SE2, "SE2", 3, 3));
    g->n_  = 2;
    for (int i = 0; i < 2; ++i) {
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 3);
      b(i, 2)           = 1.0;
      g->basis_.push_back(b);
    }
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(3, 3);
    j(0, 1)           = -1.0;
    j(1, 0)           = 1.0;
    g->basis_.push_back(j);
    g->finish();
    return g;
  }

  static GroupPtr se3()
  {
    auto g = std::shared_ptr<LieGroup>(new LieGroup(GroupKind::SE3, "SE3", 4, 6));
    g->n_  = 3;
    for (int i = 0; i < 3; ++i) {
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4, 4);
      b(i, 3)           = 1.0;
      g->basis_.push_back(b);
    }
    for (int i = 0; i < 3; ++i) {
      Eigen::MatrixXd b          = Eigen::MatrixXd::Zero(4, 4);
      b.topLeftCorner(3, 3)      = skew3(Eigen::Vector3d::Unit(i));
      g->basis_.push_back(b);
    }
    g->finish();
    return g;
  }

  static GroupPtr product(std::vector<GroupPtr> factors)
  {
    if (factors.size() < 2) { throw ConfigurationError("direct product needs at least two factors"); }
    std::string name;
    Eigen::Index m = 0;
    Eigen::Index d = 0;
    for (const auto & f : factors) {
      if (!name.empty()) { name += "*"; }
      name += f->name();
      m += f->matrix_dim();
      d += f->algebra_dim();
    }
    auto g = std::shared_ptr<LieGroup>(new LieGroup(GroupKind::DirectProduct, name, m, d));
    Eigen::Index mo = 0;
    for (const auto & f : factors) {
      g->matrix_offsets_.push_back(mo);
      for (const auto & fb : f->basis()) {
        Eigen::MatrixXd b                                         = Eigen::MatrixXd::Zero(m, m);
        b.block(mo, mo, f->matrix_dim(), f->matrix_dim()) = fb;
        g->basis_.push_back(b);
      }
      mo += f->matrix_dim();
    }
    g->factors_ = std::move(factors);
    g->finish();
    return g;
  }

  [[nodiscard]] GroupKind kind() const noexcept { return kind_; }
  [[nodiscard]] const std::string & name() const noexcept { return name_; }
  [[nodiscard]] Eigen::Index matrix_dim() const noexcept { return matrix_dim_; }
  [[nodiscard]] Eigen::Index algebra_dim() const noexcept { return algebra_dim_; }
  [[nodiscard]] const std::vector<Eigen::MatrixXd> & basis() const noexcept { return basis_; }
  [[nodiscard]] const std::vector<GroupPtr> & factors() const noexcept { return factors_; }
  [[nodiscard]] double membership_tolerance() const noexcept { return membership_tol_; }

  [[nodiscard]] bool same_as(const LieGroup & other) const noexcept { return name_ == other.name_; }

  [[nodiscard]] Eigen::MatrixXd identity_matrix() const { return Eigen::MatrixXd::Identity(matrix_dim_, matrix_dim_); }

  [[nodiscard]] Eigen::MatrixXd hat(const Eigen::VectorXd & xi) const
  {
    check_coords(xi);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(matrix_dim_, matrix_dim_);
    for (Eigen::Index i = 0; i < algebra_dim_; ++i) { x += xi(i) * basis_[static_cast<std::size_t>(i)]; }
    return x;
  }

  /// Least-squares algebra coordinates of an ambient matrix.
  [[nodiscard]] Eigen::VectorXd vee(const Eigen::MatrixXd & x) const
  {
    check_square(x);
    return vee_projector_ * flatten(x);
  }

  /// ||X - hat(vee(X))||_F: distance of X from the algebra.
  [[nodiscard]] double algebra_residual(const Eigen::MatrixXd & x) const { return (x - hat(vee(x))).norm(); }

  /// Distance of a matrix from the group's defining constraints.
  [[nodiscard]] double membership_residual(const Eigen::MatrixXd & g) const
  {
    check_square(g);
    switch (kind_) {
      case GroupKind::TranslationRn: {
        Eigen::MatrixXd ref          = identity_matrix();
        ref.col(n_).head(n_)         = g.col(n_).head(n_);
        return (g - ref).norm();
      }
      case GroupKind::SO2:
      case GroupKind::SO3: return rotation_residual(g);
      case GroupKind::SE2:
      case GroupKind::SE3: {
        double r = rotation_residual(g.topLeftCorner(n_, n_));
        Eigen::RowVectorXd last = Eigen::RowVectorXd::Zero(n_ + 1);
        last(n_)                = 1.0;
        return r + (g.row(n_) - last).norm();
      }
      case GroupKind::DirectProduct: {
        double r      = 0.0;
        Eigen::MatrixXd rest = g;
        for (std::size_t i = 0; i < factors_.size(); ++i) {
          auto o = matrix_offsets_[i];
          auto k = factors_[i]->matrix_dim();
          r += factors_[i]->membership_residual(g.block(o, o, k, k));
          rest.block(o, o, k, k).setZero();
        }
        return r + rest.norm();
      }
    }
    return 0.0;
  }

  /// Closed-form exponential per group; products use scaling-and-squaring.
  [[nodiscard]] Eigen::MatrixXd exp(const Eigen::VectorXd & xi) const
  {
    check_coords(xi);
    switch (kind_) {
      case GroupKind::TranslationRn: return identity_matrix() + hat(xi);
      case GroupKind::SO2: return rot2(xi(0));
      case GroupKind::SO3: return so3_exp(xi);
      case GroupKind::SE2: {
        double th = xi(2);
        Eigen::MatrixXd g          = identity_matrix();
        g.topLeftCorner(2, 2)      = rot2(th);
        g.topRightCorner(2, 1)     = se2_v(th) * xi.head(2);
        return g;
      }
      case GroupKind::SE3: {
        Eigen::Vector3d w          = xi.tail(3);
        Eigen::MatrixXd g          = identity_matrix();
        g.topLeftCorner(3, 3)      = so3_exp(w);
        g.topRightCorner(3, 1)     = se3_v(w) * Eigen::Vector3d(xi.head(3));
        return g;
      }
      case GroupKind::DirectProduct: {
        Eigen::MatrixXd x = hat(xi);
        return x.exp();
      }
    }
    return identity_matrix();
  }

  /// Principal logarithm. Throws OutOfDomain within 1e-6 of the rotation cut locus.
  [[nodiscard]] Eigen::VectorXd log(const Eigen::MatrixXd & g) const
  {
    check_square(g);
    switch (kind_) {
      case GroupKind::TranslationRn: return g.col(n_).head(n_);
      case GroupKind::SO2: {
        Eigen::VectorXd out(1);
        out(0) = so2_angle(g);
        return out;
      }
      case GroupKind::SO3: return so3_log(g);
      case GroupKind::SE2: {
        double th = so2_angle(g.topLeftCorner(2, 2));
        Eigen::VectorXd out(3);
        out.head(2) = se2_v(th).inverse() * g.topRightCorner(2, 1);
        out(2)      = th;
        return out;
      }
      case GroupKind::SE3: {
        Eigen::Vector3d w = so3_log(g.topLeftCorner(3, 3));
        Eigen::VectorXd out(6);
        out.head(3) = se3_v_inv(w) * Eigen::Vector3d(g.topRightCorner(3, 1));
        out.tail(3) = w;
        return out;
      }
      case GroupKind::DirectProduct: {
        Eigen::VectorXd out(algebra_dim_);
        Eigen::Index a = 0;
        for (std::size_t i = 0; i < factors_.size(); ++i) {
          auto o = matrix_offsets_[i];
          auto k = factors_[i]->matrix_dim();
          auto d = factors_[i]->algebra_dim();
          out.segment(a, d) = factors_[i]->log(g.block(o, o, k, k));
          a += d;
        }
        return out;
      }
    }
    return Eigen::VectorXd::Zero(algebra_dim_);
  }

  [[nodiscard]] Eigen::MatrixXd inverse(const Eigen::MatrixXd & g) const
  {
    check_square(g);
    switch (kind_) {
      case GroupKind::TranslationRn: {
        Eigen::MatrixXd out          = identity_matrix();
        out.col(n_).head(n_)         = -g.col(n_).head(n_);
        return out;
      }
      case GroupKind::SO2:
      case GroupKind::SO3: return g.transpose();
      case GroupKind::SE2:
      case GroupKind::SE3: {
        Eigen::MatrixXd out          = identity_matrix();
        Eigen::MatrixXd rt           = g.topLeftCorner(n_, n_).transpose();
        out.topLeftCorner(n_, n_)    = rt;
        out.topRightCorner(n_, 1)    = -rt * g.topRightCorner(n_, 1);
        return out;
      }
      case GroupKind::DirectProduct: {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(matrix_dim_, matrix_dim_);
        for (std::size_t i = 0; i < factors_.size(); ++i) {
          auto o                          = matrix_offsets_[i];
          auto k                          = factors_[i]->matrix_dim();
          out.block(o, o, k, k)           = factors_[i]->inverse(g.block(o, o, k, k));
        }
        return out;
      }
    }
    return g.inverse();
  }

  /// Nearest group element in the embedding (polar projection of rotation blocks).
  [[nodiscard]] Eigen::MatrixXd project(const Eigen::MatrixXd & g) const
  {
    check_square(g);
    switch (kind_) {
      case GroupKind::TranslationRn: {
        Eigen::MatrixXd out  = identity_matrix();
        out.col(n_).head(n_) = g.col(n_).head(n_);
        return out;
      }
      case GroupKind::SO2:
      case GroupKind::SO3: return nearest_rotation(g);
      case GroupKind::SE2:
      case GroupKind::SE3: {
        Eigen::MatrixXd out       = identity_matrix();
        out.topLeftCorner(n_, n_) = nearest_rotation(g.topLeftCorner(n_, n_));
        out.topRightCorner(n_, 1) = g.topRightCorner(n_, 1);
        return out;
      }
      case GroupKind::DirectProduct: {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(matrix_dim_, matrix_dim_);
        for (std::size_t i = 0; i < factors_.size(); ++i) {
          auto o                = matrix_offsets_[i];
          auto k                = factors_[i]->matrix_dim();
          out.block(o, o, k, k) = factors_[i]->project(g.block(o, o, k, k));
        }
        return out;
      }
    }
    return g;
  }

private:
  LieGroup(GroupKind kind, std::string name, Eigen::Index m, Eigen::Index d)
      : kind_(kind), name_(std::move(name)), matrix_dim_(m), algebra_dim_(d)
  {}

  void finish()
  {
    Eigen::MatrixXd stacked(algebra_dim_, matrix_dim_ * matrix_dim_);
    for (Eigen::Index i = 0; i < algebra_dim_; ++i) { stacked.row(i) = flatten(basis_[static_cast<std::size_t>(i)]).transpose(); }
    // basis rows are orthogonal for every builtin group, but use the general pseudo-inverse
    vee_projector_ = stacked.completeOrthogonalDecomposition().pseudoInverse().transpose();
  }

  void check_coords(const Eigen::VectorXd & xi) const
  {
    if (xi.size() != algebra_dim_) {
      throw DescriptorMismatch(name_ + ": expected " + std::to_string(algebra_dim_) + " algebra coordinates, got " +
                               std::to_string(xi.size()));
    }
  }

  void check_square(const Eigen::MatrixXd & m) const
  {
    if (m.rows() != matrix_dim_ || m.cols() != matrix_dim_) {
      throw DescriptorMismatch(name_ + ": expected " + std::to_string(matrix_dim_) + "x" + std::to_string(matrix_dim_) +
                               " matrix");
    }
  }

  static double rotation_residual(const Eigen::MatrixXd & r)
  {
    double res = (r.transpose() * r - Eigen::MatrixXd::Identity(r.rows(), r.cols())).norm();
    if (r.determinant() < 0.0) { res += 2.0; }
    return res;
  }

  static Eigen::MatrixXd rot2(double th)
  {
    Eigen::MatrixXd r(2, 2);
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    return r;
  }

  static double so2_angle(const Eigen::MatrixXd & r)
  {
    double th = std::atan2(r(1, 0), r(0, 0));
    if (std::numbers::pi - std::abs(th) < kCutLocusMargin) { throw OutOfDomain("SO2 log: angle at the cut locus"); }
    return th;
  }

  static Eigen::Matrix2d se2_v(double th)
  {
    double a = 0.0;
    double b = 0.0;
    if (std::abs(th) < 1e-6) {
      a = 1.0 - th * th / 6.0;
      b = th / 2.0 - th * th * th / 24.0;
    } else {
      a = std::sin(th) / th;
      b = (1.0 - std::cos(th)) / th;
    }
    Eigen::Matrix2d v;
    v << a, -b, b, a;
    return v;
  }

  static Eigen::Matrix3d so3_exp(const Eigen::Vector3d & w)
  {
    double th2 = w.squaredNorm();
    double th  = std::sqrt(th2);
    double a   = 0.0;
    double b   = 0.0;
    if (th < 1e-5) {
      a = 1.0 - th2 / 6.0;
      b = 0.5 - th2 / 24.0;
    } else {
      a = std::sin(th) / th;
      b = (1.0 - std::cos(th)) / th2;
    }
    Eigen::Matrix3d s = skew3(w);
    return Eigen::Matrix3d::Identity() + a * s + b * s * s;
  }

  static Eigen::Vector3d so3_log(const Eigen::MatrixXd & r)
  {
    double c  = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    double th = std::acos(c);
    if (std::numbers::pi - th < kCutLocusMargin) { throw OutOfDomain("SO3 log: rotation angle at the cut locus"); }
    Eigen::Vector3d v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    double f = th < 1e-5 ? 0.5 + th * th / 12.0 : th / (2.0 * std::sin(th));
    return f * v;
  }

  static Eigen::Matrix3d se3_v(const Eigen::Vector3d & w)
  {
    double th2 = w.squaredNorm();
    double th  = std::sqrt(th2);
    double b   = 0.0;
    double c   = 0.0;
    if (th < 1e-5) {
      b = 0.5 - th2 / 24.0;
      c = 1.0 / 6.0 - th2 / 120.0;
    } else {
      b = (1.0 - std::cos(th)) / th2;
      c = (th - std::sin(th)) / (th2 * th);
    }
    Eigen::Matrix3d s = skew3(w);
    return Eigen::Matrix3d::Identity() + b * s + c * s * s;
  }

  static Eigen::Matrix3d se3_v_inv(const Eigen::Vector3d & w)
  {
    double th2 = w.squaredNorm();
    double th  = std::sqrt(th2);
    double c   = 0.0;
    if (th < 1e-5) {
      c = 1.0 / 12.0 + th2 / 720.0;
    } else {
      c = (1.0 - th * std::sin(th) / (2.0 * (1.0 - std::cos(th)))) / th2;
    }
    Eigen::Matrix3d s = skew3(w);
    return Eigen::Matrix3d::Identity() - 0.5 * s + c * s * s;
  }

  static constexpr double kCutLocusMargin = 1e-6;

  GroupKind kind_;
  std::string name_;
  Eigen::Index matrix_dim_;
  Eigen::Index algebra_dim_;
  int n_{0};
  std::vector<Eigen::MatrixXd> basis_;
  std::vector<GroupPtr> factors_;
  std::vector<Eigen::Index> matrix_offsets_;
  Eigen::MatrixXd vee_projector_;
  double membership_tol_{1e-9};
};

inline void require_same_group(const GroupPtr & a, const GroupPtr & b, const char * where)
{
  if (!a || !b || !a->same_as(*b)) {
    throw DescriptorMismatch(std::string(where) + ": group mismatch (" + (a ? a->name() : "null") + " vs " +
                             (b ? b->name() : "null") + ")");
  }
}

/// An element of a matrix Lie group.
class GroupElement
{
public:
  /// Validates membership unless `check` is false (used for intermediate ambient states).
  GroupElement(GroupPtr group, Eigen::MatrixXd matrix, bool check = true) : group_(std::move(group)), matrix_(std::move(matrix))
  {
    if (!group_) { throw ConfigurationError("GroupElement without a group"); }
    if (check) {
      double r = group_->membership_residual(matrix_);
      if (!(r < group_->membership_tolerance())) {
        throw MembershipError(group_->name() + ": membership residual " + std::to_string(r) + " exceeds tolerance");
      }
    }
  }

  static GroupElement identity(const GroupPtr & group) { return {group, group->identity_matrix(), false}; }

  [[nodiscard]] const GroupPtr & group() const noexcept { return group_; }
  [[nodiscard]] const Eigen::MatrixXd & matrix() const noexcept { return matrix_; }

private:
  GroupPtr group_;
  Eigen::MatrixXd matrix_;
};

/// Coordinates of a Lie algebra element in the group's fixed basis.
struct AlgebraVector
{
  GroupPtr group;
  Eigen::VectorXd coords;

  AlgebraVector(GroupPtr g, Eigen::VectorXd c) : group(std::move(g)), coords(std::move(c))
  {
    if (coords.size() != group->algebra_dim()) { throw DescriptorMismatch(group->name() + ": wrong algebra dimension"); }
  }

  static AlgebraVector zero(const GroupPtr & g) { return {g, Eigen::VectorXd::Zero(g->algebra_dim())}; }

  [[nodiscard]] Eigen::MatrixXd matrix() const { return group->hat(coords); }
};

/// A tangent vector at `base`, stored as an ambient matrix.
struct TangentVectorG
{
  GroupElement base;
  Eigen::MatrixXd matrix;

  /// Distance of base^{-1} * matrix from the algebra.
  [[nodiscard]] double tangent_residual() const
  {
    return base.group()->algebra_residual(base.group()->inverse(base.matrix()) * matrix);
  }
};

inline GroupElement compose(const GroupElement & a, const GroupElement & b)
{
  require_same_group(a.group(), b.group(), "compose");
  return {a.group(), a.matrix() * b.matrix()};
}

inline GroupElement inverse(const GroupElement & g) { return {g.group(), g.group()->inverse(g.matrix()), false}; }

inline GroupElement exp(const AlgebraVector & xi) { return {xi.group, xi.group->exp(xi.coords)}; }

inline AlgebraVector log(const GroupElement & g) { return {g.group(), g.group()->log(g.matrix())}; }

/// dL_g: T_h G -> T_{gh} G.
inline TangentVectorG dLeft(const GroupElement & g, const TangentVectorG & v)
{
  require_same_group(g.group(), v.base.group(), "dLeft");
  return {GroupElement(g.group(), g.matrix() * v.base.matrix(), false), g.matrix() * v.matrix};
}

/// dR_h: T_g G -> T_{gh} G.
inline TangentVectorG dRight(const GroupElement & h, const TangentVectorG & v)
{
  require_same_group(h.group(), v.base.group(), "dRight");
  return {GroupElement(h.group(), v.base.matrix() * h.matrix(), false), v.matrix * h.matrix()};
}

/// Identity tangent vector e -> xi, i.e. xi viewed in T_e G.
inline TangentVectorG at_identity(const AlgebraVector & xi) { return {GroupElement::identity(xi.group), xi.matrix()}; }

/// Matrix commutator [A, B] = AB - BA.
inline Eigen::MatrixXd bracket(const Eigen::MatrixXd & a, const Eigen::MatrixXd & b) { return a * b - b * a; }

}  // namespace weakinv
