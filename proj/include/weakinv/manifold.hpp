#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lie_group.hpp"
#include "sampling.hpp"

namespace weakinv {

enum class ManifoldKind { EuclideanRN, MatrixGroup, Product };

class Manifold;
using ManifoldPtr = std::shared_ptr<const Manifold>;

/**
 * @brief An embedded manifold with ambient coordinates in R^N.
 *
 * Matrix groups are embedded by row-major flattening. Euclidean spaces may
 * carry an excluded ball around the origin (e.g. R^2 minus {0}); it is
 * honoured by sampling only.
 */
class Manifold
{
public:
  static ManifoldPtr euclidean(Eigen::Index n, double excluded_radius = 0.0)
  {
    if (n < 1) { throw ConfigurationError("euclidean manifold needs dimension >= 1"); }
    std::string name = "R" + std::to_string(n);
    if (excluded_radius > 0.0) { name += "\\0"; }
    auto m              = std::shared_ptr<Manifold>(new Manifold(ManifoldKind::EuclideanRN, name, n));
    m->excluded_radius_ = excluded_radius;
    return m;
  }

  static ManifoldPtr group(const GroupPtr & g)
  {
    auto m    = std::shared_ptr<Manifold>(new Manifold(ManifoldKind::MatrixGroup, g->name(), g->matrix_dim() * g->matrix_dim()));
    m->group_ = g;
    return m;
  }

  static ManifoldPtr product(std::vector<ManifoldPtr> factors)
  {
    if (factors.size() < 2) { throw ConfigurationError("product manifold needs at least two factors"); }
    std::string name;
    Eigen::Index n = 0;
    for (const auto & f : factors) {
      if (!name.empty()) { name += "*"; }
      name += f->name();
      n += f->ambient_dim();
    }
    auto m      = std::shared_ptr<Manifold>(new Manifold(ManifoldKind::Product, name, n));
    m->factors_ = std::move(factors);
    return m;
  }

  [[nodiscard]] ManifoldKind kind() const noexcept { return kind_; }
  [[nodiscard]] const std::string & name() const noexcept { return name_; }
  [[nodiscard]] Eigen::Index ambient_dim() const noexcept { return ambient_dim_; }
  [[nodiscard]] const GroupPtr & group() const noexcept { return group_; }
  [[nodiscard]] const std::vector<ManifoldPtr> & factors() const noexcept { return factors_; }
  [[nodiscard]] double excluded_radius() const noexcept { return excluded_radius_; }
  [[nodiscard]] bool same_as(const Manifold & o) const noexcept { return name_ == o.name_; }

  [[nodiscard]] double constraint_residual(const Eigen::VectorXd & x) const
  {
    check_dim(x);
    switch (kind_) {
      case ManifoldKind::EuclideanRN: return 0.0;
      case ManifoldKind::MatrixGroup: return group_->membership_residual(unflatten(x, group_->matrix_dim()));
      case ManifoldKind::Product: {
        double r       = 0.0;
        Eigen::Index o = 0;
        for (const auto & f : factors_) {
          r += f->constraint_residual(x.segment(o, f->ambient_dim()));
          o += f->ambient_dim();
        }
        return r;
      }
    }
    return 0.0;
  }

  /// Distance of `dir` from the tangent space at `x`.
  [[nodiscard]] double tangent_residual(const Eigen::VectorXd & x, const Eigen::VectorXd & dir) const
  {
    check_dim(x);
    check_dim(dir);
    switch (kind_) {
      case ManifoldKind::EuclideanRN: return 0.0;
      case ManifoldKind::MatrixGroup: {
        auto n = group_->matrix_dim();
        return group_->algebra_residual(group_->inverse(unflatten(x, n)) * unflatten(dir, n));
      }
      case ManifoldKind::Product: {
        double r       = 0.0;
        Eigen::Index o = 0;
        for (const auto & f : factors_) {
          r += f->tangent_residual(x.segment(o, f->ambient_dim()), dir.segment(o, f->ambient_dim()));
          o += f->ambient_dim();
        }
        return r;
      }
    }
    return 0.0;
  }

  /// Nearest point on the manifold (polar projection for rotation blocks).
  [[nodiscard]] Eigen::VectorXd project(const Eigen::VectorXd & x) const
  {
    check_dim(x);
    switch (kind_) {
      case ManifoldKind::EuclideanRN: return x;
      case ManifoldKind::MatrixGroup: return flatten(group_->project(unflatten(x, group_->matrix_dim())));
      case ManifoldKind::Product: {
        Eigen::VectorXd out(x.size());
        Eigen::Index o = 0;
        for (const auto & f : factors_) {
          out.segment(o, f->ambient_dim()) = f->project(x.segment(o, f->ambient_dim()));
          o += f->ambient_dim();
        }
        return out;
      }
    }
    return x;
  }

  [[nodiscard]] std::vector<Eigen::VectorXd> sample(const SamplingPlan & plan, std::size_t count, std::string_view stream) const
  {
    switch (kind_) {
      case ManifoldKind::EuclideanRN: {
        if (excluded_radius_ <= 0.0) { return plan.coords(static_cast<std::size_t>(ambient_dim_), count, stream); }
        std::vector<Eigen::VectorXd> out;
        std::size_t want = count;
        while (out.size() < count) {
          want *= 2;
          out.clear();
          for (auto & x : plan.coords(static_cast<std::size_t>(ambient_dim_), want, stream)) {
            if (x.norm() > excluded_radius_ && out.size() < count) { out.push_back(std::move(x)); }
          }
        }
        return out;
      }
      case ManifoldKind::MatrixGroup: {
        std::vector<Eigen::VectorXd> out;
        for (const auto & x : plan.coords(static_cast<std::size_t>(group_->algebra_dim()), count, stream)) {
          out.push_back(flatten(group_->exp(x)));
        }
        return out;
      }
      case ManifoldKind::Product: {
        std::vector<Eigen::VectorXd> out(count, Eigen::VectorXd(ambient_dim_));
        Eigen::Index o = 0;
        int k          = 0;
        for (const auto & f : factors_) {
          auto part = f->sample(plan, count, std::string(stream) + "/" + std::to_string(k++));
          for (std::size_t i = 0; i < count; ++i) { out[i].segment(o, f->ambient_dim()) = part[i]; }
          o += f->ambient_dim();
        }
        return out;
      }
    }
    return {};
  }

  void check_dim(const Eigen::VectorXd & x) const
  {
    if (x.size() != ambient_dim_) {
      throw DescriptorMismatch(name_ + ": expected " + std::to_string(ambient_dim_) + " ambient coordinates, got " +
                               std::to_string(x.size()));
    }
  }

private:
  Manifold(ManifoldKind kind, std::string name, Eigen::Index n) : kind_(kind), name_(std::move(name)), ambient_dim_(n) {}

  ManifoldKind kind_;
  std::string name_;
  Eigen::Index ambient_dim_;
  GroupPtr group_;
  std::vector<ManifoldPtr> factors_;
  double excluded_radius_{0.0};
};

inline void require_same_manifold(const ManifoldPtr & a, const ManifoldPtr & b, const char * where)
{
  if (!a || !b || !a->same_as(*b)) {
    throw DescriptorMismatch(std::string(where) + ": manifold mismatch (" + (a ? a->name() : "null") + " vs " +
                             (b ? b->name() : "null") + ")");
  }
}

struct ManifoldPoint
{
  ManifoldPtr manifold;
  Eigen::VectorXd coords;

  ManifoldPoint(ManifoldPtr m, Eigen::VectorXd c) : manifold(std::move(m)), coords(std::move(c)) { manifold->check_dim(coords); }

  /// Matrix view for points of a matrix group.
  [[nodiscard]] Eigen::MatrixXd as_matrix() const
  {
    if (manifold->kind() != ManifoldKind::MatrixGroup) { throw DescriptorMismatch("as_matrix: not a matrix-group manifold"); }
    return unflatten(coords, manifold->group()->matrix_dim());
  }
};

struct TangentVectorM
{
  ManifoldPoint base;
  Eigen::VectorXd dir;
};

}  // namespace weakinv
