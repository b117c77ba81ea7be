#pragma once

#include <stdexcept>
#include <string>

namespace weakinv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Operands belong to different groups or manifolds.
class DescriptorMismatch : public Error
{
public:
  using Error::Error;
};

/// A matrix violates the defining constraints of its group beyond tolerance.
class MembershipError : public Error
{
public:
  using Error::Error;
};

/// Logarithm requested at or near the cut locus.
class OutOfDomain : public Error
{
public:
  using Error::Error;
};

/// A matrix that should lie in the Lie algebra does not.
class InvalidTangent : public Error
{
public:
  using Error::Error;
};

/// The generator matrix is rank deficient at a point (action not infinitesimally free there).
class RankDeficient : public Error
{
public:
  using Error::Error;
};

/// Inputs that are structurally invalid for the requested computation.
class ConfigurationError : public Error
{
public:
  using Error::Error;
};

/// Integration left the configured blow-up bound.
class DivergenceError : public Error
{
public:
  DivergenceError(const std::string & what, double time) : Error(what), time_(time) {}
  [[nodiscard]] double time() const noexcept { return time_; }

private:
  double time_;
};

/// A derived quantity failed its consistency check (e.g. extracted W not group linear).
class ConsistencyError : public Error
{
public:
  ConsistencyError(const std::string & what, double residual) : Error(what), residual_(residual) {}
  [[nodiscard]] double residual() const noexcept { return residual_; }

private:
  double residual_;
};

}  // namespace weakinv
