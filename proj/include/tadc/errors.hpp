#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace tadc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite input or an argument outside the function's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An interval, threshold pair or estimate collapsed to zero width or zero mass.
class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what, std::optional<double> suggested = std::nullopt)
      : Error(what), suggested_(suggested) {}

  /// Fallback value the caller may substitute, when one exists.
  std::optional<double> suggested() const { return suggested_; }

 private:
  std::optional<double> suggested_;
};

class SingularInformationError : public Error {
 public:
  SingularInformationError(const std::string& what, Eigen::VectorXd direction)
      : Error(what), direction_(std::move(direction)) {}

  /// Unit vector spanning the (numerical) null space of the information matrix.
  const Eigen::VectorXd& direction() const { return direction_; }

 private:
  Eigen::VectorXd direction_;
};

/// The likelihood has no interior maximizer (saturated or separable outcomes).
class IdentifiabilityError : public Error {
 public:
  using Error::Error;
};

/// Pilot Gram matrix X X^H is rank deficient.
class SingularPilotError : public Error {
 public:
  using Error::Error;
};

class UnsupportedConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tadc
