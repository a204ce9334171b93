#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "tadc/quantizers.hpp"
#include "tadc/signal_model.hpp"

namespace tadc {

/// eta = [gbar; sigma] for one antenna (gbar of length 2K), or chi when gbar
/// stacks all M antennas.
struct ParameterVector {
  Vector gbar;
  double sigma = 1.0;

  Vector varsigma() const { return gbar / sigma; }
  double xi() const { return 1.0 / sigma; }
  static ParameterVector from_reparam(const Vector& varsigma, double xi);
  void validate() const;
};

/// Log-probability of one quantized row given its standardized arguments
/// a_j = sqrt(2)(s - tau_j)/sigma. For the T-ADC the code 2 ([0,1]) is invalid.
double row_log_prob(AdcKind kind, std::uint8_t code, double a1, double a2);

struct RowDerivatives {
  double value = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};

/// Value, gradient and Hessian of row_log_prob with respect to (a1, a2).
RowDerivatives row_log_prob_derivatives(AdcKind kind, std::uint8_t code, double a1, double a2);

/// Expected information of one row in (a1, a2) coordinates:
/// sum over outcomes of grad p grad p^T / p.
Eigen::Matrix2d row_information(AdcKind kind, double a1, double a2);

/// [A]_{i,j} = sqrt(2)([Xbar gbar]_i - tau_j)/sigma, columns ordered (tau1, tau2).
Matrix standardized_args(const Matrix& Xbar, const ParameterVector& eta, const QuantizerSpec& spec);

double llf_po(const QuantizedBits& Z, const Matrix& Xbar, const ParameterVector& eta, const QuantizerSpec& spec);
double llf_ternary(const QuantizedBits& Z, const Matrix& Xbar, const ParameterVector& eta,
                   const QuantizerSpec& spec);
/// Dispatches on spec.kind.
double llf(const QuantizedBits& Z, const Matrix& Xbar, const ParameterVector& eta, const QuantizerSpec& spec);

/// Gradient of llf with respect to eta = [gbar; sigma].
Vector llf_gradient(const QuantizedBits& Z, const Matrix& Xbar, const ParameterVector& eta,
                    const QuantizerSpec& spec);

}  // namespace tadc
