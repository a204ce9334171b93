#include "tadc/likelihood.hpp"

#include <cmath>
#include <numbers>

#include "tadc/errors.hpp"
#include "tadc/numerics.hpp"

namespace tadc {

namespace {

constexpr double kLogFloor = -690.7755278982137;  // ln(1e-300)

void check_shapes(const QuantizedBits& Z, const Matrix& Xbar, const ParameterVector& eta) {
  if (Z.rows() != Xbar.rows()) throw ShapeError("likelihood: Zbar and Xbar row counts differ");
  if (Xbar.cols() != eta.gbar.size()) throw ShapeError("likelihood: Xbar columns do not match gbar");
}

// Second derivative of ln Q(x): -h(x)(x + h(x)) with h the hazard q/Q.
double log_cdf_curvature(double x, double h) { return -h * (x + h); }

}  // namespace

ParameterVector ParameterVector::from_reparam(const Vector& varsigma, double xi) {
  if (!(xi > 0)) throw IdentifiabilityError("ParameterVector: xi must be positive");
  return {varsigma / xi, 1.0 / xi};
}

void ParameterVector::validate() const {
  if (!(sigma > 0) || !std::isfinite(sigma)) throw DomainError("ParameterVector: sigma must be positive");
  if (!gbar.allFinite()) throw DomainError("ParameterVector: non-finite gbar");
}

double row_log_prob(AdcKind kind, std::uint8_t code, double a1, double a2) {
  if (kind == AdcKind::parallel_one_bit) {
    const double s1 = (code & 1u) ? 1.0 : -1.0;
    const double s2 = (code & 2u) ? 1.0 : -1.0;
    return log_std_normal_cdf(s1 * a1) + log_std_normal_cdf(s2 * a2);
  }
  switch (code) {
    case 0: return log_std_normal_cdf(-a1);
    case 1: return log_cdf_difference(a2, a1);
    case 3: return log_std_normal_cdf(a2);
    default: throw DomainError("row_log_prob: pattern [0,1] is not a T-ADC outcome");
  }
}

RowDerivatives row_log_prob_derivatives(AdcKind kind, std::uint8_t code, double a1, double a2) {
  RowDerivatives d;
  if (kind == AdcKind::parallel_one_bit) {
    const double s[2] = {(code & 1u) ? 1.0 : -1.0, (code & 2u) ? 1.0 : -1.0};
    const double a[2] = {a1, a2};
    for (int j = 0; j < 2; ++j) {
      const double x = s[j] * a[j];
      const double h = cdf_hazard(x);
      d.value += log_std_normal_cdf(x);
      d.grad(j) = s[j] * h;
      d.hess(j, j) = log_cdf_curvature(x, h);
    }
    return d;
  }
  switch (code) {
    case 0: {
      const double x = -a1;
      const double h = cdf_hazard(x);
      d.value = log_std_normal_cdf(x);
      d.grad(0) = -h;
      d.hess(0, 0) = log_cdf_curvature(x, h);
      return d;
    }
    case 3: {
      const double h = cdf_hazard(a2);
      d.value = log_std_normal_cdf(a2);
      d.grad(1) = h;
      d.hess(1, 1) = log_cdf_curvature(a2, h);
      return d;
    }
    case 1: {
      const double log_mass = log_cdf_difference(a2, a1);
      const double r1 = std::exp(log_std_normal_pdf(a1) - log_mass);
      const double r2 = std::exp(log_std_normal_pdf(a2) - log_mass);
      d.value = log_mass;
      d.grad << r1, -r2;
      d.hess << -a1 * r1 - r1 * r1, r1 * r2, r1 * r2, a2 * r2 - r2 * r2;
      return d;
    }
    default: throw DomainError("row_log_prob_derivatives: pattern [0,1] is not a T-ADC outcome");
  }
}

Eigen::Matrix2d row_information(AdcKind kind, double a1, double a2) {
  const double lq1 = log_std_normal_pdf(a1);
  const double lq2 = log_std_normal_pdf(a2);
  Eigen::Matrix2d I = Eigen::Matrix2d::Zero();
  if (kind == AdcKind::parallel_one_bit) {
    I(0, 0) = std::exp(2 * lq1 - log_std_normal_cdf(a1) - log_std_normal_cdf(-a1));
    I(1, 1) = std::exp(2 * lq2 - log_std_normal_cdf(a2) - log_std_normal_cdf(-a2));
    return I;
  }
  // Outcomes: [0,0] with Q(-a1), [1,0] with Q(a1) - Q(a2), [1,1] with Q(a2).
  I(0, 0) = std::exp(2 * lq1 - log_std_normal_cdf(-a1));
  I(1, 1) = std::exp(2 * lq2 - log_std_normal_cdf(a2));
  const double log_mass = log_cdf_difference(a2, a1);
  if (log_mass > kLogFloor) {
    I(0, 0) += std::exp(2 * lq1 - log_mass);
    I(1, 1) += std::exp(2 * lq2 - log_mass);
    I(0, 1) = I(1, 0) = -std::exp(lq1 + lq2 - log_mass);
  }
  return I;
}

Matrix standardized_args(const Matrix& Xbar, const ParameterVector& eta, const QuantizerSpec& spec) {
  if (!(eta.sigma > 0)) throw DomainError("standardized_args: sigma must be positive");
  if (Xbar.cols() != eta.gbar.size()) throw ShapeError("standardized_args: Xbar columns do not match gbar");
  const Vector s = Xbar * eta.gbar;
  const double k = std::numbers::sqrt2 / eta.sigma;
  Matrix A(s.size(), 2);
  A.col(0) = k * (s.array() - spec.tau1);
  A.col(1) = k * (s.array() - spec.tau2);
  return A;
}

double llf_po(const QuantizedBits& Z, const Matrix& Xbar, const ParameterVector& eta, const QuantizerSpec& spec) {
  check_shapes(Z, Xbar, eta);
  const Matrix A = standardized_args(Xbar, eta, spec);
  double total = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    total += row_log_prob(AdcKind::parallel_one_bit, Z.code(i), A(i, 0), A(i, 1));
  return total;
}

double llf_ternary(const QuantizedBits& Z, const Matrix& Xbar, const ParameterVector& eta,
                   const QuantizerSpec& spec) {
  check_shapes(Z, Xbar, eta);
  const Matrix A = standardized_args(Xbar, eta, spec);
  double total = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) total += row_log_prob(AdcKind::ternary, Z.code(i), A(i, 0), A(i, 1));
  return total;
}

double llf(const QuantizedBits& Z, const Matrix& Xbar, const ParameterVector& eta, const QuantizerSpec& spec) {
  return spec.kind == AdcKind::ternary ? llf_ternary(Z, Xbar, eta, spec) : llf_po(Z, Xbar, eta, spec);
}

Vector llf_gradient(const QuantizedBits& Z, const Matrix& Xbar, const ParameterVector& eta,
                    const QuantizerSpec& spec) {
  check_shapes(Z, Xbar, eta);
  const Matrix A = standardized_args(Xbar, eta, spec);
  const Eigen::Index n = eta.gbar.size();
  Vector g = Vector::Zero(n + 1);
  const double k = std::numbers::sqrt2 / eta.sigma;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const RowDerivatives d = row_log_prob_derivatives(spec.kind, Z.code(i), A(i, 0), A(i, 1));
    g.head(n) += k * (d.grad(0) + d.grad(1)) * Xbar.row(i).transpose();
    g(n) -= (d.grad(0) * A(i, 0) + d.grad(1) * A(i, 1)) / eta.sigma;
  }
  return g;
}

}  // namespace tadc
