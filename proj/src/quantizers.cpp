#include "tadc/quantizers.hpp"

#include <cmath>
#include <limits>

#include "tadc/errors.hpp"
#include "tadc/numerics.hpp"

namespace tadc {

QuantizerSpec QuantizerSpec::symmetric(AdcKind kind, double tau2) {
  QuantizerSpec s;
  s.kind = kind;
  s.tau1 = -tau2;
  s.tau2 = tau2;
  s.validate();
  return s;
}

QuantizerSpec QuantizerSpec::with_labels(double input_power, double delta) const {
  QuantizerSpec s = *this;
  s.label = delta;
  s.scale = labeled_scale(tau2, input_power, delta);
  return s;
}

void QuantizerSpec::validate() const {
  if (!std::isfinite(tau1) || !std::isfinite(tau2) || !(tau1 < tau2))
    throw DegenerateError("QuantizerSpec: thresholds must satisfy tau1 < tau2");
  if (!(label > 0) || !(scale > 0)) throw DomainError("QuantizerSpec: label and scale must be positive");
}

double labeled_scale(double tau, double input_power, double label) {
  if (!(input_power > 0)) throw DomainError("labeled_scale: input power must be positive");
  if (!(label > 0)) throw DomainError("labeled_scale: label must be positive");
  const double outer = std_normal_cdf(-std::sqrt(2.0 * tau * tau / input_power));
  return std::sqrt(input_power / (4.0 * label * label * outer));
}

BitPair quantize_ternary(double v, const QuantizerSpec& spec) {
  if (!std::isfinite(v)) throw DomainError("quantize_ternary: non-finite input");
  return {static_cast<std::uint8_t>(v >= spec.tau1), static_cast<std::uint8_t>(v >= spec.tau2)};
}

BitPair quantize_po(double v, double n1, double n2, const QuantizerSpec& spec) {
  if (!std::isfinite(v) || !std::isfinite(n1) || !std::isfinite(n2))
    throw DomainError("quantize_po: non-finite input");
  return {static_cast<std::uint8_t>(v + n1 >= spec.tau1), static_cast<std::uint8_t>(v + n2 >= spec.tau2)};
}

void QuantizedBits::validate() const {
  if (kind != AdcKind::ternary) return;
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    if (Z(i, 0) == 0 && Z(i, 1) == 1) throw DomainError("QuantizedBits: pattern [0,1] is impossible for a T-ADC");
}

QuantizedBits quantize_block(const Vector& sbar, double sigma, const QuantizerSpec& spec, RandomStream& rng) {
  if (!(sigma > 0)) throw DomainError("quantize_block: sigma must be positive");
  const double s = sigma / std::sqrt(2.0);
  QuantizedBits out;
  out.kind = spec.kind;
  out.Z.resize(sbar.size(), 2);
  for (Eigen::Index i = 0; i < sbar.size(); ++i) {
    BitPair z;
    if (spec.kind == AdcKind::ternary) {
      z = quantize_ternary(sbar(i) + s * rng.normal(), spec);
    } else {
      const double n1 = s * rng.normal();
      const double n2 = s * rng.normal();
      z = quantize_po(sbar(i), n1, n2, spec);
    }
    out.Z(i, 0) = z[0];
    out.Z(i, 1) = z[1];
  }
  return out;
}

QuantizedObservation quantize_received(const CMatrix& Y, const QuantizerSpec& spec) {
  return quantize_received(Y, Y, spec);
}

QuantizedObservation quantize_received(const CMatrix& Y1, const CMatrix& Y2, const QuantizerSpec& spec) {
  if (Y1.rows() != Y2.rows() || Y1.cols() != Y2.cols()) throw ShapeError("quantize_received: branch shapes differ");
  QuantizedObservation obs;
  obs.kind = spec.kind;
  obs.re.resize(Y1.rows(), Y1.cols());
  obs.im.resize(Y1.rows(), Y1.cols());
  const bool po = spec.kind == AdcKind::parallel_one_bit;
  for (Eigen::Index t = 0; t < Y1.cols(); ++t)
    for (Eigen::Index m = 0; m < Y1.rows(); ++m) {
      const Complex a = Y1(m, t);
      const Complex b = po ? Y2(m, t) : a;
      obs.re(m, t) = outcome_code(quantize_po(a.real(), 0.0, b.real() - a.real(), spec));
      obs.im(m, t) = outcome_code(quantize_po(a.imag(), 0.0, b.imag() - a.imag(), spec));
    }
  return obs;
}

QuantizedBits antenna_bits(const QuantizedObservation& obs, Eigen::Index m) {
  const Eigen::Index T = obs.length();
  QuantizedBits out;
  out.kind = obs.kind;
  out.Z.resize(2 * T, 2);
  for (Eigen::Index t = 0; t < T; ++t) {
    const BitPair r = outcome_bits(obs.re(m, t));
    const BitPair i = outcome_bits(obs.im(m, t));
    out.Z(t, 0) = r[0];
    out.Z(t, 1) = r[1];
    out.Z(T + t, 0) = i[0];
    out.Z(T + t, 1) = i[1];
  }
  return out;
}

QuantizedObservation slice_columns(const QuantizedObservation& obs, Eigen::Index first, Eigen::Index count) {
  QuantizedObservation out;
  out.kind = obs.kind;
  out.re = obs.re.middleCols(first, count);
  out.im = obs.im.middleCols(first, count);
  return out;
}

double expected_frobenius_norm(int M, int T, int K, double symbol_power, double channel_variance,
                               double noise_variance) {
  return std::sqrt(static_cast<double>(M) * T * (K * symbol_power * channel_variance + noise_variance));
}

std::pair<double, double> dynamic_thresholds(const CMatrix& Y, double c) {
  if (!(c > 0)) throw DomainError("dynamic_thresholds: c must be positive");
  if (Y.size() == 0) throw ShapeError("dynamic_thresholds: empty block");
  const double norm = Y.norm();
  if (!(norm > 0)) throw DegenerateError("dynamic_thresholds: all-zero received block");
  const double tau2 = norm / (c * static_cast<double>(Y.rows()) * static_cast<double>(Y.cols()));
  return {-tau2, tau2};
}

double labeled_value(std::uint8_t code, const QuantizerSpec& spec) {
  const double v = spec.scale * spec.label;
  switch (code) {
    case 0: return -v;
    case 3: return v;
    default: return 0.0;  // [1,0], and the PO-only [0,1] whose branch labels cancel
  }
}

double labeled_quantize(double v, const QuantizerSpec& spec) {
  return labeled_value(outcome_code(quantize_ternary(v, spec)), spec);
}

CMatrix labeled_output(const QuantizedObservation& obs, const QuantizerSpec& spec) {
  CMatrix Z(obs.antennas(), obs.length());
  for (Eigen::Index t = 0; t < Z.cols(); ++t)
    for (Eigen::Index m = 0; m < Z.rows(); ++m)
      Z(m, t) = Complex(labeled_value(obs.re(m, t), spec), labeled_value(obs.im(m, t), spec));
  return Z;
}

std::pair<double, double> region_limits(std::uint8_t code, const QuantizerSpec& spec) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (code) {
    case 0: return {-inf, spec.tau1};
    case 3: return {spec.tau2, inf};
    default: return {spec.tau1, spec.tau2};
  }
}

}  // namespace tadc
