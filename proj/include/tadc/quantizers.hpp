#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include <Eigen/Core>

#include "tadc/random.hpp"
#include "tadc/signal_model.hpp"

namespace tadc {

enum class AdcKind { ternary, parallel_one_bit };

/// Two-threshold quantizer. `label` (delta) and `scale` (alpha) only matter for
/// the labeled output used by the ZF and variational estimators.
struct QuantizerSpec {
  AdcKind kind = AdcKind::ternary;
  double tau1 = -1.0;
  double tau2 = 1.0;
  double label = 1.0;
  double scale = 1.0;

  static QuantizerSpec symmetric(AdcKind kind, double tau2);
  /// Copy with alpha set for an input of power `input_power` = E|u+n|^2.
  QuantizerSpec with_labels(double input_power, double label = 1.0) const;
  void validate() const;
};

/// alpha making the complex labeled output carry variance `input_power` when the
/// input is circular Gaussian with that power:
///   alpha = sqrt(P / (4 delta^2 Phi(-sqrt(2 tau^2 / P)))).
double labeled_scale(double tau, double input_power, double label);

using BitPair = std::array<std::uint8_t, 2>;

/// Row pattern packed as z1 | z2 << 1: [0,0]=0, [1,0]=1, [0,1]=2, [1,1]=3.
constexpr std::uint8_t outcome_code(BitPair z) { return static_cast<std::uint8_t>(z[0] | (z[1] << 1)); }
constexpr BitPair outcome_bits(std::uint8_t code) {
  return {static_cast<std::uint8_t>(code & 1u), static_cast<std::uint8_t>((code >> 1) & 1u)};
}

BitPair quantize_ternary(double v, const QuantizerSpec& spec);
BitPair quantize_po(double v, double n1, double n2, const QuantizerSpec& spec);

using BitMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 2>;
using OutcomeMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Bit-pair form of one antenna's output: rows 0..T-1 real parts, T..2T-1 imaginary.
struct QuantizedBits {
  BitMatrix Z;
  AdcKind kind = AdcKind::ternary;

  Eigen::Index rows() const { return Z.rows(); }
  std::uint8_t code(Eigen::Index i) const { return outcome_code({Z(i, 0), Z(i, 1)}); }
  void validate() const;
};

/// Quantizes sbar + noise where the noise has variance sigma^2/2 per row.
QuantizedBits quantize_block(const Vector& sbar, double sigma, const QuantizerSpec& spec, RandomStream& rng);

/// Outcome codes for a whole received block (M x T for each of Re and Im).
struct QuantizedObservation {
  OutcomeMatrix re;
  OutcomeMatrix im;
  AdcKind kind = AdcKind::ternary;

  Eigen::Index antennas() const { return re.rows(); }
  Eigen::Index length() const { return re.cols(); }
};

QuantizedObservation quantize_received(const CMatrix& Y, const QuantizerSpec& spec);
/// PO-ADC: branch i compares Y_i against tau_i; the two inputs differ only in noise.
QuantizedObservation quantize_received(const CMatrix& Y1, const CMatrix& Y2, const QuantizerSpec& spec);

QuantizedBits antenna_bits(const QuantizedObservation& obs, Eigen::Index m);
/// Columns [first, first + count) of an observation.
QuantizedObservation slice_columns(const QuantizedObservation& obs, Eigen::Index first, Eigen::Index count);

double expected_frobenius_norm(int M, int T, int K, double symbol_power, double channel_variance,
                               double noise_variance);
/// tau2 = ||Y||_F / (c M T), tau1 = -tau2.
std::pair<double, double> dynamic_thresholds(const CMatrix& Y, double c);

double labeled_quantize(double v, const QuantizerSpec& spec);
double labeled_value(std::uint8_t code, const QuantizerSpec& spec);
/// Complex labeled block; PO outputs average their two branch labels.
CMatrix labeled_output(const QuantizedObservation& obs, const QuantizerSpec& spec);

/// Interval of the pre-quantization value consistent with an outcome. The PO
/// pattern [0,1] has no single consistent interval and maps to [tau1, tau2).
std::pair<double, double> region_limits(std::uint8_t code, const QuantizerSpec& spec);

}  // namespace tadc
