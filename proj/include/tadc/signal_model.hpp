#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tadc/random.hpp"

namespace tadc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

enum class ChannelKind { deterministic, gaussian_prior };
enum class ConstellationKind { qpsk, qam16 };
enum class PilotKind { random, orthogonal };

struct SystemConfig {
  int M = 1;    // base-station antennas
  int K = 1;    // users
  int T_p = 1;  // pilot length
  int T_d = 0;  // data length
  double symbol_power = 1.0;
  double noise_variance = 1.0;
  ChannelKind channel_kind = ChannelKind::deterministic;
  double channel_variance = 1.0;  // E|h_mk|^2
  ConstellationKind constellation = ConstellationKind::qpsk;
  PilotKind pilot = PilotKind::random;
  std::uint64_t seed = 1;

  void validate() const;
  double sigma() const;
};

class Constellation {
 public:
  static Constellation make(ConstellationKind kind, double symbol_power);

  int size() const { return static_cast<int>(points_.size()); }
  const std::vector<Complex>& points() const { return points_; }
  const std::vector<unsigned>& gray_labels() const { return labels_; }
  int bits_per_symbol() const;
  /// Index of the closest point; ties resolve to the lowest index.
  int nearest(Complex z) const;

 private:
  std::vector<Complex> points_;
  std::vector<unsigned> labels_;
};

/// All |S|^K symbol vectors as columns (K x L). User k takes digit k of the
/// base-|S| expansion of the column index.
CMatrix candidate_matrix(const Constellation& s, int K);

/// [[Re X^T, -Im X^T], [Im X^T, Re X^T]] for a K x T complex X.
template <typename Derived>
Eigen::Matrix<typename Eigen::NumTraits<typename Derived::Scalar>::Real, Eigen::Dynamic, Eigen::Dynamic>
to_bivariate_real(const Eigen::MatrixBase<Derived>& X) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  const Eigen::Index K = X.rows();
  const Eigen::Index T = X.cols();
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> out(2 * T, 2 * K);
  out.topLeftCorner(T, K) = X.transpose().real();
  out.topRightCorner(T, K) = -X.transpose().imag();
  out.bottomLeftCorner(T, K) = X.transpose().imag();
  out.bottomRightCorner(T, K) = X.transpose().real();
  return out;
}

/// [Re g; Im g].
template <typename Derived>
Eigen::Matrix<typename Eigen::NumTraits<typename Derived::Scalar>::Real, Eigen::Dynamic, 1>
to_bivariate_vector(const Eigen::MatrixBase<Derived>& g) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  const Eigen::Index n = g.size();
  Eigen::Matrix<Real, Eigen::Dynamic, 1> out(2 * n);
  out.head(n) = g.real();
  out.tail(n) = g.imag();
  return out;
}

CVector from_bivariate_vector(const Vector& gbar);

/// chi-style stacking: [gbar_1; ...; gbar_M] with gbar_m built from row m of H.
Vector stack_channel(const CMatrix& H);
CMatrix unstack_channel(const Vector& stacked, int M, int K);

CMatrix draw_channel(const SystemConfig& cfg, RandomStream& rng);
CMatrix draw_symbols(const SystemConfig& cfg, const Constellation& s, int len, RandomStream& rng);
CMatrix draw_noise(int rows, int cols, double variance, RandomStream& rng);
/// Rows of a scaled DFT: X X^H = T_p * P_s * I. Requires K <= T_p.
CMatrix orthogonal_pilot(int K, int T_p, double symbol_power);
CMatrix draw_pilot(const SystemConfig& cfg, const Constellation& s, RandomStream& rng);

CMatrix received_signal(const CMatrix& H, const CMatrix& X, const CMatrix& N);

}  // namespace tadc
