#include "tadc/signal_model.hpp"

#include <cmath>
#include <numbers>

#include "tadc/errors.hpp"

namespace tadc {

void SystemConfig::validate() const {
  if (M < 1 || K < 1) throw DomainError("SystemConfig: M and K must be positive");
  if (T_p < K) throw DomainError("SystemConfig: pilot length T_p must be at least K");
  if (T_d < 0) throw DomainError("SystemConfig: T_d must be nonnegative");
  if (!(symbol_power > 0) || !(noise_variance > 0))
    throw DomainError("SystemConfig: symbol power and noise variance must be positive");
  if (channel_kind == ChannelKind::gaussian_prior && !(channel_variance > 0))
    throw DomainError("SystemConfig: channel variance must be positive");
}

double SystemConfig::sigma() const { return std::sqrt(noise_variance); }

Constellation Constellation::make(ConstellationKind kind, double symbol_power) {
  if (!(symbol_power > 0)) throw DomainError("Constellation: symbol power must be positive");
  Constellation c;
  if (kind == ConstellationKind::qpsk) {
    const double a = std::sqrt(symbol_power / 2.0);
    for (unsigned label = 0; label < 4; ++label) {
      const double re = (label & 2u) ? -a : a;
      const double im = (label & 1u) ? -a : a;
      c.points_.emplace_back(re, im);
      c.labels_.push_back(label);
    }
  } else {
    // Gray order per axis: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
    const double level[4] = {-3.0, -1.0, 3.0, 1.0};
    const double scale = std::sqrt(symbol_power / 10.0);
    for (unsigned label = 0; label < 16; ++label) {
      const double re = level[label >> 2] * scale;
      const double im = level[label & 3u] * scale;
      c.points_.emplace_back(re, im);
      c.labels_.push_back(label);
    }
  }
  return c;
}

int Constellation::bits_per_symbol() const {
  int b = 0;
  while ((1 << b) < size()) ++b;
  return b;
}

int Constellation::nearest(Complex z) const {
  int best = 0;
  double best_d = std::norm(z - points_[0]);
  for (int i = 1; i < size(); ++i) {
    const double d = std::norm(z - points_[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

CMatrix candidate_matrix(const Constellation& s, int K) {
  const int n = s.size();
  if (static_cast<double>(K) * std::log2(static_cast<double>(n)) > 30.0)
    throw UnsupportedConfigError("candidate_matrix: |S|^K too large to enumerate");
  long L = 1;
  for (int k = 0; k < K; ++k) L *= n;
  CMatrix out(K, L);
  for (long l = 0; l < L; ++l) {
    long rest = l;
    for (int k = 0; k < K; ++k) {
      out(k, l) = s.points()[rest % n];
      rest /= n;
    }
  }
  return out;
}

CVector from_bivariate_vector(const Vector& gbar) {
  if (gbar.size() % 2 != 0) throw ShapeError("from_bivariate_vector: odd length");
  const Eigen::Index n = gbar.size() / 2;
  CVector g(n);
  for (Eigen::Index i = 0; i < n; ++i) g(i) = Complex(gbar(i), gbar(n + i));
  return g;
}

Vector stack_channel(const CMatrix& H) {
  const Eigen::Index M = H.rows(), K = H.cols();
  Vector out(2 * M * K);
  for (Eigen::Index m = 0; m < M; ++m) out.segment(2 * K * m, 2 * K) = to_bivariate_vector(H.row(m).transpose());
  return out;
}

CMatrix unstack_channel(const Vector& stacked, int M, int K) {
  if (stacked.size() < 2 * M * K) throw ShapeError("unstack_channel: vector too short");
  CMatrix H(M, K);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k) H(m, k) = Complex(stacked(2 * K * m + k), stacked(2 * K * m + K + k));
  return H;
}

CMatrix draw_channel(const SystemConfig& cfg, RandomStream& rng) {
  CMatrix H(cfg.M, cfg.K);
  // Column-major fill keeps the draw order fixed.
  for (Eigen::Index k = 0; k < H.cols(); ++k)
    for (Eigen::Index m = 0; m < H.rows(); ++m) H(m, k) = rng.complex_normal(cfg.channel_variance);
  return H;
}

CMatrix draw_symbols(const SystemConfig& cfg, const Constellation& s, int len, RandomStream& rng) {
  if (len < 0) throw DomainError("draw_symbols: negative length");
  CMatrix X(cfg.K, len);
  for (Eigen::Index t = 0; t < X.cols(); ++t)
    for (Eigen::Index k = 0; k < X.rows(); ++k) X(k, t) = s.points()[rng.index(s.points().size())];
  return X;
}

CMatrix draw_noise(int rows, int cols, double variance, RandomStream& rng) {
  CMatrix N(rows, cols);
  for (Eigen::Index t = 0; t < N.cols(); ++t)
    for (Eigen::Index m = 0; m < N.rows(); ++m) N(m, t) = rng.complex_normal(variance);
  return N;
}

CMatrix orthogonal_pilot(int K, int T_p, double symbol_power) {
  if (K > T_p) throw DomainError("orthogonal_pilot: need K <= T_p");
  CMatrix X(K, T_p);
  const double amp = std::sqrt(symbol_power);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T_p; ++t) {
      const double phase = -2.0 * std::numbers::pi * k * t / T_p;
      X(k, t) = amp * Complex(std::cos(phase), std::sin(phase));
    }
  return X;
}

CMatrix draw_pilot(const SystemConfig& cfg, const Constellation& s, RandomStream& rng) {
  if (cfg.pilot == PilotKind::orthogonal) return orthogonal_pilot(cfg.K, cfg.T_p, cfg.symbol_power);
  return draw_symbols(cfg, s, cfg.T_p, rng);
}

CMatrix received_signal(const CMatrix& H, const CMatrix& X, const CMatrix& N) {
  if (H.cols() != X.rows() || N.rows() != H.rows() || N.cols() != X.cols())
    throw ShapeError("received_signal: dimension mismatch");
  return H * X + N;
}

}  // namespace tadc
