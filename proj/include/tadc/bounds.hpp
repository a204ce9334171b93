#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tadc/likelihood.hpp"
#include "tadc/quantizers.hpp"
#include "tadc/signal_model.hpp"

namespace tadc {

enum class InfoKind { deterministic_po, deterministic_t, hybrid, npa, jpd };

/// Symmetric information matrix. The last coordinate is always sigma.
struct InfoMatrix {
  Matrix F;
  InfoKind kind = InfoKind::deterministic_t;

  Eigen::Index channel_dim() const { return F.rows() - 1; }
  bool is_symmetric(double tol = 1e-10) const;
  bool is_psd(double rel_tol = 1e-8) const;
};

InfoKind deterministic_kind(AdcKind kind);

/// FIM of one antenna's pilot block in eta = [gbar; sigma] built directly from
/// standardized arguments A (2T x 2). Lets callers evaluate configurations such
/// as all-zero A that no threshold pair realizes.
InfoMatrix fim_from_args(AdcKind kind, const Matrix& Xbar, const Matrix& A, double sigma);

InfoMatrix fim_po(const Matrix& Xbar, const ParameterVector& eta, const QuantizerSpec& spec);
InfoMatrix fim_ternary(const Matrix& Xbar, const ParameterVector& eta, const QuantizerSpec& spec);
InfoMatrix fim_pa(const Matrix& Xbar, const ParameterVector& eta, const QuantizerSpec& spec);

/// FIM of all antennas with one shared sigma: chi = [gbar_1; ...; gbar_M; sigma].
/// X is the K x T pilot block.
InfoMatrix fim_pa_chi(const CMatrix& H, double sigma, const CMatrix& X, const QuantizerSpec& spec);

struct CrlbResult {
  double channel_trace = 0.0;           // tr of the channel block of F^{-1}
  Matrix inverse;                       // full F^{-1}
  double known_sigma_trace = 0.0;       // tr(F(gbar)^{-1})
  double sherman_morrison_trace = 0.0;  // tr(F(gbar)^{-1} + B), the rank-one route
};

/// Inverts an information matrix with an SPD factorization. Throws
/// SingularInformationError (with the offending direction) when the condition
/// number exceeds 1e12.
CrlbResult crlb_pa(const InfoMatrix& info);

/// K sigma^2 / (2 P_s T_p): unquantized ML error per antenna with orthogonal pilots.
double full_resolution_crlb(int K, double noise_variance, double symbol_power, int T_p);

/// Single-user single-antenna case with the constant pilot sqrt(P_s)(1 + i).
/// Row j of the result is theta_j = sqrt(2)(s_j - tau)/sigma for s = sqrt(P_s)[g1 - g2, g1 + g2].
Eigen::Matrix2d siso_theta(const Eigen::Vector2d& gbar, double sigma, double tau1, double tau2, double symbol_power);

struct SisoCrlb {
  double po = 0.0;
  double ternary = 0.0;
};

/// CRLB of each component of gbar (the two components share the same value).
SisoCrlb crlb_siso_closed_form(const Eigen::Vector2d& gbar, double sigma, double tau1, double tau2,
                               double symbol_power, int T_p);
/// Same bound by inverting T_p times the row information of each theta_j and
/// mapping through the Jacobian of gbar(theta_1, theta_2).
SisoCrlb crlb_siso_inverted_fim(const Eigen::Vector2d& gbar, double sigma, double tau1, double tau2,
                                double symbol_power, int T_p);

struct HybridInfo {
  InfoMatrix him;
  Matrix std_error;  // per-entry MC standard error of the averaged FIM
  long draws = 0;
  std::vector<std::string> warnings;
};

struct HybridOptions {
  long num_mc = 20000;
  std::uint64_t seed = 1;
  int threads = 1;
  bool strict = false;
};

/// E_gbar[F(chi)] + blockdiag(I / v, 0) with gbar ~ N(0, v I), v = gbar_prior_variance,
/// the variance of each real channel coordinate.
HybridInfo hybrid_crlb(const CMatrix& X, int M, double gbar_prior_variance, double sigma, const QuantizerSpec& spec,
                       const HybridOptions& opts);

enum class NpaMode { exact_enumeration, monte_carlo, high_snr_equivalence };

struct NpaOptions {
  NpaMode mode = NpaMode::monte_carlo;
  long draws_per_column = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Information about chi carried by the data block when the data symbols are
/// unknown: E[s s^T] of the score of ln((1/L) sum_l P(z | x_l, chi)), the
/// expectation taken over outcomes generated by the true data columns Xd.
/// `candidates` is K x L.
InfoMatrix fim_npa(const CMatrix& H, double sigma, const CMatrix& Xd, const CMatrix& candidates,
                   const QuantizerSpec& spec, const NpaOptions& opts);

InfoMatrix fim_jpd(const InfoMatrix& pa, const InfoMatrix& npa);

struct DistinctRegionProbability {
  double literal_product = 0.0;    // prod_{c=0}^{L} (3^M - c + 1)/3^M
  double corrected_product = 0.0;  // prod_{c=1}^{L} (3^M - c + 1)/3^M
  double lower_bound = 0.0;        // (1 - (L - 1)/3^M)^L
};

DistinctRegionProbability prob_distinct_regions(int M, int K, int constellation_size);

}  // namespace tadc
