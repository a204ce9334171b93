#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "tadc/likelihood.hpp"
#include "tadc/quantizers.hpp"
#include "tadc/signal_model.hpp"

namespace tadc {

struct SolverOptions {
  int max_newton_iters = 100;
  double grad_tol = 1e-8;
  int max_em_iters = 50;
  double em_rel_tol = 1e-6;
  double posterior_prune_tol = 1e-12;
  double damping = 1.0;  // initial Newton step scale
  int max_halvings = 30;

  void validate() const;
};

struct EstimateResult {
  CMatrix H_hat;
  double sigma_hat = 1.0;
  Vector group_sigma;            // one entry per antenna group (EM family)
  std::optional<CMatrix> Xd_hat;
  std::vector<double> llf_trace;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;

  /// Stacked [gbar_1; ...; gbar_M].
  Vector gbar_hat() const { return stack_channel(H_hat); }
};

// ---------------------------------------------------------------------------
// Reparameterized likelihood. Antenna m contributes rows (xbar, code, weight)
// with a_j = sqrt(2)(xbar . varsigma_m - tau_j xi); all antennas of a problem
// share xi = 1/sigma. The objective is concave in theta = [varsigma_1; ...; xi].

struct AntennaRows {
  Matrix xbar;                      // R x 2K
  std::vector<std::uint8_t> code;   // R
  Vector weight;                    // R

  void append(const Matrix& rows, const std::vector<std::uint8_t>& codes, double w);
};

struct ReparamProblem {
  AdcKind kind = AdcKind::ternary;
  double tau1 = -1.0;
  double tau2 = 1.0;
  int K = 1;
  std::vector<AntennaRows> antennas;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(antennas.size()) * 2 * K + 1; }
};

double reparam_value(const ReparamProblem& p, const Vector& theta);
/// Value, gradient and dense Hessian (the solver itself uses the arrow structure).
double reparam_derivatives(const ReparamProblem& p, const Vector& theta, Vector& grad, Matrix& hess);

struct NewtonOutcome {
  Vector theta;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton ascent. Throws IdentifiabilityError when the iterates run off
/// along an unbounded ray.
NewtonOutcome maximize_reparam(const ReparamProblem& p, Vector theta, const SolverOptions& opts);

// ---------------------------------------------------------------------------

/// Pilot-aided ML over all antennas with one shared sigma. `init.gbar` stacks
/// the M per-antenna vectors.
EstimateResult newton_raphson_ml(const std::vector<QuantizedBits>& Zp, const Matrix& Xbar, const QuantizerSpec& spec,
                                 const SolverOptions& opts, const ParameterVector& init);
/// Single antenna.
EstimateResult newton_raphson_ml(const QuantizedBits& Zp, const Matrix& Xbar, const QuantizerSpec& spec,
                                 const SolverOptions& opts, const ParameterVector& init);

/// Closed-form estimate for M = K = 1 with the constant pilot sqrt(P_s)(1 + i).
Eigen::Vector2d siso_ml_closed_form(const QuantizedBits& Z, double tau1, double tau2, double symbol_power, int T_p);

/// Least-squares fit Z X^H (X X^H)^{-1} of a labeled pilot block.
CMatrix zf_init(const CMatrix& Zp_labeled, const CMatrix& Xp);

/// Grouped EM for deterministic channels: antennas split into `groups`
/// contiguous blocks of size ceil(M/groups), each with its own sigma.
EstimateResult gpem_deterministic(const QuantizedObservation& obs_p, const QuantizedObservation& obs_d,
                                  const CMatrix& Xp, const Constellation& constellation, const QuantizerSpec& spec,
                                  const SolverOptions& opts, int groups);
EstimateResult em_deterministic(const QuantizedObservation& obs_p, const QuantizedObservation& obs_d,
                                const CMatrix& Xp, const Constellation& constellation, const QuantizerSpec& spec,
                                const SolverOptions& opts);
EstimateResult pem_deterministic(const QuantizedObservation& obs_p, const QuantizedObservation& obs_d,
                                 const CMatrix& Xp, const Constellation& constellation, const QuantizerSpec& spec,
                                 const SolverOptions& opts);

/// Column-wise argmax of an L x T posterior; ties go to the lowest index.
std::vector<int> detect_symbols(const Matrix& posterior);
/// Per-entry nearest constellation point.
CMatrix hard_decision(const CMatrix& X, const Constellation& constellation);

// ---------------------------------------------------------------------------
// Variational EM for Gaussian-prior channels.

struct ViemOptions {
  bool use_data = true;          // false: pilot block only
  double sigma_init = 1.0;
};

/// One VIEM run kept as an explicit state so single iterations can be inspected.
class ViemSolver {
 public:
  ViemSolver(const QuantizedObservation& obs_p, const QuantizedObservation& obs_d, const CMatrix& Xp,
             const Constellation& constellation, const QuantizerSpec& spec, const SolverOptions& opts,
             const ViemOptions& vopts);

  /// One full update of the pre-quantization means, channel posterior,
  /// hyperparameters, data symbols and sigma. Returns the relative change of m.
  double step();
  EstimateResult run();

  const CMatrix& channel_mean() const { return mean_; }
  const std::vector<Eigen::MatrixXcd>& channel_cov() const { return cov_; }
  const Matrix& lambda() const { return lambda_; }
  double sigma() const { return sigma_; }
  const CMatrix& data() const { return Xd_; }

 private:
  CMatrix full_symbols() const;
  double sigma_objective(double xi, double* grad, double* hess) const;

  QuantizedObservation obs_;  // pilot columns followed by data columns
  CMatrix Xp_;
  Constellation constellation_;
  QuantizerSpec spec_;
  SolverOptions opts_;
  bool use_data_;
  int T_p_;
  int T_d_;
  CMatrix mean_;
  std::vector<Eigen::MatrixXcd> cov_;
  Matrix lambda_;
  double sigma_;
  CMatrix Xd_;
  std::vector<double> trace_;
  int iterations_ = 0;
};

EstimateResult viem_random(const QuantizedObservation& obs_p, const QuantizedObservation& obs_d, const CMatrix& Xp,
                           const Constellation& constellation, const QuantizerSpec& spec, const SolverOptions& opts,
                           const ViemOptions& vopts);

}  // namespace tadc
