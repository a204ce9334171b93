#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tadc/bounds.hpp"
#include "tadc/estimators.hpp"
#include "tadc/quantizers.hpp"
#include "tadc/signal_model.hpp"

namespace tadc {

enum class ThresholdScheme { fixed, dynamic };
enum class EstimatorKind { oracle, nr_ml, em, pem, gpem, viem, viem_pa, zf };

std::string to_string(EstimatorKind e);
EstimatorKind parse_estimator(const std::string& name);
std::string to_string(ThresholdScheme s);
ThresholdScheme parse_threshold_scheme(const std::string& name);
std::string to_string(AdcKind k);
AdcKind parse_adc_kind(const std::string& name);
std::string to_string(ConstellationKind k);
ConstellationKind parse_constellation(const std::string& name);
std::string to_string(ChannelKind k);
ChannelKind parse_channel_kind(const std::string& name);

struct QuantizerSettings {
  AdcKind kind = AdcKind::ternary;
  ThresholdScheme scheme = ThresholdScheme::dynamic;
  double delta = 1.0;        // FT: tau = -+delta
  double c = 3.0;            // DT constant
  bool analytic_dt = false;  // DT from the expected rather than realized ||Y||_F
  double label = 1.0;
  std::optional<double> label_power;  // default P_s K channel_variance + noise_variance
};

struct ExperimentConfig {
  SystemConfig system;
  QuantizerSettings quantizer;
  EstimatorKind estimator = EstimatorKind::nr_ml;
  double snr_db = 0.0;
  int gpem_groups = 2;
  SolverOptions solver;
  double viem_sigma_jitter = 0.2;  // sigma init = sigma (1 + U(-j, j))
  bool compute_bound = true;
  long hybrid_draws = 2000;

  /// Copy with symbol_power set from snr_db.
  ExperimentConfig at_snr() const;
  void validate() const;
};

double snr_to_power(double snr_db, double noise_variance);

double nmse(const CMatrix& H_hat, const CMatrix& H);
double ser(const CMatrix& Xd_hat, const CMatrix& Xd);

/// One realized transmission: everything an estimator sees plus the truth.
struct TrialScene {
  CMatrix H;
  CMatrix Xp;
  CMatrix Xd;
  QuantizerSpec spec;
  QuantizedObservation obs_p;
  QuantizedObservation obs_d;
};

/// Quantizer for a realized block (thresholds and labels), per the settings.
QuantizerSpec realize_quantizer(const ExperimentConfig& cfg, const CMatrix& Y);
/// Draws a scene from `rng`. The draws do not depend on the estimator.
TrialScene realize_scene(const ExperimentConfig& cfg, RandomStream& rng);
/// Runs the configured estimator on a scene; `rng` feeds estimator-side randomness.
EstimateResult run_estimator(const ExperimentConfig& cfg, const TrialScene& scene, RandomStream& rng);

struct TrialOutcome {
  bool ok = false;
  std::string error;
  double nmse = 0.0;
  std::optional<double> ser;
  std::optional<double> ncrlb;  // deterministic-channel bound of this realization
  int iterations = 0;
  bool converged = false;
  std::vector<double> llf_trace;
};

/// `num_trials` trials of one configuration; trial i uses substream(seed, point, i).
std::vector<TrialOutcome> run_trials(const ExperimentConfig& cfg, long num_trials, std::uint64_t seed,
                                     std::uint64_t point, int threads);

struct SweepAxis {
  std::string name;  // snr_db, M, K, T_p, T_d, constellation, threshold_scheme, estimator
  std::vector<std::string> values;
};

void apply_axis_value(ExperimentConfig& cfg, const std::string& name, const std::string& value);

struct SweepPlan {
  ExperimentConfig base;
  std::vector<SweepAxis> axes;
  long num_realizations = 3000;
  std::uint64_t seed = 1;

  /// Cartesian product of the axes, first axis outermost.
  std::vector<std::vector<std::pair<std::string, std::string>>> points() const;
  void validate() const;
};

struct MetricRecord {
  std::vector<std::pair<std::string, std::string>> axis_values;
  double snr_db = 0.0;
  double nmse = 0.0;
  double nmse_db = 0.0;
  double mc_std_err = 0.0;  // of the linear NMSE mean
  std::optional<double> ncrlb_db;
  std::optional<double> ser;
  std::optional<double> ser_std_err;
  long realizations_used = 0;
  long failed = 0;
  bool valid = true;
  double mean_iterations = 0.0;
  long not_converged = 0;
  std::string first_error;
  double wall_time_s = 0.0;
};

/// Aggregates in trial order with pairwise summation.
MetricRecord aggregate(const std::vector<TrialOutcome>& trials);

/// NCRLB for a point whose bound is not per-realization (Gaussian prior): HCRLB
/// trace over M K channel_variance, evaluated at a fixed pilot drawn from `seed`.
std::optional<double> hybrid_ncrlb(const ExperimentConfig& cfg, std::uint64_t seed, int threads);

std::vector<MetricRecord> run_sweep(const SweepPlan& plan, int threads);

}  // namespace tadc
