#include "tadc/harness.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

#include "tadc/errors.hpp"
#include "tadc/numerics.hpp"
#include "tadc/parallel.hpp"

namespace tadc {

namespace {

template <typename E, std::size_t N>
E parse_enum(const std::string& name, const std::pair<const char*, E> (&table)[N], const char* what) {
  for (const auto& [key, value] : table)
    if (name == key) return value;
  std::string msg = std::string("unknown ") + what + " '" + name + "' (expected";
  for (std::size_t i = 0; i < N; ++i) msg += std::string(i ? ", " : " ") + table[i].first;
  throw DomainError(msg + ")");
}

template <typename E, std::size_t N>
std::string enum_name(E e, const std::pair<const char*, E> (&table)[N]) {
  for (const auto& [key, value] : table)
    if (value == e) return key;
  return "?";
}

constexpr std::pair<const char*, EstimatorKind> kEstimators[] = {
    {"oracle", EstimatorKind::oracle}, {"nr_ml", EstimatorKind::nr_ml}, {"em", EstimatorKind::em},
    {"pem", EstimatorKind::pem},       {"gpem", EstimatorKind::gpem},   {"viem", EstimatorKind::viem},
    {"viem_pa", EstimatorKind::viem_pa}, {"zf", EstimatorKind::zf}};
constexpr std::pair<const char*, ThresholdScheme> kSchemes[] = {{"fixed", ThresholdScheme::fixed},
                                                                  {"dynamic", ThresholdScheme::dynamic}};
constexpr std::pair<const char*, AdcKind> kAdcs[] = {{"ternary", AdcKind::ternary},
                                                      {"parallel_one_bit", AdcKind::parallel_one_bit}};
constexpr std::pair<const char*, ConstellationKind> kConstellations[] = {{"qpsk", ConstellationKind::qpsk},
                                                                          {"qam16", ConstellationKind::qam16}};
constexpr std::pair<const char*, ChannelKind> kChannels[] = {{"deterministic", ChannelKind::deterministic},
                                                              {"gaussian_prior", ChannelKind::gaussian_prior}};

constexpr std::uint64_t kEstimatorStreamSalt = 0x5eed0e57a11ull;
constexpr std::uint64_t kBoundStreamSalt = 0xb0a4d5ull;

int parse_int(const std::string& name, const std::string& value) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw DomainError(name + ": expected an integer, got '" + value + "'");
  return v;
}

double parse_double(const std::string& name, const std::string& value) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw DomainError(name + ": expected a number, got '" + value + "'");
  return v;
}

double mean_of(std::span<const double> v) { return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size()); }

double std_err_of(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

double to_db(double x) { return 10.0 * std::log10(x); }

}  // namespace

std::string to_string(EstimatorKind e) { return enum_name(e, kEstimators); }
EstimatorKind parse_estimator(const std::string& name) { return parse_enum(name, kEstimators, "estimator"); }
std::string to_string(ThresholdScheme s) { return enum_name(s, kSchemes); }
ThresholdScheme parse_threshold_scheme(const std::string& name) {
  if (name == "FT" || name == "ft") return ThresholdScheme::fixed;
  if (name == "DT" || name == "dt") return ThresholdScheme::dynamic;
  return parse_enum(name, kSchemes, "threshold scheme");
}
std::string to_string(AdcKind k) { return enum_name(k, kAdcs); }
AdcKind parse_adc_kind(const std::string& name) {
  if (name == "t" || name == "T") return AdcKind::ternary;
  if (name == "po" || name == "PO") return AdcKind::parallel_one_bit;
  return parse_enum(name, kAdcs, "ADC kind");
}
std::string to_string(ConstellationKind k) { return enum_name(k, kConstellations); }
ConstellationKind parse_constellation(const std::string& name) {
  return parse_enum(name, kConstellations, "constellation");
}
std::string to_string(ChannelKind k) { return enum_name(k, kChannels); }
ChannelKind parse_channel_kind(const std::string& name) { return parse_enum(name, kChannels, "channel kind"); }

double snr_to_power(double snr_db, double noise_variance) {
  if (!(noise_variance > 0)) throw DomainError("snr_to_power: noise variance must be positive");
  return noise_variance * std::pow(10.0, snr_db / 10.0);
}

ExperimentConfig ExperimentConfig::at_snr() const {
  ExperimentConfig out = *this;
  out.system.symbol_power = snr_to_power(snr_db, system.noise_variance);
  return out;
}

void ExperimentConfig::validate() const {
  at_snr().system.validate();
  solver.validate();
  if (quantizer.scheme == ThresholdScheme::fixed && !(quantizer.delta > 0))
    throw DomainError("quantizer: fixed threshold delta must be positive");
  if (quantizer.scheme == ThresholdScheme::dynamic && !(quantizer.c > 0))
    throw DomainError("quantizer: dynamic threshold constant c must be positive");
  if (!(quantizer.label > 0)) throw DomainError("quantizer: label must be positive");
  if (quantizer.label_power && !(*quantizer.label_power > 0))
    throw DomainError("quantizer: label power must be positive");
  if (estimator == EstimatorKind::gpem && (gpem_groups < 1 || gpem_groups > system.M))
    throw DomainError("estimator: gpem groups must lie in [1, M]");
  const bool uses_data = estimator == EstimatorKind::em || estimator == EstimatorKind::pem ||
                         estimator == EstimatorKind::gpem;
  if (uses_data) {
    const Constellation s = Constellation::make(system.constellation, 1.0);
    if (system.K * s.bits_per_symbol() > 16)
      throw UnsupportedConfigError("estimator: K log2|S| exceeds the enumeration cap of 16 bits");
  }
  if (!(viem_sigma_jitter >= 0 && viem_sigma_jitter < 1))
    throw DomainError("estimator: viem sigma jitter must lie in [0, 1)");
  if (hybrid_draws < 1) throw DomainError("bounds: hybrid draws must be positive");
}

double nmse(const CMatrix& H_hat, const CMatrix& H) {
  if (H_hat.rows() != H.rows() || H_hat.cols() != H.cols()) throw ShapeError("nmse: shape mismatch");
  const double denom = H.squaredNorm();
  if (!(denom > 0)) throw DomainError("nmse: zero-norm channel");
  return (H_hat - H).squaredNorm() / denom;
}

double ser(const CMatrix& Xd_hat, const CMatrix& Xd) {
  if (Xd_hat.rows() != Xd.rows() || Xd_hat.cols() != Xd.cols()) throw ShapeError("ser: shape mismatch");
  if (Xd.size() == 0) return 0.0;
  long wrong = 0;
  for (Eigen::Index i = 0; i < Xd.size(); ++i)
    if (std::abs(Xd_hat(i) - Xd(i)) > 1e-9 * (1.0 + std::abs(Xd(i)))) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(Xd.size());
}

QuantizerSpec realize_quantizer(const ExperimentConfig& cfg, const CMatrix& Y) {
  const SystemConfig& sys = cfg.system;
  QuantizerSpec spec;
  if (cfg.quantizer.scheme == ThresholdScheme::fixed) {
    spec = QuantizerSpec::symmetric(cfg.quantizer.kind, cfg.quantizer.delta);
  } else if (cfg.quantizer.analytic_dt) {
    const int T = sys.T_p + sys.T_d;
    const double norm =
        expected_frobenius_norm(sys.M, T, sys.K, sys.symbol_power, sys.channel_variance, sys.noise_variance);
    spec = QuantizerSpec::symmetric(cfg.quantizer.kind, norm / (cfg.quantizer.c * sys.M * T));
  } else {
    spec = QuantizerSpec::symmetric(cfg.quantizer.kind, dynamic_thresholds(Y, cfg.quantizer.c).second);
  }
  const double power = cfg.quantizer.label_power.value_or(sys.symbol_power * sys.K * sys.channel_variance +
                                                          sys.noise_variance);
  return spec.with_labels(power, cfg.quantizer.label);
}

TrialScene realize_scene(const ExperimentConfig& cfg, RandomStream& rng) {
  const SystemConfig& sys = cfg.system;
  const Constellation s = Constellation::make(sys.constellation, sys.symbol_power);
  TrialScene scene;
  scene.H = draw_channel(sys, rng);
  scene.Xp = draw_pilot(sys, s, rng);
  scene.Xd = draw_symbols(sys, s, sys.T_d, rng);
  CMatrix X(sys.K, sys.T_p + sys.T_d);
  X << scene.Xp, scene.Xd;
  const CMatrix clean = scene.H * X;
  const CMatrix Y1 = clean + draw_noise(sys.M, static_cast<int>(X.cols()), sys.noise_variance, rng);
  scene.spec = realize_quantizer(cfg, Y1);
  QuantizedObservation obs;
  if (cfg.quantizer.kind == AdcKind::parallel_one_bit) {
    const CMatrix Y2 = clean + draw_noise(sys.M, static_cast<int>(X.cols()), sys.noise_variance, rng);
    obs = quantize_received(Y1, Y2, scene.spec);
  } else {
    obs = quantize_received(Y1, scene.spec);
  }
  scene.obs_p = slice_columns(obs, 0, sys.T_p);
  scene.obs_d = slice_columns(obs, sys.T_p, sys.T_d);
  return scene;
}

EstimateResult run_estimator(const ExperimentConfig& cfg, const TrialScene& scene, RandomStream& rng) {
  const SystemConfig& sys = cfg.system;
  const Constellation s = Constellation::make(sys.constellation, sys.symbol_power);
  switch (cfg.estimator) {
    case EstimatorKind::oracle: {
      EstimateResult r;
      r.H_hat = scene.H;
      r.sigma_hat = sys.sigma();
      r.converged = true;
      if (sys.T_d > 0) r.Xd_hat = scene.Xd;
      return r;
    }
    case EstimatorKind::nr_ml: {
      std::vector<QuantizedBits> bits;
      bits.reserve(sys.M);
      for (int m = 0; m < sys.M; ++m) bits.push_back(antenna_bits(scene.obs_p, m));
      ParameterVector init{Vector::Zero(2 * sys.K * sys.M), 1.0};
      return newton_raphson_ml(bits, to_bivariate_real(scene.Xp), scene.spec, cfg.solver, init);
    }
    case EstimatorKind::em:
      return em_deterministic(scene.obs_p, scene.obs_d, scene.Xp, s, scene.spec, cfg.solver);
    case EstimatorKind::pem:
      return pem_deterministic(scene.obs_p, scene.obs_d, scene.Xp, s, scene.spec, cfg.solver);
    case EstimatorKind::gpem:
      return gpem_deterministic(scene.obs_p, scene.obs_d, scene.Xp, s, scene.spec, cfg.solver, cfg.gpem_groups);
    case EstimatorKind::viem:
    case EstimatorKind::viem_pa: {
      ViemOptions v;
      v.use_data = cfg.estimator == EstimatorKind::viem;
      v.sigma_init = sys.sigma() * (1.0 + rng.uniform(-cfg.viem_sigma_jitter, cfg.viem_sigma_jitter));
      return viem_random(scene.obs_p, scene.obs_d, scene.Xp, s, scene.spec, cfg.solver, v);
    }
    case EstimatorKind::zf: {
      EstimateResult r;
      r.H_hat = zf_init(labeled_output(scene.obs_p, scene.spec), scene.Xp);
      r.sigma_hat = sys.sigma();
      r.converged = true;
      return r;
    }
  }
  throw DomainError("run_estimator: unknown estimator");
}

std::vector<TrialOutcome> run_trials(const ExperimentConfig& input, long num_trials, std::uint64_t seed,
                                     std::uint64_t point, int threads) {
  if (num_trials < 1) throw DomainError("run_trials: need at least one trial");
  const ExperimentConfig cfg = input.at_snr();
  cfg.validate();
  const bool bound = cfg.compute_bound && cfg.system.channel_kind == ChannelKind::deterministic;
  std::vector<TrialOutcome> out(static_cast<std::size_t>(num_trials));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    TrialOutcome& o = out[i];
    try {
      RandomStream scene_rng = RandomStream::substream(seed, point, i);
      RandomStream est_rng = RandomStream::substream(seed ^ kEstimatorStreamSalt, point, i);
      const TrialScene scene = realize_scene(cfg, scene_rng);
      const EstimateResult r = run_estimator(cfg, scene, est_rng);
      o.nmse = nmse(r.H_hat, scene.H);
      if (r.Xd_hat && cfg.system.T_d > 0) o.ser = ser(*r.Xd_hat, scene.Xd);
      o.iterations = r.iterations;
      o.converged = r.converged;
      o.llf_trace = r.llf_trace;
      if (bound) {
        try {
          const CrlbResult c = crlb_pa(fim_pa_chi(scene.H, cfg.system.sigma(), scene.Xp, scene.spec));
          o.ncrlb = c.channel_trace / scene.H.squaredNorm();
        } catch (const SingularInformationError&) {
        }
      }
      o.ok = std::isfinite(o.nmse);
      if (!o.ok) o.error = "non-finite NMSE";
    } catch (const std::exception& e) {
      o.ok = false;
      o.error = e.what();
    }
  });
  return out;
}

MetricRecord aggregate(const std::vector<TrialOutcome>& trials) {
  MetricRecord rec;
  std::vector<double> n, s, b, it;
  for (const TrialOutcome& t : trials) {
    if (!t.ok) {
      if (rec.failed == 0) rec.first_error = t.error;
      ++rec.failed;
      continue;
    }
    n.push_back(t.nmse);
    it.push_back(static_cast<double>(t.iterations));
    if (!t.converged) ++rec.not_converged;
    if (t.ser) s.push_back(*t.ser);
    if (t.ncrlb) b.push_back(*t.ncrlb);
  }
  rec.realizations_used = static_cast<long>(n.size());
  rec.valid = !trials.empty() && static_cast<double>(rec.failed) <= 0.05 * static_cast<double>(trials.size());
  rec.nmse = mean_of(n);
  rec.nmse_db = n.empty() ? std::nan("") : to_db(rec.nmse);
  rec.mc_std_err = std_err_of(n, rec.nmse);
  rec.mean_iterations = mean_of(it);
  if (!s.empty()) {
    rec.ser = mean_of(s);
    rec.ser_std_err = std_err_of(s, *rec.ser);
  }
  if (!b.empty()) rec.ncrlb_db = to_db(mean_of(b));
  return rec;
}

std::optional<double> hybrid_ncrlb(const ExperimentConfig& input, std::uint64_t seed, int threads) {
  const ExperimentConfig cfg = input.at_snr();
  const SystemConfig& sys = cfg.system;
  RandomStream rng = RandomStream::substream(seed ^ kBoundStreamSalt, 0);
  const Constellation s = Constellation::make(sys.constellation, sys.symbol_power);
  const CMatrix Xp = draw_pilot(sys, s, rng);
  ExperimentConfig analytic = cfg;
  analytic.quantizer.analytic_dt = true;
  const QuantizerSpec spec = realize_quantizer(analytic, CMatrix());
  HybridOptions opts;
  opts.num_mc = cfg.hybrid_draws;
  opts.seed = seed ^ kBoundStreamSalt;
  opts.threads = threads;
  try {
    const HybridInfo info = hybrid_crlb(Xp, sys.M, sys.channel_variance / 2.0, sys.sigma(), spec, opts);
    const CrlbResult c = crlb_pa(info.him);
    return c.channel_trace / (sys.M * sys.K * sys.channel_variance);
  } catch (const SingularInformationError&) {
    return std::nullopt;
  }
}

void apply_axis_value(ExperimentConfig& cfg, const std::string& name, const std::string& value) {
  if (name == "snr_db") {
    cfg.snr_db = parse_double(name, value);
  } else if (name == "M") {
    cfg.system.M = parse_int(name, value);
  } else if (name == "K") {
    cfg.system.K = parse_int(name, value);
  } else if (name == "T_p") {
    cfg.system.T_p = parse_int(name, value);
  } else if (name == "T_d") {
    cfg.system.T_d = parse_int(name, value);
  } else if (name == "constellation") {
    cfg.system.constellation = parse_constellation(value);
  } else if (name == "threshold_scheme") {
    cfg.quantizer.scheme = parse_threshold_scheme(value);
  } else if (name == "estimator") {
    cfg.estimator = parse_estimator(value);
  } else {
    throw DomainError("unknown sweep axis '" + name + "'");
  }
}

std::vector<std::vector<std::pair<std::string, std::string>>> SweepPlan::points() const {
  std::vector<std::vector<std::pair<std::string, std::string>>> out{{}};
  for (const SweepAxis& axis : axes) {
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& prefix : out)
      for (const std::string& v : axis.values) {
        auto p = prefix;
        p.emplace_back(axis.name, v);
        next.push_back(std::move(p));
      }
    out = std::move(next);
  }
  return out;
}

void SweepPlan::validate() const {
  if (axes.empty()) throw DomainError("sweep: at least one axis is required");
  for (const SweepAxis& a : axes)
    if (a.values.empty()) throw DomainError("sweep: axis '" + a.name + "' has no values");
  if (num_realizations < 1) throw DomainError("sweep: num_realizations must be positive");
  for (const auto& point : points()) {
    ExperimentConfig cfg = base;
    for (const auto& [name, value] : point) apply_axis_value(cfg, name, value);
    cfg.validate();
  }
}

std::vector<MetricRecord> run_sweep(const SweepPlan& plan, int threads) {
  plan.validate();
  std::vector<MetricRecord> out;
  // Points differing only in the estimator share scenes, so estimators compare on paired trials.
  std::map<std::vector<std::pair<std::string, std::string>>, std::uint64_t> scene_keys;
  for (const auto& point : plan.points()) {
    ExperimentConfig cfg = plan.base;
    std::vector<std::pair<std::string, std::string>> scene_axes;
    for (const auto& [name, value] : point) {
      apply_axis_value(cfg, name, value);
      if (name != "estimator") scene_axes.emplace_back(name, value);
    }
    const auto [it, inserted] = scene_keys.emplace(scene_axes, scene_keys.size());
    const auto start = std::chrono::steady_clock::now();
    const auto trials = run_trials(cfg, plan.num_realizations, plan.seed, it->second, threads);
    MetricRecord rec = aggregate(trials);
    if (cfg.compute_bound && cfg.system.channel_kind == ChannelKind::gaussian_prior) {
      if (auto b = hybrid_ncrlb(cfg, plan.seed + it->second, threads)) rec.ncrlb_db = to_db(*b);
    }
    rec.axis_values = point;
    rec.snr_db = cfg.snr_db;
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace tadc
