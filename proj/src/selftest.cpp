#include <cmath>
#include <functional>

#include "tadc/commands.hpp"
#include "tadc/numerics.hpp"

namespace tadc {

namespace {

// Visits every admissible outcome block of 2T rows.
void for_each_outcome(AdcKind kind, Eigen::Index rows, const std::function<void(const QuantizedBits&)>& fn) {
  const std::vector<std::uint8_t> codes =
      kind == AdcKind::ternary ? std::vector<std::uint8_t>{0, 1, 3} : std::vector<std::uint8_t>{0, 1, 2, 3};
  std::vector<std::size_t> idx(static_cast<std::size_t>(rows), 0);
  QuantizedBits Z;
  Z.kind = kind;
  Z.Z.resize(rows, 2);
  for (;;) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const BitPair b = outcome_bits(codes[idx[i]]);
      Z.Z(i, 0) = b[0];
      Z.Z(i, 1) = b[1];
    }
    fn(Z);
    Eigen::Index i = 0;
    while (i < rows && ++idx[i] == codes.size()) idx[i++] = 0;
    if (i == rows) return;
  }
}

struct Fixture {
  Matrix Xbar;
  ParameterVector eta;
  QuantizerSpec spec;
};

Fixture small_fixture(AdcKind kind) {
  CMatrix X(2, 2);
  X << Complex(0.7, -0.2), Complex(-0.4, 0.9), Complex(0.3, 0.5), Complex(1.1, -0.6);
  Fixture f;
  f.Xbar = to_bivariate_real(X);
  f.eta.gbar = Vector(4);
  f.eta.gbar << 0.3, -0.8, 0.5, 0.1;
  f.eta.sigma = 0.9;
  f.spec = QuantizerSpec::symmetric(kind, 0.6);
  return f;
}

bool check_normalization() {
  for (AdcKind kind : {AdcKind::ternary, AdcKind::parallel_one_bit}) {
    const Fixture f = small_fixture(kind);
    double total = 0.0;
    for_each_outcome(kind, f.Xbar.rows(), [&](const QuantizedBits& Z) { total += std::exp(llf(Z, f.Xbar, f.eta, f.spec)); });
    if (std::abs(total - 1.0) > 1e-10) return false;
  }
  return true;
}

bool check_fim_enumeration() {
  for (AdcKind kind : {AdcKind::ternary, AdcKind::parallel_one_bit}) {
    const Fixture f = small_fixture(kind);
    Matrix F = Matrix::Zero(f.eta.gbar.size() + 1, f.eta.gbar.size() + 1);
    for_each_outcome(kind, f.Xbar.rows(), [&](const QuantizedBits& Z) {
      const double p = std::exp(llf(Z, f.Xbar, f.eta, f.spec));
      const Vector s = llf_gradient(Z, f.Xbar, f.eta, f.spec);
      F += p * s * s.transpose();
    });
    const InfoMatrix info = fim_pa(f.Xbar, f.eta, f.spec);
    if ((info.F - F).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + F.cwiseAbs().maxCoeff())) return false;
  }
  return true;
}

bool check_siso_dual_path() {
  const Eigen::Vector2d g(0.4, -0.15);
  const SisoCrlb a = crlb_siso_closed_form(g, 1.0, -0.5, 0.5, 1.3, 7);
  const SisoCrlb b = crlb_siso_inverted_fim(g, 1.0, -0.5, 0.5, 1.3, 7);
  return std::abs(a.po - b.po) <= 1e-10 * b.po && std::abs(a.ternary - b.ternary) <= 1e-10 * b.ternary;
}

bool check_truncated_mean() {
  // Composite Simpson on a fine grid.
  const double c = 0.3, s = 1.7, lo = -0.4, hi = 2.5;
  const int n = 20000;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + (hi - lo) * i / n;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double d = std::exp(-0.5 * (x - c) * (x - c) / (s * s));
    num += w * x * d;
    den += w * d;
  }
  return std::abs(truncated_gaussian_mean(c, s, lo, hi) - num / den) < 1e-10;
}

bool check_inverse_cdf() {
  for (double p : {1e-300, 1e-12, 0.02, 0.3, 0.5, 0.77, 0.999, 1 - 1e-12}) {
    const double x = inv_std_normal_cdf(p);
    const double back = x < 0 ? std_normal_cdf(x) : 1.0 - std_normal_cdf(-x);
    if (std::abs(back - p) > 1e-12 * p) return false;
  }
  return true;
}

bool check_labeled_variance() {
  const double P = 2.5;
  const QuantizerSpec spec = QuantizerSpec::symmetric(AdcKind::ternary, 0.8).with_labels(P, 1.0);
  RandomStream rng(99);
  const long n = 200000;
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    const Complex z = rng.complex_normal(P);
    const double a = labeled_quantize(z.real(), spec);
    const double b = labeled_quantize(z.imag(), spec);
    acc += a * a + b * b;
  }
  return std::abs(acc / n / P - 1.0) < 0.03;
}

ExperimentConfig small_experiment(EstimatorKind e) {
  ExperimentConfig cfg;
  cfg.system.M = 4;
  cfg.system.K = 1;
  cfg.system.T_p = 8;
  cfg.system.T_d = 4;
  cfg.estimator = e;
  cfg.snr_db = 5.0;
  return cfg;
}

bool check_oracle() {
  for (const TrialOutcome& t : run_trials(small_experiment(EstimatorKind::oracle), 5, 3, 0, 1))
    if (!t.ok || t.nmse != 0.0) return false;
  return true;
}

bool check_thread_invariance(int threads) {
  const ExperimentConfig cfg = small_experiment(EstimatorKind::em);
  const auto a = run_trials(cfg, 6, 11, 2, 1);
  const auto b = run_trials(cfg, 6, 11, 2, std::max(threads, 2));
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].ok != b[i].ok || a[i].nmse != b[i].nmse || a[i].llf_trace != b[i].llf_trace) return false;
  return true;
}

bool check_em_monotone() {
  for (const TrialOutcome& t : run_trials(small_experiment(EstimatorKind::em), 6, 5, 0, 1)) {
    if (!t.ok) continue;
    for (std::size_t i = 1; i < t.llf_trace.size(); ++i)
      if (t.llf_trace[i] < t.llf_trace[i - 1] - 1e-9) return false;
  }
  return true;
}

bool check_distinct_regions() {
  const DistinctRegionProbability p = prob_distinct_regions(4, 1, 4);
  return p.lower_bound <= p.corrected_product + 1e-15 && p.corrected_product <= 1.0 &&
         p.literal_product >= p.corrected_product;
}

}  // namespace

bool SelftestReport::passed() const {
  for (const auto& [name, ok] : checks)
    if (!ok) return false;
  return true;
}

SelftestReport run_selftest(std::ostream& log, int threads) {
  const std::vector<std::pair<std::string, std::function<bool()>>> suite = {
      {"outcome probabilities sum to one", check_normalization},
      {"analytic FIM equals enumerated score outer product", check_fim_enumeration},
      {"SISO closed form equals inverted FIM", check_siso_dual_path},
      {"truncated Gaussian mean matches quadrature", check_truncated_mean},
      {"inverse normal CDF round trip", check_inverse_cdf},
      {"labeled output variance equals input power", check_labeled_variance},
      {"oracle estimator has zero NMSE", check_oracle},
      {"trial results independent of thread count", [threads] { return check_thread_invariance(threads); }},
      {"EM log-likelihood trace non-decreasing", check_em_monotone},
      {"distinct-region probability ordering", check_distinct_regions},
  };
  SelftestReport report;
  for (const auto& [name, fn] : suite) {
    bool ok = false;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      log << "  error: " << e.what() << '\n';
    }
    log << (ok ? "PASS " : "FAIL ") << name << '\n';
    report.checks.emplace_back(name, ok);
  }
  return report;
}

}  // namespace tadc
