#include <doctest.h>

#include <cmath>

#include "tadc/errors.hpp"
#include "tadc/bounds.hpp"
#include "tadc/estimators.hpp"
#include "tadc/harness.hpp"
#include "tadc/numerics.hpp"
#include "test_support.hpp"

using namespace tadc;

namespace {

CMatrix random_pilot(int K, int T, RandomStream& rng) {
  CMatrix X(K, T);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) X(k, t) = Complex(rng.normal(), rng.normal()) / std::sqrt(2.0);
  return X;
}

ReparamProblem random_problem(AdcKind kind, int M, int K, int T, RandomStream& rng) {
  const Matrix Xbar = to_bivariate_real(random_pilot(K, T, rng));
  ReparamProblem p;
  p.kind = kind;
  p.tau1 = -0.7;
  p.tau2 = 0.7;
  p.K = K;
  const QuantizerSpec spec = QuantizerSpec::symmetric(kind, 0.7);
  for (int m = 0; m < M; ++m) {
    ParameterVector eta{Vector(2 * K), 1.0};
    for (int i = 0; i < 2 * K; ++i) eta.gbar(i) = rng.normal();
    const QuantizedBits Z = tadc::testing::simulate_outcome(Xbar, eta, spec, rng);
    std::vector<std::uint8_t> codes(Z.rows());
    for (Eigen::Index i = 0; i < Z.rows(); ++i) codes[i] = Z.code(i);
    AntennaRows rows;
    rows.append(Xbar, codes, 1.0);
    p.antennas.push_back(rows);
  }
  return p;
}

// Ternary SISO block of T_p rows per part with the given count of z1 = 1 and
// z2 = 1 outcomes in each part (z2 = 1 implies z1 = 1).
QuantizedBits siso_block(int T_p, const int ones1[2], const int ones2[2]) {
  QuantizedBits Z;
  Z.kind = AdcKind::ternary;
  Z.Z = BitMatrix::Zero(2 * T_p, 2);
  for (int j = 0; j < 2; ++j)
    for (int t = 0; t < T_p; ++t) {
      Z.Z(j * T_p + t, 0) = t < ones1[j];
      Z.Z(j * T_p + t, 1) = t < ones2[j];
    }
  return Z;
}

ExperimentConfig small_config(EstimatorKind e, double snr_db) {
  ExperimentConfig cfg;
  cfg.system.M = 4;
  cfg.system.K = 1;
  cfg.system.T_p = 8;
  cfg.system.T_d = 6;
  cfg.estimator = e;
  cfg.snr_db = snr_db;
  return cfg;
}

}  // namespace

TEST_CASE("reparameterized objective is concave with consistent derivatives") {
  RandomStream rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    const ReparamProblem p = random_problem(rep % 2 ? AdcKind::ternary : AdcKind::parallel_one_bit, 1 + rep % 3, 1 + rep % 2, 6, rng);
    Vector theta(p.dim());
    for (Eigen::Index i = 0; i + 1 < theta.size(); ++i) theta(i) = rng.normal();
    theta(theta.size() - 1) = rng.uniform(0.3, 2.0);
    Vector g;
    Matrix H;
    const double v = reparam_derivatives(p, theta, g, H);
    CHECK(v == doctest::Approx(reparam_value(p, theta)).epsilon(1e-14));
    const Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    CHECK(es.eigenvalues().maxCoeff() <= 1e-8);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Vector a = theta, b = theta;
      a(i) += h;
      b(i) -= h;
      const double fd = (reparam_value(p, a) - reparam_value(p, b)) / (2 * h);
      CHECK(g(i) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("Newton ML is stationary at convergence") {
  RandomStream rng(22);
  const CMatrix X = random_pilot(2, 50, rng);
  const Matrix Xbar = to_bivariate_real(X);
  for (AdcKind kind : {AdcKind::ternary, AdcKind::parallel_one_bit}) {
    const QuantizerSpec spec = QuantizerSpec::symmetric(kind, 0.5);
    ParameterVector truth{Vector(4), 0.9};
    truth.gbar << 0.5, -0.3, 0.2, 0.6;
    const QuantizedBits Z = tadc::testing::simulate_outcome(Xbar, truth, spec, rng);
    const EstimateResult r = newton_raphson_ml(Z, Xbar, spec, SolverOptions{}, ParameterVector{Vector::Zero(4), 1.0});
    CHECK(r.converged);
    CHECK(r.grad_norm <= SolverOptions{}.grad_tol);
    CHECK(r.sigma_hat > 0);
  }
}

TEST_CASE("all-saturated outcomes are not identifiable") {
  const Matrix Xbar = to_bivariate_real(CMatrix::Ones(1, 4));
  QuantizedBits Z;
  Z.kind = AdcKind::ternary;
  Z.Z = BitMatrix::Ones(8, 2);
  const QuantizerSpec spec = QuantizerSpec::symmetric(AdcKind::ternary, 1.0);
  CHECK_THROWS_AS(newton_raphson_ml(Z, Xbar, spec, SolverOptions{}, ParameterVector{Vector::Zero(2), 1.0}),
                  IdentifiabilityError);
}

TEST_CASE("SISO closed-form ML") {
  // Frequencies 0.75 / 0.25 in both parts: theta = (0.6745, -0.6745), s = 0.
  const int T = 4;
  const int a[2] = {3, 3}, b[2] = {1, 1};
  const Eigen::Vector2d g = siso_ml_closed_form(siso_block(T, a, b), -1.0, 1.0, 1.0, T);
  CHECK(std::abs(g(0)) <= 1e-15);
  CHECK(std::abs(g(1)) <= 1e-15);

  const int c[2] = {2, 2}, d[2] = {2, 2};
  CHECK_THROWS_AS(siso_ml_closed_form(siso_block(T, c, d), -1.0, 1.0, 1.0, T), DegenerateError);

  // Hand evaluation of the invariance map for an asymmetric block.
  const int T2 = 20;
  const int e[2] = {17, 11}, f[2] = {6, 2};
  const Eigen::Vector2d h = siso_ml_closed_form(siso_block(T2, e, f), -0.5, 0.5, 2.0, T2);
  double s[2];
  for (int j = 0; j < 2; ++j) {
    const double t1 = inv_std_normal_cdf(e[j] / double(T2)), t2 = inv_std_normal_cdf(f[j] / double(T2));
    s[j] = (t1 * 0.5 - t2 * -0.5) / (t1 - t2);
  }
  CHECK(h(0) == doctest::Approx((s[0] + s[1]) / (2 * std::sqrt(2.0))).epsilon(1e-14));
  CHECK(h(1) == doctest::Approx((s[1] - s[0]) / (2 * std::sqrt(2.0))).epsilon(1e-14));
}

TEST_CASE("Newton ML matches the closed form when one sigma fits both parts") {
  // Mirrored frequencies give equal theta gaps in both parts, so the
  // unrestricted maximizer lies inside the shared-sigma model.
  const int T = 40;
  const int z1[2] = {31, 40 - 12}, z2[2] = {12, 40 - 31};
  const QuantizedBits Z = siso_block(T, z1, z2);
  const double ps = 1.5;
  const Eigen::Vector2d closed = siso_ml_closed_form(Z, -0.6, 0.6, ps, T);
  const CMatrix X = CMatrix::Constant(1, T, Complex(std::sqrt(ps), std::sqrt(ps)));
  const QuantizerSpec spec = QuantizerSpec::symmetric(AdcKind::ternary, 0.6);
  const EstimateResult r = newton_raphson_ml(Z, to_bivariate_real(X), spec, SolverOptions{}, ParameterVector{Vector::Zero(2), 1.0});
  CHECK(std::abs(r.gbar_hat()(0) - closed(0)) <= 1e-6);
  CHECK(std::abs(r.gbar_hat()(1) - closed(1)) <= 1e-6);
}

TEST_CASE("SISO closed form is consistent") {
  const double ps = 1.0, tau = 0.8;
  const Eigen::Vector2d g(0.35, -0.2);
  const int T = 100000;
  const CMatrix X = CMatrix::Constant(1, T, Complex(1.0, 1.0));
  const QuantizerSpec spec = QuantizerSpec::symmetric(AdcKind::ternary, tau);
  RandomStream rng(23);
  const QuantizedBits Z = tadc::testing::simulate_outcome(to_bivariate_real(X), ParameterVector{g, 1.0}, spec, rng);
  const Eigen::Vector2d est = siso_ml_closed_form(Z, -tau, tau, ps, T);
  const SisoCrlb bound = crlb_siso_closed_form(g, 1.0, -tau, tau, ps, T);
  CHECK(std::abs(est(0) - g(0)) <= 3 * std::sqrt(bound.ternary));
  CHECK(std::abs(est(1) - g(1)) <= 3 * std::sqrt(bound.ternary));
}

TEST_CASE("Newton ML is efficient on a long pilot") {
  // Fixed channel, K = 2, T_p = 2000, SNR 5 dB: empirical MSE within 15% of tr CRLB.
  const int K = 2, T = 2000, trials = 500;
  const double ps = std::pow(10.0, 0.5);
  RandomStream prng(24);
  const CMatrix X = random_pilot(K, T, prng) * std::sqrt(ps);
  const Matrix Xbar = to_bivariate_real(X);
  ParameterVector truth{Vector(4), 1.0};
  truth.gbar << 0.4, -0.25, 0.3, 0.35;
  const QuantizerSpec spec = QuantizerSpec::symmetric(AdcKind::ternary, 1.0);
  const double bound = crlb_pa(fim_pa(Xbar, truth, spec)).channel_trace;
  double mse = 0;
  for (int i = 0; i < trials; ++i) {
    RandomStream rng = RandomStream::substream(25, 0, i);
    const QuantizedBits Z = tadc::testing::simulate_outcome(Xbar, truth, spec, rng);
    const EstimateResult r = newton_raphson_ml(Z, Xbar, spec, SolverOptions{}, ParameterVector{Vector::Zero(4), 1.0});
    mse += (r.gbar_hat() - truth.gbar).squaredNorm();
  }
  mse /= trials;
  CHECK(std::abs(mse / bound - 1.0) <= 0.15);
}

TEST_CASE("EM without data reduces to Newton ML") {
  RandomStream rng(26);
  ExperimentConfig cfg = small_config(EstimatorKind::em, 3.0).at_snr();
  cfg.system.T_d = 0;
  const TrialScene scene = realize_scene(cfg, rng);
  RandomStream er(1);
  const EstimateResult em = run_estimator(cfg, scene, er);
  cfg.estimator = EstimatorKind::nr_ml;
  const EstimateResult nr = run_estimator(cfg, scene, er);
  CHECK((em.H_hat - nr.H_hat).norm() <= 1e-10 * nr.H_hat.norm());
  CHECK(em.sigma_hat == doctest::Approx(nr.sigma_hat).epsilon(1e-10));
}

TEST_CASE("grouping extremes are bit-identical to EM and PEM") {
  RandomStream rng(27);
  const ExperimentConfig cfg = small_config(EstimatorKind::em, 6.0).at_snr();
  const TrialScene sc = realize_scene(cfg, rng);
  const Constellation s = Constellation::make(cfg.system.constellation, cfg.system.symbol_power);
  const SolverOptions o;
  const EstimateResult em = em_deterministic(sc.obs_p, sc.obs_d, sc.Xp, s, sc.spec, o);
  const EstimateResult g1 = gpem_deterministic(sc.obs_p, sc.obs_d, sc.Xp, s, sc.spec, o, 1);
  CHECK(em.H_hat == g1.H_hat);
  CHECK(em.llf_trace == g1.llf_trace);
  CHECK(em.sigma_hat == g1.sigma_hat);
  const EstimateResult pem = pem_deterministic(sc.obs_p, sc.obs_d, sc.Xp, s, sc.spec, o);
  const EstimateResult gM = gpem_deterministic(sc.obs_p, sc.obs_d, sc.Xp, s, sc.spec, o, cfg.system.M);
  CHECK(pem.H_hat == gM.H_hat);
  CHECK(pem.group_sigma.size() == cfg.system.M);
  CHECK(pem.sigma_hat == doctest::Approx(pem.group_sigma.mean()));
  CHECK_THROWS(gpem_deterministic(sc.obs_p, sc.obs_d, sc.Xp, s, sc.spec, o, cfg.system.M + 1));
}

TEST_CASE("EM llf trace is non-decreasing") {
  for (EstimatorKind e : {EstimatorKind::em, EstimatorKind::pem, EstimatorKind::gpem})
    for (const TrialOutcome& t : run_trials(small_config(e, 4.0), 10, 28, 0, 1)) {
      REQUIRE(t.ok);
      for (std::size_t i = 1; i < t.llf_trace.size(); ++i) CHECK(t.llf_trace[i] >= t.llf_trace[i - 1] - 1e-9);
    }
}

TEST_CASE("EM detects data almost perfectly at high SNR") {
  ExperimentConfig cfg = small_config(EstimatorKind::em, 30.0);
  cfg.system.M = 8;
  cfg.system.T_p = 10;
  cfg.system.T_d = 10;
  double errors = 0;
  const auto trials = run_trials(cfg, 100, 29, 0, 1);
  for (const TrialOutcome& t : trials) {
    REQUIRE(t.ok);
    REQUIRE(t.ser.has_value());
    errors += *t.ser;
  }
  CHECK(errors / trials.size() <= 0.01);
}

TEST_CASE("EM refuses configurations beyond the enumeration cap") {
  ExperimentConfig cfg = small_config(EstimatorKind::em, 0.0);
  cfg.system.K = 5;
  cfg.system.constellation = ConstellationKind::qam16;
  cfg.system.T_p = 10;
  CHECK_THROWS_AS(cfg.validate(), UnsupportedConfigError);
}

TEST_CASE("zero-forcing initializer") {
  RandomStream rng(30);
  const CMatrix X = orthogonal_pilot(2, 6, 1.0);
  CMatrix H(3, 2);
  for (int m = 0; m < 3; ++m)
    for (int k = 0; k < 2; ++k) H(m, k) = rng.complex_normal(1.0);
  CHECK((zf_init(H * X, X) - H).norm() <= 1e-12);

  const CMatrix Xr = random_pilot(2, 7, rng);
  CMatrix Y = H * Xr;
  for (int m = 0; m < 3; ++m)
    for (int t = 0; t < 7; ++t) Y(m, t) += rng.complex_normal(1.0);
  const QuantizerSpec spec = QuantizerSpec::symmetric(AdcKind::ternary, 0.5).with_labels(3.0);
  const CMatrix Z = labeled_output(quantize_received(Y, spec), spec);
  const CMatrix Hh = zf_init(Z, Xr);
  CHECK(((Z - Hh * Xr) * Xr.adjoint()).norm() <= 1e-10);
  CHECK_THROWS_AS(zf_init(CMatrix::Ones(3, 1), random_pilot(2, 1, rng)), SingularPilotError);
}

TEST_CASE("symbol detection tie rules") {
  Matrix post = Matrix::Zero(4, 3);
  post(2, 0) = 1.0;
  post.col(1).setConstant(0.25);
  post(3, 2) = 0.6;
  post(1, 2) = 0.4;
  CHECK(detect_symbols(post) == std::vector<int>{2, 0, 3});

  const Constellation s = Constellation::make(ConstellationKind::qpsk, 1.0);
  CMatrix X(1, 4);
  for (int i = 0; i < 4; ++i) X(0, i) = s.points()[i] * 1.7;
  const CMatrix D = hard_decision(X, s);
  for (int i = 0; i < 4; ++i) CHECK(D(0, i) == s.points()[i]);
}

TEST_CASE("solver options validation") {
  SolverOptions o;
  o.max_newton_iters = 0;
  CHECK_THROWS(o.validate());
  o = SolverOptions{};
  o.grad_tol = -1;
  CHECK_THROWS(o.validate());
}
