#include <doctest.h>

#include <cmath>
#include <limits>

#include "tadc/errors.hpp"
#include "tadc/numerics.hpp"
#include "tadc/quantizers.hpp"

using namespace tadc;

namespace {

const QuantizerSpec kT = QuantizerSpec::symmetric(AdcKind::ternary, 1.0);
const QuantizerSpec kPo = QuantizerSpec::symmetric(AdcKind::parallel_one_bit, 1.0);

}  // namespace

TEST_CASE("ternary rule") {
  CHECK(quantize_ternary(-5.0, kT) == BitPair{0, 0});
  CHECK(quantize_ternary(0.0, kT) == BitPair{1, 0});
  CHECK(quantize_ternary(1.0, kT) == BitPair{1, 1});
  CHECK(quantize_ternary(-1.0, kT) == BitPair{1, 0});
  CHECK_THROWS_AS(quantize_ternary(std::nan(""), kT), DomainError);
}

TEST_CASE("parallel one-bit rule") {
  CHECK(quantize_po(0.0, -2.0, 2.0, kPo) == BitPair{0, 1});
  CHECK(quantize_po(0.0, 0.0, 0.0, kPo) == BitPair{1, 0});
  CHECK(quantize_po(5.0, 0.9, -0.9, kPo) == BitPair{1, 1});
  CHECK_THROWS_AS(quantize_po(0.0, std::numeric_limits<double>::infinity(), 0.0, kPo), DomainError);
}

TEST_CASE("outcome code packing") {
  for (std::uint8_t c = 0; c < 4; ++c) CHECK(outcome_code(outcome_bits(c)) == c);
  CHECK(outcome_code({1, 0}) == 1);
  CHECK(outcome_code({0, 1}) == 2);
}

TEST_CASE("spec validation") {
  QuantizerSpec s = kT;
  s.tau1 = 1.0;
  s.tau2 = -1.0;
  CHECK_THROWS(s.validate());
  CHECK_THROWS(QuantizerSpec::symmetric(AdcKind::ternary, 0.0).validate());
  CHECK_NOTHROW(kT.validate());
}

TEST_CASE("block quantization saturates and respects the ternary exclusion") {
  RandomStream rng(3);
  const QuantizedBits Z = quantize_block(Vector::Constant(50, 1e6), 1.0, kT, rng);
  for (Eigen::Index i = 0; i < Z.rows(); ++i) CHECK(Z.code(i) == 3);

  Vector s(100000);
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = 3.0 * rng.normal();
  const QuantizedBits T = quantize_block(s, 1.0, kT, rng);
  int forbidden = 0;
  for (Eigen::Index i = 0; i < T.rows(); ++i) forbidden += T.code(i) == 2;
  CHECK(forbidden == 0);
}

TEST_CASE("block outcome frequencies match interval probabilities") {
  // Noise has variance sigma^2/2 per row, so the middle mass is
  // Q(sqrt2 * tau2 / sigma) - Q(sqrt2 * tau1 / sigma).
  const double sigma = 1.0;
  const double p_mid = std_normal_cdf(std::sqrt(2.0)) - std_normal_cdf(-std::sqrt(2.0));
  CHECK(p_mid == doctest::Approx(0.8427007929497149).epsilon(1e-12));
  RandomStream rng(12);
  const int n = 200000;
  for (const QuantizerSpec& spec : {kT, kPo}) {
    const QuantizedBits Z = quantize_block(Vector::Zero(n), sigma, spec, rng);
    int counts[4] = {0, 0, 0, 0};
    for (Eigen::Index i = 0; i < Z.rows(); ++i) counts[Z.code(i)]++;
    // Oracle probabilities per code for the two noise models.
    const double up = std_normal_cdf(-std::sqrt(2.0));  // one comparator above its threshold from below
    double p[4];
    if (spec.kind == AdcKind::ternary) {
      p[0] = up;
      p[1] = p_mid;
      p[2] = 0.0;
      p[3] = up;
    } else {
      const double b1 = 1.0 - up;  // Pr(n >= tau1)
      const double b2 = up;        // Pr(n >= tau2)
      p[0] = (1 - b1) * (1 - b2);
      p[1] = b1 * (1 - b2);
      p[2] = (1 - b1) * b2;
      p[3] = b1 * b2;
    }
    for (int c = 0; c < 4; ++c) {
      const double se = std::sqrt(p[c] * (1 - p[c]) / n);
      CAPTURE(c);
      CHECK(std::abs(counts[c] / double(n) - p[c]) <= 4 * se + 1e-12);
    }
  }
}

TEST_CASE("PO with shared noise reproduces the ternary distribution") {
  RandomStream rng(77);
  const int n = 100000;
  int counts_t[4] = {0, 0, 0, 0}, counts_po[4] = {0, 0, 0, 0};
  for (int i = 0; i < n; ++i) {
    const double v = 0.4 * rng.normal();
    const double noise = 0.8 * rng.normal();
    counts_t[outcome_code(quantize_ternary(v + noise, kT))]++;
    counts_po[outcome_code(quantize_po(v, noise, noise, kPo))]++;
  }
  for (int c = 0; c < 4; ++c) CHECK(counts_t[c] == counts_po[c]);
}

TEST_CASE("received-block quantization and slicing") {
  CMatrix Y(2, 3);
  Y << Complex(-2, 0.5), Complex(0.1, 3), Complex(1.5, -1.5), Complex(0, 0), Complex(-0.99, 1), Complex(4, -4);
  const QuantizedObservation obs = quantize_received(Y, kT);
  CHECK(obs.re(0, 0) == 0);
  CHECK(obs.im(0, 0) == 1);
  CHECK(obs.re(0, 1) == 1);
  CHECK(obs.im(0, 1) == 3);
  CHECK(obs.im(1, 1) == 3);
  const QuantizedObservation tail = slice_columns(obs, 1, 2);
  CHECK(tail.length() == 2);
  CHECK(tail.re(1, 1) == obs.re(1, 2));
  const QuantizedBits b = antenna_bits(obs, 1);
  REQUIRE(b.rows() == 6);
  CHECK(b.code(1) == obs.re(1, 1));
  CHECK(b.code(3 + 2) == obs.im(1, 2));
}

TEST_CASE("dynamic thresholds") {
  CMatrix Y = CMatrix::Zero(2, 3);
  Y(0, 0) = 12.0;
  auto [t1, t2] = dynamic_thresholds(Y, 2.0);
  CHECK(t2 == doctest::Approx(1.0));
  CHECK(t1 == doctest::Approx(-1.0));
  auto [s1, s2] = dynamic_thresholds(CMatrix(10.0 * Y), 2.0);
  CHECK(s2 == doctest::Approx(10.0));
  CHECK_THROWS(dynamic_thresholds(CMatrix::Zero(2, 3), 2.0));
}

TEST_CASE("dynamic threshold moment") {
  // Y = HX + N with unit-power entries; E||Y||_F ~ sqrt(MT (P_s K + sigma^2)).
  const int M = 64, T = 60, K = 1;
  RandomStream rng(40);
  CMatrix Y(M, T);
  for (int m = 0; m < M; ++m)
    for (int t = 0; t < T; ++t) Y(m, t) = rng.complex_normal(1.0) * rng.complex_normal(1.0) + rng.complex_normal(1.0);
  const double predicted = std::sqrt(1.0 * K + 1.0) * std::sqrt(double(M * T)) / (3.0 * M * T);
  CHECK(dynamic_thresholds(Y, 3.0).second == doctest::Approx(predicted).epsilon(0.05));
  CHECK(expected_frobenius_norm(M, T, K, 1.0, 1.0, 1.0) == doctest::Approx(std::sqrt(2.0 * M * T)).epsilon(1e-3));
}

TEST_CASE("labeled scale formula and values") {
  const double P = 2.0, delta = 1.5, tau = 0.7;
  const double alpha = std::sqrt(P / (4 * delta * delta * std_normal_cdf(-std::sqrt(2 * tau * tau / P))));
  CHECK(labeled_scale(tau, P, delta) == doctest::Approx(alpha).epsilon(1e-12));
  const QuantizerSpec s = QuantizerSpec::symmetric(AdcKind::ternary, tau).with_labels(P, delta);
  CHECK(s.scale == doctest::Approx(alpha).epsilon(1e-10));
  CHECK(labeled_quantize(-5.0, s) == doctest::Approx(-alpha * delta));
  CHECK(labeled_quantize(0.0, s) == 0.0);
  CHECK(labeled_quantize(tau, s) == doctest::Approx(alpha * delta));
  CHECK(labeled_value(0, s) == labeled_quantize(-5.0, s));
  CHECK(labeled_value(3, s) == labeled_quantize(5.0, s));
  CHECK_THROWS(kT.with_labels(0.0));
}

TEST_CASE("labels commute with quantization") {
  const QuantizerSpec s = kT.with_labels(1.7);
  RandomStream rng(9);
  for (int i = 0; i < 100000; ++i) {
    const double v = 2.0 * rng.normal();
    CHECK(labeled_quantize(v, s) == labeled_value(outcome_code(quantize_ternary(v, s)), s));
  }
}

TEST_CASE("labeled output variance equals input power") {
  const double P = 1.7;
  const QuantizerSpec s = QuantizerSpec::symmetric(AdcKind::ternary, 0.9).with_labels(P);
  RandomStream rng(10);
  const long n = 1000000;
  double acc = 0;
  for (long i = 0; i < n; ++i) {
    const Complex z = rng.complex_normal(P);
    acc += std::pow(labeled_quantize(z.real(), s), 2) + std::pow(labeled_quantize(z.imag(), s), 2);
  }
  CHECK(std::abs(acc / n / P - 1.0) < 0.02);
}

TEST_CASE("region limits") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(region_limits(0, kT) == std::pair<double, double>{-inf, -1.0});
  CHECK(region_limits(1, kT) == std::pair<double, double>{-1.0, 1.0});
  CHECK(region_limits(3, kT) == std::pair<double, double>{1.0, inf});
  CHECK(region_limits(2, kPo) == std::pair<double, double>{-1.0, 1.0});
}
