#include <doctest.h>

#include <cmath>
#include <set>

#include "tadc/errors.hpp"
#include "tadc/signal_model.hpp"

using namespace tadc;

namespace {

CMatrix random_complex(int r, int c, RandomStream& rng) {
  CMatrix X(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) X(i, j) = Complex(rng.normal(), rng.normal());
  return X;
}

}  // namespace

TEST_CASE("bivariate real form of a scalar") {
  CMatrix X(1, 1);
  X(0, 0) = Complex(1.0, 2.0);
  Matrix expected(2, 2);
  expected << 1, -2, 2, 1;
  CHECK(to_bivariate_real(X) == expected);
}

TEST_CASE("real X has zero off-diagonal blocks") {
  CMatrix X(2, 3);
  X << 1, 2, 3, 4, 5, 6;
  const Matrix Xb = to_bivariate_real(X);
  CHECK(Xb.topRightCorner(3, 2).isZero(0.0));
  CHECK(Xb.bottomLeftCorner(3, 2).isZero(0.0));
}

TEST_CASE("bivariate product matches complex arithmetic") {
  RandomStream rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const CMatrix X = random_complex(2, 3, rng);
    const CVector g = random_complex(2, 1, rng);
    const CVector s = X.transpose() * g;
    const Vector lhs = to_bivariate_real(X) * to_bivariate_vector(g);
    CHECK((lhs - to_bivariate_vector(s)).norm() <= 1e-12);
  }
}

TEST_CASE("channel stacking round trip") {
  RandomStream rng(5);
  const CMatrix H = random_complex(3, 2, rng);
  const Vector chi = stack_channel(H);
  REQUIRE(chi.size() == 12);
  CHECK(chi.segment(0, 4) == to_bivariate_vector(CVector(H.row(0).transpose())));
  CHECK(unstack_channel(chi, 3, 2) == H);
  CHECK(from_bivariate_vector(to_bivariate_vector(CVector(H.col(0)))) == CVector(H.col(0)));
}

TEST_CASE("constellations have zero mean and unit average power") {
  for (ConstellationKind kind : {ConstellationKind::qpsk, ConstellationKind::qam16}) {
    const Constellation s = Constellation::make(kind, 2.5);
    Complex mean = 0;
    double power = 0;
    for (const Complex& p : s.points()) {
      mean += p;
      power += std::norm(p);
    }
    CHECK(std::abs(mean) / s.size() <= 1e-12);
    CHECK(std::abs(power / s.size() - 2.5) <= 1e-12);
    std::set<unsigned> labels(s.gray_labels().begin(), s.gray_labels().end());
    CHECK(static_cast<int>(labels.size()) == s.size());
  }
  const Constellation qpsk = Constellation::make(ConstellationKind::qpsk, 1.0);
  CHECK(qpsk.size() == 4);
  CHECK(qpsk.bits_per_symbol() == 2);
  for (const Complex& p : qpsk.points()) CHECK(std::abs(p) == doctest::Approx(1.0));
}

TEST_CASE("gray labels differ in one bit between nearest neighbours") {
  const Constellation s = Constellation::make(ConstellationKind::qam16, 10.0);
  const double d = 2.0;  // grid spacing for P_s = 10
  for (int i = 0; i < s.size(); ++i)
    for (int j = 0; j < s.size(); ++j)
      if (std::abs(std::abs(s.points()[i] - s.points()[j]) - d) < 1e-9)
        CHECK(__builtin_popcount(s.gray_labels()[i] ^ s.gray_labels()[j]) == 1);
}

TEST_CASE("nearest point decisions") {
  const Constellation s = Constellation::make(ConstellationKind::qpsk, 1.0);
  for (int i = 0; i < s.size(); ++i) CHECK(s.nearest(s.points()[i] * 0.3) == i);
}

TEST_CASE("candidate matrix enumerates every symbol vector") {
  const Constellation s = Constellation::make(ConstellationKind::qpsk, 1.0);
  const CMatrix C = candidate_matrix(s, 2);
  REQUIRE(C.rows() == 2);
  REQUIRE(C.cols() == 16);
  CHECK(C(0, 1) == s.points()[1]);
  CHECK(C(1, 1) == s.points()[0]);
  CHECK(C(1, 4) == s.points()[1]);
}

TEST_CASE("channel moments") {
  SystemConfig cfg;
  cfg.channel_variance = 1.0;
  RandomStream rng(17);
  const int n = 100000;
  double p = 0, re = 0, im = 0;
  for (int i = 0; i < n; ++i) {
    const Complex h = draw_channel(cfg, rng)(0, 0);
    p += std::norm(h);
    re += h.real() * h.real();
    im += h.imag() * h.imag();
  }
  CHECK(std::abs(p / n - 1.0) < 0.02);
  CHECK(std::abs(re / n - 0.5) < 0.02);
  CHECK(std::abs(im / n - 0.5) < 0.02);
}

TEST_CASE("draws are deterministic per seed") {
  SystemConfig cfg;
  cfg.M = 3;
  cfg.K = 2;
  RandomStream a(123), b(123), c(124);
  const CMatrix Ha = draw_channel(cfg, a);
  CHECK(Ha == draw_channel(cfg, b));
  CHECK(Ha != draw_channel(cfg, c));
  RandomStream s1 = RandomStream::substream(9, 3, 4), s2 = RandomStream::substream(9, 3, 4),
               s3 = RandomStream::substream(9, 4, 3);
  const double x = s1.normal();
  CHECK(x == s2.normal());
  CHECK(x != s3.normal());
}

TEST_CASE("symbol draws") {
  SystemConfig cfg;
  cfg.K = 1;
  const Constellation s = Constellation::make(ConstellationKind::qpsk, 1.0);
  RandomStream rng(8);
  CHECK(draw_symbols(cfg, s, 0, rng).cols() == 0);
  const int n = 100000;
  const CMatrix X = draw_symbols(cfg, s, n, rng);
  std::vector<int> counts(4, 0);
  for (int t = 0; t < n; ++t) {
    CHECK(std::abs(X(0, t)) == doctest::Approx(1.0));
    counts[s.nearest(X(0, t))]++;
  }
  // Multinomial counts within 3 standard deviations of n/4.
  const double sd = std::sqrt(n * 0.25 * 0.75);
  for (int c : counts) CHECK(std::abs(c - n / 4.0) < 3 * sd);
}

TEST_CASE("noise moments") {
  RandomStream rng(31);
  const CMatrix N = draw_noise(1000, 1000, 2.0, rng);
  CHECK(std::abs(N.real().array().square().mean() - 1.0) < 0.02);
  CHECK(std::abs(N.imag().array().square().mean() - 1.0) < 0.02);
}

TEST_CASE("orthogonal pilot") {
  const CMatrix X = orthogonal_pilot(3, 7, 2.0);
  CHECK((X * X.adjoint() - 14.0 * CMatrix::Identity(3, 3)).norm() <= 1e-12);
  CHECK_THROWS(orthogonal_pilot(4, 3, 1.0));
}

TEST_CASE("received signal") {
  RandomStream rng(2);
  const CMatrix H = random_complex(3, 1, rng);
  const CMatrix X = CMatrix::Ones(1, 4);
  const CMatrix Y = received_signal(H, X, CMatrix::Zero(3, 4));
  for (int t = 0; t < 4; ++t) CHECK(Y.col(t) == H);
  const CMatrix N = random_complex(3, 4, rng);
  CHECK(received_signal(CMatrix::Zero(3, 1), X, N) == N);

  const CMatrix H2 = random_complex(4, 3, rng), X2 = random_complex(3, 5, rng), N2 = random_complex(4, 5, rng);
  CMatrix naive = N2;
  for (int m = 0; m < 4; ++m)
    for (int t = 0; t < 5; ++t)
      for (int k = 0; k < 3; ++k) naive(m, t) += H2(m, k) * X2(k, t);
  CHECK((received_signal(H2, X2, N2) - naive).norm() <= 1e-12);
  CHECK_THROWS_AS(received_signal(H2, X, N2), ShapeError);
}

TEST_CASE("system config validation") {
  SystemConfig cfg;
  cfg.M = 0;
  CHECK_THROWS(cfg.validate());
  cfg.M = 2;
  cfg.noise_variance = 4.0;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.sigma() == doctest::Approx(2.0));
}
