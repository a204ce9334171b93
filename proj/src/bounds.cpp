#include "tadc/bounds.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "tadc/errors.hpp"
#include "tadc/numerics.hpp"
#include "tadc/parallel.hpp"
#include "tadc/random.hpp"

namespace tadc {

bool InfoMatrix::is_symmetric(double tol) const {
  const double scale = std::max(1.0, F.cwiseAbs().maxCoeff());
  return (F - F.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool InfoMatrix::is_psd(double rel_tol) const {
  Eigen::SelfAdjointEigenSolver<Matrix> es(F, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -rel_tol * std::max(F.norm(), 1e-300);
}

InfoKind deterministic_kind(AdcKind kind) {
  return kind == AdcKind::ternary ? InfoKind::deterministic_t : InfoKind::deterministic_po;
}

InfoMatrix fim_from_args(AdcKind kind, const Matrix& Xbar, const Matrix& A, double sigma) {
  if (!(sigma > 0)) throw DomainError("fim: sigma must be positive");
  if (A.rows() != Xbar.rows() || A.cols() != 2) throw ShapeError("fim: A must be 2T x 2 matching Xbar");
  const Eigen::Index n = Xbar.cols();
  Vector w_gg(A.rows());
  Vector w_gs(A.rows());
  double f_ss = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const Eigen::Matrix2d I = row_information(kind, A(i, 0), A(i, 1));
    const Eigen::Vector2d a = A.row(i).transpose();
    w_gg(i) = I.sum();
    w_gs(i) = (I * a).sum();
    f_ss += a.dot(I * a);
  }
  // dA_ij/dgbar = sqrt(2) xbar_i / sigma, dA_ij/dsigma = -A_ij / sigma.
  InfoMatrix out;
  out.kind = deterministic_kind(kind);
  out.F.resize(n + 1, n + 1);
  out.F.topLeftCorner(n, n) = (2.0 / (sigma * sigma)) * Xbar.transpose() * w_gg.asDiagonal() * Xbar;
  const Vector cross = -(std::numbers::sqrt2 / (sigma * sigma)) * (Xbar.transpose() * w_gs);
  out.F.topRightCorner(n, 1) = cross;
  out.F.bottomLeftCorner(1, n) = cross.transpose();
  out.F(n, n) = f_ss / (sigma * sigma);
  return out;
}

InfoMatrix fim_po(const Matrix& Xbar, const ParameterVector& eta, const QuantizerSpec& spec) {
  return fim_from_args(AdcKind::parallel_one_bit, Xbar, standardized_args(Xbar, eta, spec), eta.sigma);
}

InfoMatrix fim_ternary(const Matrix& Xbar, const ParameterVector& eta, const QuantizerSpec& spec) {
  return fim_from_args(AdcKind::ternary, Xbar, standardized_args(Xbar, eta, spec), eta.sigma);
}

InfoMatrix fim_pa(const Matrix& Xbar, const ParameterVector& eta, const QuantizerSpec& spec) {
  return fim_from_args(spec.kind, Xbar, standardized_args(Xbar, eta, spec), eta.sigma);
}

InfoMatrix fim_pa_chi(const CMatrix& H, double sigma, const CMatrix& X, const QuantizerSpec& spec) {
  if (H.cols() != X.rows()) throw ShapeError("fim_pa_chi: H and X disagree on K");
  const Eigen::Index M = H.rows();
  const Eigen::Index n = 2 * H.cols();
  const Matrix Xbar = to_bivariate_real(X);
  InfoMatrix out;
  out.kind = deterministic_kind(spec.kind);
  out.F = Matrix::Zero(M * n + 1, M * n + 1);
  for (Eigen::Index m = 0; m < M; ++m) {
    const ParameterVector eta{to_bivariate_vector(H.row(m).transpose()), sigma};
    const InfoMatrix Fm = fim_pa(Xbar, eta, spec);
    out.F.block(m * n, m * n, n, n) = Fm.F.topLeftCorner(n, n);
    out.F.block(m * n, M * n, n, 1) = Fm.F.topRightCorner(n, 1);
    out.F.block(M * n, m * n, 1, n) = Fm.F.bottomLeftCorner(1, n);
    out.F(M * n, M * n) += Fm.F(n, n);
  }
  return out;
}

CrlbResult crlb_pa(const InfoMatrix& info) {
  const Matrix& F = info.F;
  if (F.rows() != F.cols() || F.rows() < 2) throw ShapeError("crlb_pa: information matrix must be square");
  const Eigen::Index n = F.rows() - 1;
  const Matrix Fs = 0.5 * (F + F.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(Fs);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(n);
  if (!(lo > 0) || hi / lo > 1e12)
    throw SingularInformationError("crlb_pa: information matrix is singular or ill-conditioned",
                                   es.eigenvectors().col(0));
  CrlbResult r;
  Eigen::LLT<Matrix> llt(Fs);
  r.inverse = llt.solve(Matrix::Identity(n + 1, n + 1));
  r.channel_trace = r.inverse.topLeftCorner(n, n).trace();

  Eigen::LLT<Matrix> llt_g(Fs.topLeftCorner(n, n));
  if (llt_g.info() != Eigen::Success)
    throw SingularInformationError("crlb_pa: channel block is singular", es.eigenvectors().col(0));
  const Matrix Fg_inv = llt_g.solve(Matrix::Identity(n, n));
  r.known_sigma_trace = Fg_inv.trace();
  const Vector f = Fs.topRightCorner(n, 1);
  const Vector u = Fg_inv * f;
  const double schur = Fs(n, n) - f.dot(u);
  r.sherman_morrison_trace = r.known_sigma_trace + u.squaredNorm() / schur;
  return r;
}

double full_resolution_crlb(int K, double noise_variance, double symbol_power, int T_p) {
  return K * noise_variance / (2.0 * symbol_power * T_p);
}

Eigen::Matrix2d siso_theta(const Eigen::Vector2d& gbar, double sigma, double tau1, double tau2,
                           double symbol_power) {
  const double r = std::sqrt(symbol_power);
  const Eigen::Vector2d s(r * (gbar(0) - gbar(1)), r * (gbar(0) + gbar(1)));
  const double k = std::numbers::sqrt2 / sigma;
  Eigen::Matrix2d theta;
  for (int j = 0; j < 2; ++j) {
    theta(j, 0) = k * (s(j) - tau1);
    theta(j, 1) = k * (s(j) - tau2);
  }
  return theta;
}

SisoCrlb crlb_siso_closed_form(const Eigen::Vector2d& gbar, double sigma, double tau1, double tau2,
                               double symbol_power, int T_p) {
  if (!(sigma > 0) || !(symbol_power > 0) || T_p < 1) throw DomainError("crlb_siso_closed_form: bad scalars");
  if (!(tau1 < tau2)) throw DegenerateError("crlb_siso_closed_form: thresholds coincide");
  const Eigen::Matrix2d theta = siso_theta(gbar, sigma, tau1, tau2, symbol_power);
  auto c = [](double x) {
    return std::exp(log_std_normal_cdf(x) + log_std_normal_cdf(-x) - 2.0 * log_std_normal_pdf(x));
  };
  SisoCrlb out;
  for (int j = 0; j < 2; ++j) {
    const double t1 = theta(j, 0);
    const double t2 = theta(j, 1);
    const double gap = t1 - t2;
    if (!(gap != 0.0)) throw DegenerateError("crlb_siso_closed_form: theta components coincide");
    const double pre = sigma * sigma / (8.0 * symbol_power * T_p * gap * gap);
    const double common = t2 * t2 * c(t1) + t1 * t1 * c(t2);
    const double coupling = 2.0 * t1 * t2 *
                            std::exp(log_std_normal_cdf(-t1) + log_std_normal_cdf(t2) - log_std_normal_pdf(t1) -
                                     log_std_normal_pdf(t2));
    out.po += pre * common;
    out.ternary += pre * (common - coupling);
  }
  return out;
}

SisoCrlb crlb_siso_inverted_fim(const Eigen::Vector2d& gbar, double sigma, double tau1, double tau2,
                                double symbol_power, int T_p) {
  if (!(sigma > 0) || !(symbol_power > 0) || T_p < 1) throw DomainError("crlb_siso_inverted_fim: bad scalars");
  if (!(tau1 < tau2)) throw DegenerateError("crlb_siso_inverted_fim: thresholds coincide");
  const Eigen::Matrix2d theta = siso_theta(gbar, sigma, tau1, tau2, symbol_power);
  SisoCrlb out;
  for (int j = 0; j < 2; ++j) {
    const double t1 = theta(j, 0);
    const double t2 = theta(j, 1);
    const double gap = t1 - t2;
    if (!(gap != 0.0)) throw DegenerateError("crlb_siso_inverted_fim: theta components coincide");
    // r_j = (t1 tau2 - t2 tau1)/(t1 - t2) and both components of gbar are
    // (+-r_1 + r_2)/(2 sqrt(P_s)), so each sees the same gradient up to sign.
    const Eigen::Vector2d dr(t2 * (tau1 - tau2) / (gap * gap), t1 * (tau2 - tau1) / (gap * gap));
    const Eigen::Vector2d J = dr / (2.0 * std::sqrt(symbol_power));
    for (AdcKind kind : {AdcKind::parallel_one_bit, AdcKind::ternary}) {
      const Eigen::Matrix2d F = static_cast<double>(T_p) * row_information(kind, t1, t2);
      const double v = J.dot(F.ldlt().solve(J));
      (kind == AdcKind::ternary ? out.ternary : out.po) += v;
    }
  }
  return out;
}

HybridInfo hybrid_crlb(const CMatrix& X, int M, double gbar_prior_variance, double sigma, const QuantizerSpec& spec,
                       const HybridOptions& opts) {
  if (!(gbar_prior_variance > 0)) throw DomainError("hybrid_crlb: prior variance must be positive");
  HybridInfo out;
  if (opts.num_mc < 100) {
    const std::string msg = "hybrid_crlb: fewer than 100 channel draws";
    if (opts.strict) throw DomainError(msg);
    out.warnings.push_back(msg);
  }
  if (opts.num_mc < 2) throw DomainError("hybrid_crlb: need at least two channel draws");
  const Eigen::Index K = X.rows();
  const Eigen::Index dim = 2 * M * K + 1;
  constexpr long chunk = 64;
  const long chunks = (opts.num_mc + chunk - 1) / chunk;
  std::vector<Matrix> sum1(chunks), sum2(chunks);
  const double sd = std::sqrt(gbar_prior_variance);
  parallel_for(static_cast<std::size_t>(chunks), opts.threads, [&](std::size_t c) {
    RandomStream rng = RandomStream::substream(opts.seed, c);
    Matrix s1 = Matrix::Zero(dim, dim);
    Matrix s2 = Matrix::Zero(dim, dim);
    const long first = static_cast<long>(c) * chunk;
    const long last = std::min(opts.num_mc, first + chunk);
    for (long d = first; d < last; ++d) {
      CMatrix H(M, K);
      for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index m = 0; m < M; ++m) {
          const double re = sd * rng.normal();
          const double im = sd * rng.normal();
          H(m, k) = Complex(re, im);
        }
      const Matrix F = fim_pa_chi(H, sigma, X, spec).F;
      s1 += F;
      s2 += F.cwiseProduct(F);
    }
    sum1[c] = std::move(s1);
    sum2[c] = std::move(s2);
  });
  Matrix total1 = Matrix::Zero(dim, dim);
  Matrix total2 = Matrix::Zero(dim, dim);
  for (long c = 0; c < chunks; ++c) {
    total1 += sum1[c];
    total2 += sum2[c];
  }
  const double n = static_cast<double>(opts.num_mc);
  const Matrix mean = total1 / n;
  const Matrix var = ((total2 / n) - mean.cwiseProduct(mean)).cwiseMax(0.0) * (n / (n - 1.0));
  out.std_error = (var / n).cwiseSqrt();
  out.him.kind = InfoKind::hybrid;
  out.him.F = mean;
  out.him.F.topLeftCorner(dim - 1, dim - 1).diagonal().array() += 1.0 / gbar_prior_variance;
  out.draws = opts.num_mc;
  return out;
}

InfoMatrix fim_jpd(const InfoMatrix& pa, const InfoMatrix& npa) {
  if (pa.F.rows() != npa.F.rows() || pa.F.cols() != npa.F.cols()) throw ShapeError("fim_jpd: size mismatch");
  return {pa.F + npa.F, InfoKind::jpd};
}

DistinctRegionProbability prob_distinct_regions(int M, int K, int constellation_size) {
  if (M < 1 || K < 1 || constellation_size < 1) throw DomainError("prob_distinct_regions: bad sizes");
  const double log_L = K * std::log(static_cast<double>(constellation_size));
  if (log_L > 40.0) throw DomainError("prob_distinct_regions: |S|^K not representable");
  const long L = std::lround(std::exp(log_L));
  // Every factor is 1 + (1 - c)/3^M; 3^-M is formed in the log domain. A
  // nonpositive factor means more candidates than regions: probability 0.
  const double inv_n = std::exp(-M * std::log(3.0));
  auto log_factor = [&](double c) {
    const double x = (1.0 - c) * inv_n;
    return x <= -1.0 ? -std::numeric_limits<double>::infinity() : std::log1p(x);
  };
  double log_literal = 0.0;
  for (long c = 0; c <= L; ++c) log_literal += log_factor(static_cast<double>(c));
  double log_corrected = 0.0;
  for (long c = 1; c <= L; ++c) log_corrected += log_factor(static_cast<double>(c));
  const double log_bound = static_cast<double>(L) * log_factor(static_cast<double>(L));
  return {std::exp(log_literal), std::exp(log_corrected), std::exp(log_bound)};
}

}  // namespace tadc
