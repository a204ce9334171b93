#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "tadc/bounds.hpp"
#include "tadc/errors.hpp"
#include "tadc/numerics.hpp"
#include "tadc/parallel.hpp"
#include "tadc/random.hpp"

namespace tadc {

namespace {

// Mixture model of a single data column: 2M real components (Re and Im of
// each antenna), L candidate symbol vectors.
struct ColumnMixture {
  AdcKind kind;
  double sigma;
  double tau[2];
  int M, K, L;
  Matrix sig;        // 2M x L: noiseless component value for each candidate
  Matrix xrow_re;    // L x 2K: bivariate row multiplying gbar_m for the real part
  Matrix xrow_im;    // L x 2K: same for the imaginary part
  Vector sig_true;   // 2M: component values under the transmitted column

  ColumnMixture(const CMatrix& H, double sigma_, const CVector& x_true, const CMatrix& cand, const QuantizerSpec& spec)
      : kind(spec.kind), sigma(sigma_), tau{spec.tau1, spec.tau2},
        M(static_cast<int>(H.rows())), K(static_cast<int>(H.cols())), L(static_cast<int>(cand.cols())) {
    const CMatrix S = H * cand;
    sig.resize(2 * M, L);
    for (int m = 0; m < M; ++m) {
      sig.row(2 * m) = S.row(m).real();
      sig.row(2 * m + 1) = S.row(m).imag();
    }
    xrow_re.resize(L, 2 * K);
    xrow_im.resize(L, 2 * K);
    for (int l = 0; l < L; ++l) {
      const CVector x = cand.col(l);
      xrow_re.row(l) << x.real().transpose(), -x.imag().transpose();
      xrow_im.row(l) << x.imag().transpose(), x.real().transpose();
    }
    const CVector st = H * x_true;
    sig_true.resize(2 * M);
    for (int m = 0; m < M; ++m) {
      sig_true(2 * m) = st(m).real();
      sig_true(2 * m + 1) = st(m).imag();
    }
  }

  int dim() const { return 2 * M * K + 1; }

  // Mixture score for one outcome vector (2M codes). Also returns the largest
  // posterior weight over candidates.
  double score(const std::uint8_t* codes, Vector& out, Vector& logp, Matrix& scores) const {
    const double k = std::numbers::sqrt2 / sigma;
    scores.setZero();
    logp.setZero();
    for (int l = 0; l < L; ++l) {
      for (int c = 0; c < 2 * M; ++c) {
        const double s = sig(c, l);
        const double a1 = k * (s - tau[0]);
        const double a2 = k * (s - tau[1]);
        const RowDerivatives d = row_log_prob_derivatives(kind, codes[c], a1, a2);
        logp(l) += d.value;
        const int m = c / 2;
        const double gsum = k * (d.grad(0) + d.grad(1));
        if (c % 2 == 0)
          scores.col(l).segment(2 * K * m, 2 * K) += gsum * xrow_re.row(l).transpose();
        else
          scores.col(l).segment(2 * K * m, 2 * K) += gsum * xrow_im.row(l).transpose();
        scores(2 * M * K, l) -= (d.grad(0) * a1 + d.grad(1) * a2) / sigma;
      }
    }
    const double top = logp.maxCoeff();
    Vector w = (logp.array() - top).exp();
    const double total = w.sum();
    w /= total;
    out.noalias() = scores * w;
    return w.maxCoeff();
  }
};

std::vector<std::uint8_t> admissible_codes(AdcKind kind) {
  if (kind == AdcKind::ternary) return {0, 1, 3};
  return {0, 1, 2, 3};
}

// Draws one outcome vector for the transmitted column.
void draw_codes(const ColumnMixture& mix, RandomStream& rng, std::uint8_t* codes) {
  const double s = mix.sigma / std::numbers::sqrt2;
  QuantizerSpec spec;
  spec.kind = mix.kind;
  spec.tau1 = mix.tau[0];
  spec.tau2 = mix.tau[1];
  for (int c = 0; c < 2 * mix.M; ++c) {
    const double v = mix.sig_true(c);
    const double n1 = s * rng.normal();
    const double n2 = mix.kind == AdcKind::ternary ? n1 : s * rng.normal();
    codes[c] = outcome_code(quantize_po(v, n1, n2, spec));
  }
}

Matrix column_info_mc(const ColumnMixture& mix, long draws, std::uint64_t seed, std::uint64_t column, int threads) {
  const int dim = mix.dim();
  constexpr long chunk = 4096;
  const long chunks = (draws + chunk - 1) / chunk;
  std::vector<Matrix> partial(chunks);
  parallel_for(static_cast<std::size_t>(chunks), threads, [&](std::size_t ci) {
    RandomStream rng = RandomStream::substream(seed, column, ci);
    std::vector<std::uint8_t> codes(2 * mix.M);
    Vector s(dim), logp(mix.L);
    Matrix scores(dim, mix.L);
    Matrix acc = Matrix::Zero(dim, dim);
    const long first = static_cast<long>(ci) * chunk;
    const long last = std::min(draws, first + chunk);
    for (long d = first; d < last; ++d) {
      draw_codes(mix, rng, codes.data());
      mix.score(codes.data(), s, logp, scores);
      acc.selfadjointView<Eigen::Lower>().rankUpdate(s);
    }
    partial[ci] = acc.selfadjointView<Eigen::Lower>();
  });
  Matrix total = Matrix::Zero(dim, dim);
  for (const auto& p : partial) total += p;
  return total / static_cast<double>(draws);
}

Matrix column_info_exact(const ColumnMixture& mix) {
  const int comps = 2 * mix.M;
  const std::vector<std::uint8_t> alphabet = admissible_codes(mix.kind);
  const int n_out = static_cast<int>(alphabet.size());
  const double k = std::numbers::sqrt2 / mix.sigma;
  // Log-probability of each component outcome under the transmitted column.
  Matrix log_true(comps, n_out);
  for (int c = 0; c < comps; ++c) {
    const double a1 = k * (mix.sig_true(c) - mix.tau[0]);
    const double a2 = k * (mix.sig_true(c) - mix.tau[1]);
    for (int o = 0; o < n_out; ++o) log_true(c, o) = row_log_prob(mix.kind, alphabet[o], a1, a2);
  }
  const int dim = mix.dim();
  std::vector<int> idx(comps, 0);
  std::vector<std::uint8_t> codes(comps, alphabet[0]);
  Vector s(dim), logp(mix.L);
  Matrix scores(dim, mix.L);
  Matrix acc = Matrix::Zero(dim, dim);
  for (;;) {
    double lp = 0.0;
    for (int c = 0; c < comps; ++c) lp += log_true(c, idx[c]);
    const double p = std::exp(lp);
    if (p > 0.0) {
      mix.score(codes.data(), s, logp, scores);
      acc.selfadjointView<Eigen::Lower>().rankUpdate(s, p);
    }
    int c = 0;
    while (c < comps && ++idx[c] == n_out) {
      idx[c] = 0;
      codes[c] = alphabet[0];
      ++c;
    }
    if (c == comps) break;
    codes[c] = alphabet[idx[c]];
  }
  return acc.selfadjointView<Eigen::Lower>();
}

// Fraction of simulated outcomes whose posterior concentrates on one candidate.
double concentrated_fraction(const ColumnMixture& mix, long draws, std::uint64_t seed, std::uint64_t column) {
  RandomStream rng = RandomStream::substream(seed ^ 0x5bd1e995ULL, column);
  std::vector<std::uint8_t> codes(2 * mix.M);
  Vector s(mix.dim()), logp(mix.L);
  Matrix scores(mix.dim(), mix.L);
  long hits = 0;
  for (long d = 0; d < draws; ++d) {
    draw_codes(mix, rng, codes.data());
    if (mix.score(codes.data(), s, logp, scores) > 1.0 - 1e-6) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(draws);
}

}  // namespace

InfoMatrix fim_npa(const CMatrix& H, double sigma, const CMatrix& Xd, const CMatrix& candidates,
                   const QuantizerSpec& spec, const NpaOptions& opts) {
  if (!(sigma > 0)) throw DomainError("fim_npa: sigma must be positive");
  if (Xd.rows() != H.cols() || candidates.rows() != H.cols()) throw ShapeError("fim_npa: K mismatch");
  if (candidates.cols() < 1) throw ShapeError("fim_npa: empty candidate set");
  const Eigen::Index dim = 2 * H.rows() * H.cols() + 1;
  InfoMatrix out{Matrix::Zero(dim, dim), InfoKind::npa};
  if (Xd.cols() == 0) return out;

  if (opts.mode == NpaMode::high_snr_equivalence) {
    constexpr long check_draws = 2000;
    double worst = 1.0;
    for (Eigen::Index t = 0; t < Xd.cols(); ++t) {
      const ColumnMixture mix(H, sigma, Xd.col(t), candidates, spec);
      worst = std::min(worst, concentrated_fraction(mix, check_draws, opts.seed, static_cast<std::uint64_t>(t)));
    }
    if (worst < 0.99) {
      const auto pr = prob_distinct_regions(static_cast<int>(H.rows()), 1, static_cast<int>(candidates.cols()));
      std::ostringstream msg;
      msg << "fim_npa: high-SNR equivalence does not hold (posterior concentrated on only " << worst
          << " of outcomes; distinct-region probability lower bound Pr_d >= " << pr.lower_bound << ")";
      throw UnsupportedConfigError(msg.str());
    }
    out.F = fim_pa_chi(H, sigma, Xd, spec).F;
    return out;
  }

  if (opts.mode == NpaMode::exact_enumeration && 2 * H.rows() > 16)
    throw UnsupportedConfigError("fim_npa: exact enumeration is capped at 2M <= 16; use the Monte Carlo mode");

  for (Eigen::Index t = 0; t < Xd.cols(); ++t) {
    const ColumnMixture mix(H, sigma, Xd.col(t), candidates, spec);
    if (opts.mode == NpaMode::exact_enumeration)
      out.F += column_info_exact(mix);
    else
      out.F += column_info_mc(mix, opts.draws_per_column, opts.seed, static_cast<std::uint64_t>(t), opts.threads);
  }
  return out;
}

}  // namespace tadc
