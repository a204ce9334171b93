#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "tadc/errors.hpp"
#include "tadc/estimators.hpp"
#include "tadc/numerics.hpp"

namespace tadc {

namespace {

constexpr double kLambdaFloor = 1e-10;

QuantizedObservation concat(const QuantizedObservation& a, const QuantizedObservation& b) {
  QuantizedObservation out;
  out.kind = a.kind;
  out.re.resize(a.antennas(), a.length() + b.length());
  out.im.resize(a.antennas(), a.length() + b.length());
  out.re.leftCols(a.length()) = a.re;
  out.im.leftCols(a.length()) = a.im;
  if (b.length() > 0) {
    out.re.rightCols(b.length()) = b.re;
    out.im.rightCols(b.length()) = b.im;
  }
  return out;
}

// Posterior mean of one real pre-quantization component.
double component_mean(double center, double stdev, std::uint8_t code, const QuantizerSpec& spec) {
  const auto [lo, hi] = region_limits(code, spec);
  if (auto m = try_truncated_gaussian_mean(center, stdev, lo, hi)) return *m;
  // The region's mass vanished: the mean sits at the endpoint nearest the center.
  return std::clamp(center, lo, hi);
}

}  // namespace

ViemSolver::ViemSolver(const QuantizedObservation& obs_p, const QuantizedObservation& obs_d, const CMatrix& Xp,
                       const Constellation& constellation, const QuantizerSpec& spec, const SolverOptions& opts,
                       const ViemOptions& vopts)
    : Xp_(Xp), constellation_(constellation), spec_(spec), opts_(opts), use_data_(vopts.use_data) {
  opts_.validate();
  spec_.validate();
  if (!(vopts.sigma_init > 0)) throw DomainError("viem: initial sigma must be positive");
  if (obs_p.length() != Xp.cols()) throw ShapeError("viem: pilot block length does not match X_p");
  T_p_ = static_cast<int>(Xp.cols());
  T_d_ = use_data_ ? static_cast<int>(obs_d.length()) : 0;
  if (T_d_ > 0 && obs_d.antennas() != obs_p.antennas()) throw ShapeError("viem: blocks disagree on M");
  obs_ = T_d_ > 0 ? concat(obs_p, obs_d) : obs_p;

  const Eigen::Index M = obs_p.antennas();
  const Eigen::Index K = Xp.rows();
  mean_ = zf_init(labeled_output(obs_p, spec_), Xp);
  cov_.assign(M, Eigen::MatrixXcd::Zero(K, K));
  lambda_ = Matrix::Ones(M, K);
  sigma_ = vopts.sigma_init;
  Xd_.resize(K, T_d_);
  if (T_d_ > 0) {
    const CMatrix Zd = labeled_output(obs_d, spec_);
    const CMatrix G = mean_.adjoint() * mean_;
    Xd_ = hard_decision(G.ldlt().solve(mean_.adjoint() * Zd), constellation_);
  }
}

CMatrix ViemSolver::full_symbols() const {
  CMatrix X(Xp_.rows(), T_p_ + T_d_);
  X.leftCols(T_p_) = Xp_;
  if (T_d_ > 0) X.rightCols(T_d_) = Xd_;
  return X;
}

double ViemSolver::step() {
  const Eigen::Index M = mean_.rows();
  const Eigen::Index K = mean_.cols();
  const CMatrix X = full_symbols();
  const Eigen::Index T = X.cols();

  // (i) pre-quantization means; each real component has stdev sigma/sqrt(2).
  const CMatrix S = mean_ * X;
  const double sd = sigma_ / std::numbers::sqrt2;
  CMatrix Ybar(M, T);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index m = 0; m < M; ++m)
      Ybar(m, t) = Complex(component_mean(S(m, t).real(), sd, obs_.re(m, t), spec_),
                           component_mean(S(m, t).imag(), sd, obs_.im(m, t), spec_));

  // (ii)-(iii) channel posterior per antenna and hyperparameters.
  const double s2 = sigma_ * sigma_;
  const Eigen::MatrixXcd gram = (X * X.adjoint()).conjugate() / s2;
  const CMatrix rhs = X.conjugate() * Ybar.transpose() / s2;  // column m: conj(X) y_m^T / sigma^2
  const CMatrix previous = mean_;
  for (Eigen::Index m = 0; m < M; ++m) {
    Eigen::MatrixXcd P = gram;
    P.diagonal().array() += (1.0 / lambda_.row(m).array()).cast<Complex>().transpose();
    Eigen::LLT<Eigen::MatrixXcd> llt(P);
    cov_[m] = llt.solve(Eigen::MatrixXcd::Identity(K, K));
    mean_.row(m) = (cov_[m] * rhs.col(m)).transpose();
    for (Eigen::Index k = 0; k < K; ++k)
      lambda_(m, k) = std::max(cov_[m](k, k).real() + std::norm(mean_(m, k)), kLambdaFloor);
  }

  // (iv) data symbols: unconstrained minimizer, then hard decision.
  if (T_d_ > 0) {
    Eigen::MatrixXcd sum_cov = Eigen::MatrixXcd::Zero(K, K);
    for (const auto& C : cov_) sum_cov += C;
    const Eigen::MatrixXcd G = mean_.adjoint() * mean_ + sum_cov.conjugate();
    const CMatrix soft = G.ldlt().solve(mean_.adjoint() * Ybar.rightCols(T_d_));
    Xd_ = hard_decision(soft, constellation_);
  }

  // (v) sigma: Newton on the concave objective in xi = 1/sigma.
  const double xi_lo = 1e-3 / sigma_, xi_hi = 1e3 / sigma_;
  double xi = 1.0 / sigma_;
  double g = 0.0, h = 0.0;
  double value = sigma_objective(xi, &g, &h);
  for (int it = 0; it < opts_.max_newton_iters && std::abs(g) > opts_.grad_tol; ++it) {
    const double d = h < 0 ? -g / h : (g > 0 ? xi : -0.5 * xi);
    double step = opts_.damping;
    bool moved = false;
    for (int k = 0; k <= opts_.max_halvings; ++k, step *= 0.5) {
      const double trial = std::clamp(xi + step * d, xi_lo, xi_hi);
      const double v = sigma_objective(trial, nullptr, nullptr);
      if (v >= value) {
        moved = trial != xi;
        xi = trial;
        value = sigma_objective(xi, &g, &h);
        break;
      }
    }
    if (!moved) break;
  }
  sigma_ = 1.0 / xi;
  trace_.push_back(value);
  ++iterations_;
  const double norm = mean_.norm();
  return norm > 0 ? (mean_ - previous).norm() / norm : 0.0;
}

double ViemSolver::sigma_objective(double xi, double* grad, double* hess) const {
  const CMatrix S = mean_ * full_symbols();
  const double r2 = std::numbers::sqrt2;
  double v = 0.0, g = 0.0, h = 0.0;
  for (Eigen::Index t = 0; t < S.cols(); ++t)
    for (Eigen::Index m = 0; m < S.rows(); ++m)
      for (int part = 0; part < 2; ++part) {
        const double s = part == 0 ? S(m, t).real() : S(m, t).imag();
        const std::uint8_t code = part == 0 ? obs_.re(m, t) : obs_.im(m, t);
        const Eigen::Vector2d b(r2 * (s - spec_.tau1), r2 * (s - spec_.tau2));
        if (!grad) {
          v += row_log_prob(spec_.kind, code, b(0) * xi, b(1) * xi);
          continue;
        }
        const RowDerivatives d = row_log_prob_derivatives(spec_.kind, code, b(0) * xi, b(1) * xi);
        v += d.value;
        g += d.grad.dot(b);
        h += b.dot(d.hess * b);
      }
  if (grad) *grad = g;
  if (hess) *hess = h;
  return v;
}

EstimateResult ViemSolver::run() {
  EstimateResult out;
  for (int it = 0; it < opts_.max_em_iters; ++it) {
    const double change = step();
    if (it > 0 && change <= opts_.em_rel_tol) {
      out.converged = true;
      break;
    }
  }
  out.H_hat = mean_;
  out.sigma_hat = sigma_;
  out.group_sigma = Vector::Constant(1, sigma_);
  if (T_d_ > 0) out.Xd_hat = Xd_;
  out.llf_trace = trace_;
  out.iterations = iterations_;
  return out;
}

EstimateResult viem_random(const QuantizedObservation& obs_p, const QuantizedObservation& obs_d, const CMatrix& Xp,
                           const Constellation& constellation, const QuantizerSpec& spec, const SolverOptions& opts,
                           const ViemOptions& vopts) {
  ViemSolver solver(obs_p, obs_d, Xp, constellation, spec, opts, vopts);
  return solver.run();
}

}  // namespace tadc
