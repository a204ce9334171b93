#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>

#include "tadc/errors.hpp"
#include "tadc/estimators.hpp"
#include "tadc/numerics.hpp"

namespace tadc {

void SolverOptions::validate() const {
  if (max_newton_iters < 1 || max_em_iters < 1 || max_halvings < 0) throw DomainError("SolverOptions: bad limits");
  if (!(grad_tol > 0) || !(em_rel_tol > 0) || !(posterior_prune_tol > 0) || !(damping > 0))
    throw DomainError("SolverOptions: tolerances must be positive");
}

void AntennaRows::append(const Matrix& rows, const std::vector<std::uint8_t>& codes, double w) {
  if (rows.rows() != static_cast<Eigen::Index>(codes.size())) throw ShapeError("AntennaRows: code count mismatch");
  if (xbar.size() == 0) xbar.resize(0, rows.cols());
  const Eigen::Index old = xbar.rows();
  xbar.conservativeResize(old + rows.rows(), rows.cols());
  xbar.bottomRows(rows.rows()) = rows;
  code.insert(code.end(), codes.begin(), codes.end());
  weight.conservativeResize(old + rows.rows());
  weight.tail(rows.rows()).setConstant(w);
}

namespace {

struct Arrow {
  std::vector<Matrix> block;   // d2/dvarsigma_m^2
  std::vector<Vector> couple;  // d2/dvarsigma_m dxi
  double corner = 0.0;         // d2/dxi^2
};

// Value, gradient and (optionally) the arrow-structured Hessian.
double evaluate(const ReparamProblem& p, const Vector& theta, Vector* grad, Arrow* arrow) {
  const int n = 2 * p.K;
  const Eigen::Index A = static_cast<Eigen::Index>(p.antennas.size());
  const double xi = theta(A * n);
  const double r2 = std::numbers::sqrt2;
  const double t1 = p.tau1, t2 = p.tau2;
  double value = 0.0;
  if (grad) grad->setZero(theta.size());
  if (arrow) {
    arrow->block.assign(A, Matrix::Zero(n, n));
    arrow->couple.assign(A, Vector::Zero(n));
    arrow->corner = 0.0;
  }
  for (Eigen::Index m = 0; m < A; ++m) {
    const AntennaRows& rows = p.antennas[m];
    const Eigen::Index R = rows.xbar.rows();
    if (R == 0) continue;
    const Vector s = rows.xbar * theta.segment(m * n, n);
    Vector cg(R), ch(R), cc(R);
    for (Eigen::Index r = 0; r < R; ++r) {
      const double w = rows.weight(r);
      const double a1 = r2 * (s(r) - t1 * xi);
      const double a2 = r2 * (s(r) - t2 * xi);
      if (!grad && !arrow) {
        value += w * row_log_prob(p.kind, rows.code[r], a1, a2);
        continue;
      }
      const RowDerivatives d = row_log_prob_derivatives(p.kind, rows.code[r], a1, a2);
      value += w * d.value;
      cg(r) = w * r2 * (d.grad(0) + d.grad(1));
      if (grad) (*grad)(A * n) -= w * r2 * (t1 * d.grad(0) + t2 * d.grad(1));
      if (arrow) {
        const double h11 = d.hess(0, 0), h12 = d.hess(0, 1), h22 = d.hess(1, 1);
        ch(r) = w * 2.0 * (h11 + 2.0 * h12 + h22);
        cc(r) = -w * 2.0 * (t1 * (h11 + h12) + t2 * (h12 + h22));
        arrow->corner += w * 2.0 * (t1 * t1 * h11 + 2.0 * t1 * t2 * h12 + t2 * t2 * h22);
      }
    }
    if (grad) grad->segment(m * n, n) = rows.xbar.transpose() * cg;
    if (arrow) {
      arrow->block[m] = rows.xbar.transpose() * ch.asDiagonal() * rows.xbar;
      arrow->couple[m] = rows.xbar.transpose() * cc;
    }
  }
  return value;
}

// Solves (-H) d = g for the arrow Hessian via the Schur complement on xi.
Vector newton_direction(const Arrow& H, const Vector& g, int n) {
  const Eigen::Index A = static_cast<Eigen::Index>(H.block.size());
  std::vector<Eigen::LDLT<Matrix>> fac(A);
  std::vector<Vector> u(A), v(A);
  const double gx = g(A * n);
  double schur = -H.corner;
  double rhs = gx;
  for (Eigen::Index m = 0; m < A; ++m) {
    Matrix N = -H.block[m];
    const double scale = std::max(N.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    fac[m].compute(N);
    if (fac[m].info() != Eigen::Success || fac[m].vectorD().minCoeff() <= 1e-14 * scale) {
      N.diagonal().array() += 1e-10 * scale + 1e-12;
      fac[m].compute(N);
    }
    u[m] = fac[m].solve(Vector(g.segment(m * n, n)));
    const Vector c = -H.couple[m];
    v[m] = fac[m].solve(c);
    schur -= c.dot(v[m]);
    rhs -= c.dot(u[m]);
  }
  const double floor = 1e-14 * std::max(std::abs(H.corner), 1e-300);
  if (schur < floor) schur = floor;
  Vector d(g.size());
  const double dx = rhs / schur;
  d(A * n) = dx;
  for (Eigen::Index m = 0; m < A; ++m) d.segment(m * n, n) = u[m] - v[m] * dx;
  return d;
}

}  // namespace

double reparam_value(const ReparamProblem& p, const Vector& theta) { return evaluate(p, theta, nullptr, nullptr); }

double reparam_derivatives(const ReparamProblem& p, const Vector& theta, Vector& grad, Matrix& hess) {
  Arrow arrow;
  const double v = evaluate(p, theta, &grad, &arrow);
  const int n = 2 * p.K;
  const Eigen::Index A = static_cast<Eigen::Index>(p.antennas.size());
  hess = Matrix::Zero(theta.size(), theta.size());
  for (Eigen::Index m = 0; m < A; ++m) {
    hess.block(m * n, m * n, n, n) = arrow.block[m];
    hess.block(m * n, A * n, n, 1) = arrow.couple[m];
    hess.block(A * n, m * n, 1, n) = arrow.couple[m].transpose();
  }
  hess(A * n, A * n) = arrow.corner;
  return v;
}

NewtonOutcome maximize_reparam(const ReparamProblem& p, Vector theta, const SolverOptions& opts) {
  if (theta.size() != p.dim()) throw ShapeError("maximize_reparam: theta has the wrong length");
  const int n = 2 * p.K;
  const Eigen::Index xi_at = p.dim() - 1;
  if (!(theta(xi_at) > 0)) throw DomainError("maximize_reparam: xi must start positive");
  NewtonOutcome out;
  Vector grad;
  Arrow H;
  double value = evaluate(p, theta, &grad, &H);
  for (int it = 0; it < opts.max_newton_iters; ++it) {
    out.grad_norm = grad.norm();
    if (out.grad_norm <= opts.grad_tol) {
      out.converged = true;
      break;
    }
    const Vector d = newton_direction(H, grad, n);
    // Predicted gain below the objective's rounding level: the gradient is as
    // small as this problem size can resolve.
    const double decrement = grad.dot(d);
    const double rounding = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(value));
    if (decrement <= rounding) {
      // One last full step polishes the gradient; the objective cannot tell it apart.
      const Vector last = theta + d;
      if (last(xi_at) > 0 && last.allFinite()) {
        Vector g2;
        Arrow H2;
        const double v2 = evaluate(p, last, &g2, &H2);
        if (v2 >= value - rounding && g2.norm() < out.grad_norm) {
          theta = last;
          value = v2;
          grad = g2;
          out.grad_norm = g2.norm();
          ++out.iterations;
        }
      }
      out.converged = true;
      break;
    }
    double step = opts.damping;
    bool accepted = false;
    Vector trial;
    double trial_value = value;
    for (int h = 0; h <= opts.max_halvings; ++h, step *= 0.5) {
      trial = theta + step * d;
      if (!(trial(xi_at) > 0) || !trial.allFinite()) continue;
      trial_value = reparam_value(p, trial);
      if (trial_value >= value) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    theta = trial;
    ++out.iterations;
    if (!(theta.norm() < 1e8)) throw IdentifiabilityError("newton: iterates diverge; no interior maximizer");
    value = evaluate(p, theta, &grad, &H);
    out.grad_norm = grad.norm();
  }
  out.theta = theta;
  out.value = value;
  if (!out.converged && out.grad_norm <= opts.grad_tol) out.converged = true;
  return out;
}

namespace {

std::vector<std::uint8_t> codes_of(const QuantizedBits& Z) {
  std::vector<std::uint8_t> c(Z.rows());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) c[i] = Z.code(i);
  return c;
}

void require_not_saturated(const std::vector<QuantizedBits>& Zp, const QuantizerSpec& spec) {
  bool all_low = true, all_high = true, all_mid = true;
  for (const auto& Z : Zp)
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
      const std::uint8_t c = Z.code(i);
      all_low = all_low && c == 0;
      all_high = all_high && c == 3;
      all_mid = all_mid && c == 1;
    }
  if (all_low || all_high)
    throw IdentifiabilityError("newton_raphson_ml: every outcome saturates; the noise scale is not identifiable");
  // g = 0 with sigma -> 0 drives the likelihood of an all-middle block to one.
  if (all_mid && spec.kind == AdcKind::ternary && spec.tau1 < 0 && spec.tau2 > 0)
    throw IdentifiabilityError("newton_raphson_ml: every outcome is in the middle region; no interior maximizer");
}

}  // namespace

EstimateResult newton_raphson_ml(const std::vector<QuantizedBits>& Zp, const Matrix& Xbar, const QuantizerSpec& spec,
                                 const SolverOptions& opts, const ParameterVector& init) {
  opts.validate();
  init.validate();
  const int n = static_cast<int>(Xbar.cols());
  const int M = static_cast<int>(Zp.size());
  if (M < 1) throw ShapeError("newton_raphson_ml: no antennas");
  if (init.gbar.size() != static_cast<Eigen::Index>(M) * n) throw ShapeError("newton_raphson_ml: init length");
  if (Xbar.rows() < n) throw DomainError("newton_raphson_ml: need T_p >= K");
  for (const auto& Z : Zp) {
    if (Z.rows() != Xbar.rows()) throw ShapeError("newton_raphson_ml: Zbar rows do not match Xbar");
    if (spec.kind == AdcKind::ternary) Z.validate();
  }
  require_not_saturated(Zp, spec);

  ReparamProblem prob;
  prob.kind = spec.kind;
  prob.tau1 = spec.tau1;
  prob.tau2 = spec.tau2;
  prob.K = n / 2;
  prob.antennas.resize(M);
  for (int m = 0; m < M; ++m) prob.antennas[m].append(Xbar, codes_of(Zp[m]), 1.0);

  Vector theta(prob.dim());
  theta.head(M * n) = init.varsigma();
  theta(M * n) = init.xi();
  const NewtonOutcome r = maximize_reparam(prob, theta, opts);

  const double xi = r.theta(M * n);
  if (!(xi > 0)) throw IdentifiabilityError("newton_raphson_ml: xi is not positive at the solution");
  EstimateResult out;
  out.sigma_hat = 1.0 / xi;
  out.group_sigma = Vector::Constant(1, out.sigma_hat);
  out.H_hat = unstack_channel(r.theta.head(M * n) / xi, M, n / 2);
  out.llf_trace = {r.value};
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.grad_norm = r.grad_norm;
  return out;
}

EstimateResult newton_raphson_ml(const QuantizedBits& Zp, const Matrix& Xbar, const QuantizerSpec& spec,
                                 const SolverOptions& opts, const ParameterVector& init) {
  return newton_raphson_ml(std::vector<QuantizedBits>{Zp}, Xbar, spec, opts, init);
}

Eigen::Vector2d siso_ml_closed_form(const QuantizedBits& Z, double tau1, double tau2, double symbol_power, int T_p) {
  if (Z.rows() != 2 * T_p) throw ShapeError("siso_ml_closed_form: Zbar must have 2 T_p rows");
  if (!(tau1 < tau2)) throw DegenerateError("siso_ml_closed_form: thresholds coincide");
  const double lo = 1.0 / (2.0 * T_p);
  const double hi = 1.0 - lo;
  Eigen::Vector2d s;
  for (int j = 0; j < 2; ++j) {
    double theta[2];
    for (int col = 0; col < 2; ++col) {
      double f = Z.Z.col(col).segment(j * T_p, T_p).cast<double>().mean();
      f = std::clamp(f, lo, hi);
      theta[col] = inv_std_normal_cdf(f);
    }
    if (!(theta[0] != theta[1])) throw DegenerateError("siso_ml_closed_form: theta estimates coincide");
    s(j) = (theta[0] * tau2 - theta[1] * tau1) / (theta[0] - theta[1]);
  }
  const double k = 1.0 / (2.0 * std::sqrt(symbol_power));
  return {k * (s(0) + s(1)), k * (-s(0) + s(1))};
}

CMatrix zf_init(const CMatrix& Zp_labeled, const CMatrix& Xp) {
  if (Zp_labeled.cols() != Xp.cols()) throw ShapeError("zf_init: Z and X lengths differ");
  if (Xp.cols() < Xp.rows()) throw SingularPilotError("zf_init: T_p < K, the pilot Gram matrix is singular");
  const CMatrix G = Xp * Xp.adjoint();
  Eigen::FullPivLU<CMatrix> lu(G);
  lu.setThreshold(1e-10);
  if (lu.rank() < G.rows()) throw SingularPilotError("zf_init: pilot Gram matrix is rank deficient");
  // H G = Z X^H, solved as G^H H^H = (Z X^H)^H.
  const CMatrix rhs = Zp_labeled * Xp.adjoint();
  return lu.solve(rhs.adjoint()).adjoint();
}

}  // namespace tadc
