#include <algorithm>
#include <cmath>
#include <limits>

#include "tadc/errors.hpp"
#include "tadc/estimators.hpp"

namespace tadc {

namespace {

struct Groups {
  int size = 1;
  int count = 1;
  int of(int m) const { return m / size; }
  int first(int g) const { return g * size; }
  int last(int g, int M) const { return std::min(M, (g + 1) * size); }
};

// Shared state of one EM run. Parameters are kept reparameterized: varsigma per
// antenna (rows of `vs`, length 2K) and xi per group.
class EmRun {
 public:
  EmRun(const QuantizedObservation& obs_p, const QuantizedObservation& obs_d, const CMatrix& Xp,
        const Constellation& constellation, const QuantizerSpec& spec, const SolverOptions& opts, int groups)
      : obs_p_(obs_p), obs_d_(obs_d), spec_(spec), opts_(opts) {
    M_ = static_cast<int>(obs_p.antennas());
    K_ = static_cast<int>(Xp.rows());
    T_d_ = static_cast<int>(obs_d.length());
    if (T_d_ > 0 && obs_d.antennas() != M_) throw ShapeError("em: pilot and data blocks disagree on M");
    if (obs_p.length() != Xp.cols()) throw ShapeError("em: pilot block length does not match X_p");
    if (groups < 1 || groups > M_) throw DomainError("em: group count must lie in [1, M]");
    if (K_ * constellation.bits_per_symbol() > 16)
      throw UnsupportedConfigError("em: K log2|S| > 16, candidate enumeration refused");
    groups_.size = (M_ + groups - 1) / groups;
    groups_.count = (M_ + groups_.size - 1) / groups_.size;

    cand_ = candidate_matrix(constellation, K_);
    L_ = static_cast<int>(cand_.cols());
    xrow_[0].resize(L_, 2 * K_);
    xrow_[1].resize(L_, 2 * K_);
    for (int l = 0; l < L_; ++l) {
      const CVector x = cand_.col(l);
      xrow_[0].row(l) << x.real().transpose(), -x.imag().transpose();
      xrow_[1].row(l) << x.imag().transpose(), x.real().transpose();
    }
    Xbar_p_ = to_bivariate_real(Xp);
    pilot_bits_.reserve(M_);
    for (int m = 0; m < M_; ++m) pilot_bits_.push_back(antenna_bits(obs_p, m));
  }

  EstimateResult run() {
    initialize();
    EstimateResult out;
    double prev = 0.0;
    for (int iter = 0;; ++iter) {
      const double llf = e_step();
      out.llf_trace.push_back(llf);
      if (iter > 0 && std::abs(llf - prev) <= opts_.em_rel_tol * std::abs(prev)) {
        out.converged = true;
        break;
      }
      if (iter == opts_.max_em_iters) break;
      prev = llf;
      m_step();
      out.iterations = iter + 1;
    }
    out.H_hat.resize(M_, K_);
    for (int m = 0; m < M_; ++m) {
      const double xi = xi_(groups_.of(m));
      for (int k = 0; k < K_; ++k) out.H_hat(m, k) = Complex(vs_(m, k), vs_(m, K_ + k)) / xi;
    }
    out.group_sigma = xi_.cwiseInverse();
    out.sigma_hat = out.group_sigma.mean();
    if (T_d_ > 0) {
      const std::vector<int> idx = detect_symbols(posterior_);
      CMatrix Xd(K_, T_d_);
      for (int t = 0; t < T_d_; ++t) Xd.col(t) = cand_.col(idx[t]);
      out.Xd_hat = std::move(Xd);
    }
    return out;
  }

 private:
  void initialize() {
    vs_.resize(M_, 2 * K_);
    xi_.resize(groups_.count);
    for (int g = 0; g < groups_.count; ++g) {
      const int a = groups_.first(g), b = groups_.last(g, M_);
      std::vector<QuantizedBits> Z(pilot_bits_.begin() + a, pilot_bits_.begin() + b);
      const ParameterVector init{Vector::Zero(static_cast<Eigen::Index>(b - a) * 2 * K_), 1.0};
      const EstimateResult r = newton_raphson_ml(Z, Xbar_p_, spec_, opts_, init);
      for (int m = a; m < b; ++m) vs_.row(m) = to_bivariate_vector(r.H_hat.row(m - a).transpose()).transpose() / r.sigma_hat;
      xi_(g) = 1.0 / r.sigma_hat;
    }
  }

  // Log-likelihood of the observed data; leaves the pruned posterior in `posterior_`.
  double e_step() {
    const double r2 = std::sqrt(2.0);
    double pilot = 0.0;
    for (int m = 0; m < M_; ++m) {
      const double xi = xi_(groups_.of(m));
      const Vector s = Xbar_p_ * vs_.row(m).transpose();
      for (Eigen::Index i = 0; i < s.size(); ++i)
        pilot += row_log_prob(spec_.kind, pilot_bits_[m].code(i), r2 * (s(i) - spec_.tau1 * xi),
                              r2 * (s(i) - spec_.tau2 * xi));
    }
    posterior_.resize(L_, T_d_);
    if (T_d_ == 0) return pilot;

    // table(m, part, l, code): ln P(code | candidate l) for one component.
    const std::vector<std::uint8_t> codes = spec_.kind == AdcKind::ternary ? std::vector<std::uint8_t>{0, 1, 3}
                                                                           : std::vector<std::uint8_t>{0, 1, 2, 3};
    table_.assign(static_cast<std::size_t>(M_) * 2 * L_ * 4, -std::numeric_limits<double>::infinity());
    for (int m = 0; m < M_; ++m) {
      const double xi = xi_(groups_.of(m));
      for (int part = 0; part < 2; ++part) {
        const Vector s = xrow_[part] * vs_.row(m).transpose();
        for (int l = 0; l < L_; ++l) {
          const double a1 = r2 * (s(l) - spec_.tau1 * xi);
          const double a2 = r2 * (s(l) - spec_.tau2 * xi);
          for (std::uint8_t c : codes) table_[index(m, part, l, c)] = row_log_prob(spec_.kind, c, a1, a2);
        }
      }
    }
    double data = 0.0;
    Vector lp(L_);
    for (int t = 0; t < T_d_; ++t) {
      lp.setZero();
      for (int m = 0; m < M_; ++m) {
        const std::uint8_t cr = obs_d_.re(m, t), ci = obs_d_.im(m, t);
        for (int l = 0; l < L_; ++l) lp(l) += table_[index(m, 0, l, cr)] + table_[index(m, 1, l, ci)];
      }
      const double top = lp.maxCoeff();
      Vector w = (lp.array() - top).exp();
      const double total = w.sum();
      data += top + std::log(total) - std::log(static_cast<double>(L_));
      w /= total;
      for (int l = 0; l < L_; ++l)
        if (w(l) < opts_.posterior_prune_tol) w(l) = 0.0;
      w /= w.sum();
      posterior_.col(t) = w;
    }
    return pilot + data;
  }

  void m_step() {
    for (int g = 0; g < groups_.count; ++g) {
      const int a = groups_.first(g), b = groups_.last(g, M_);
      ReparamProblem prob;
      prob.kind = spec_.kind;
      prob.tau1 = spec_.tau1;
      prob.tau2 = spec_.tau2;
      prob.K = K_;
      prob.antennas.resize(b - a);
      Vector theta(static_cast<Eigen::Index>(b - a) * 2 * K_ + 1);
      for (int m = a; m < b; ++m) {
        AntennaRows& rows = prob.antennas[m - a];
        std::vector<std::uint8_t> pc(pilot_bits_[m].rows());
        for (Eigen::Index i = 0; i < pilot_bits_[m].rows(); ++i) pc[i] = pilot_bits_[m].code(i);
        rows.append(Xbar_p_, pc, 1.0);
        append_data_rows(m, rows);
        theta.segment(static_cast<Eigen::Index>(m - a) * 2 * K_, 2 * K_) = vs_.row(m).transpose();
      }
      theta(theta.size() - 1) = xi_(g);
      const NewtonOutcome r = maximize_reparam(prob, theta, opts_);
      for (int m = a; m < b; ++m)
        vs_.row(m) = r.theta.segment(static_cast<Eigen::Index>(m - a) * 2 * K_, 2 * K_).transpose();
      xi_(g) = r.theta(r.theta.size() - 1);
    }
  }

  // Data rows sharing (candidate, part, code) are merged by summing their weights.
  void append_data_rows(int m, AntennaRows& rows) const {
    if (T_d_ == 0) return;
    std::vector<double> acc(static_cast<std::size_t>(2) * L_ * 4, 0.0);
    for (int t = 0; t < T_d_; ++t) {
      const std::uint8_t cr = obs_d_.re(m, t), ci = obs_d_.im(m, t);
      for (int l = 0; l < L_; ++l) {
        const double w = posterior_(l, t);
        if (w == 0.0) continue;
        acc[(0 * L_ + l) * 4 + cr] += w;
        acc[(1 * L_ + l) * 4 + ci] += w;
      }
    }
    std::vector<Eigen::Index> which;
    std::vector<int> part_of;
    std::vector<std::uint8_t> code_of;
    std::vector<double> weight_of;
    for (int part = 0; part < 2; ++part)
      for (int l = 0; l < L_; ++l)
        for (std::uint8_t c = 0; c < 4; ++c) {
          const double w = acc[(part * L_ + l) * 4 + c];
          if (w > 0.0) {
            which.push_back(l);
            part_of.push_back(part);
            code_of.push_back(c);
            weight_of.push_back(w);
          }
        }
    const Eigen::Index old = rows.xbar.rows();
    const Eigen::Index add = static_cast<Eigen::Index>(which.size());
    rows.xbar.conservativeResize(old + add, 2 * K_);
    rows.weight.conservativeResize(old + add);
    for (Eigen::Index r = 0; r < add; ++r) {
      rows.xbar.row(old + r) = xrow_[part_of[r]].row(which[r]);
      rows.weight(old + r) = weight_of[r];
      rows.code.push_back(code_of[r]);
    }
  }

  std::size_t index(int m, int part, int l, std::uint8_t c) const {
    return ((static_cast<std::size_t>(m) * 2 + part) * L_ + l) * 4 + c;
  }

  const QuantizedObservation& obs_p_;
  const QuantizedObservation& obs_d_;
  QuantizerSpec spec_;
  SolverOptions opts_;
  int M_ = 0, K_ = 0, L_ = 0, T_d_ = 0;
  Groups groups_;
  CMatrix cand_;
  Matrix xrow_[2];
  Matrix Xbar_p_;
  std::vector<QuantizedBits> pilot_bits_;
  Matrix vs_;
  Vector xi_;
  Matrix posterior_;
  std::vector<double> table_;
};

}  // namespace

EstimateResult gpem_deterministic(const QuantizedObservation& obs_p, const QuantizedObservation& obs_d,
                                  const CMatrix& Xp, const Constellation& constellation, const QuantizerSpec& spec,
                                  const SolverOptions& opts, int groups) {
  opts.validate();
  EmRun run(obs_p, obs_d, Xp, constellation, spec, opts, groups);
  return run.run();
}

EstimateResult em_deterministic(const QuantizedObservation& obs_p, const QuantizedObservation& obs_d,
                                const CMatrix& Xp, const Constellation& constellation, const QuantizerSpec& spec,
                                const SolverOptions& opts) {
  return gpem_deterministic(obs_p, obs_d, Xp, constellation, spec, opts, 1);
}

EstimateResult pem_deterministic(const QuantizedObservation& obs_p, const QuantizedObservation& obs_d,
                                 const CMatrix& Xp, const Constellation& constellation, const QuantizerSpec& spec,
                                 const SolverOptions& opts) {
  return gpem_deterministic(obs_p, obs_d, Xp, constellation, spec, opts, static_cast<int>(obs_p.antennas()));
}

std::vector<int> detect_symbols(const Matrix& posterior) {
  std::vector<int> idx(posterior.cols(), 0);
  for (Eigen::Index t = 0; t < posterior.cols(); ++t) {
    int best = 0;
    for (Eigen::Index l = 1; l < posterior.rows(); ++l)
      if (posterior(l, t) > posterior(best, t)) best = static_cast<int>(l);
    idx[t] = best;
  }
  return idx;
}

CMatrix hard_decision(const CMatrix& X, const Constellation& constellation) {
  CMatrix out(X.rows(), X.cols());
  for (Eigen::Index t = 0; t < X.cols(); ++t)
    for (Eigen::Index k = 0; k < X.rows(); ++k) out(k, t) = constellation.points()[constellation.nearest(X(k, t))];
  return out;
}

}  // namespace tadc
