#include "sflab/sdp.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sflab::sdp {

std::string to_string(Status status) {
  switch (status) {
    case Status::Optimal: return "optimal";
    case Status::Unbounded: return "unbounded";
    case Status::Infeasible: return "infeasible";
    case Status::NumericalTrouble: return "numerical_trouble";
  }
  return "?";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Coefficient of the symmetric form w (e_r e_c^T + e_c e_r^T).
struct Term {
  int row;
  int col;
  double w;
};

// Per-block data with coefficients grouped by variable.
struct DenseBlock {
  int n = 0;
  MatrixXd C;
  std::vector<int> vars;                 // variables present in the block
  std::vector<std::vector<Term>> terms;  // parallel to vars
};

double inner(const MatrixXd& a, const MatrixXd& b) {
  return a.cwiseProduct(b).sum();
}

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

class Solver {
 public:
  Solver(const Problem& p, const Options& o) : opt_(o) {
    m_ = p.num_vars;
    if (m_ <= 0) throw std::invalid_argument("sdp: no variables");
    if (p.objective.size() != m_) {
      throw std::invalid_argument("sdp: objective size mismatch");
    }
    b_ = p.objective;
    for (const auto& blk : p.blocks) {
      DenseBlock d;
      d.n = blk.size;
      d.C = MatrixXd::Zero(d.n, d.n);
      std::vector<int> slot(m_, -1);
      for (const auto& e : blk.entries) {
        if (e.row < 0 || e.col < e.row || e.col >= d.n) {
          throw std::invalid_argument("sdp: bad block entry");
        }
        if (e.var < 0) {
          d.C(e.row, e.col) += e.value;
          if (e.row != e.col) d.C(e.col, e.row) += e.value;
          continue;
        }
        if (e.var >= m_) throw std::invalid_argument("sdp: bad variable");
        if (slot[e.var] < 0) {
          slot[e.var] = static_cast<int>(d.vars.size());
          d.vars.push_back(e.var);
          d.terms.emplace_back();
        }
        const double w = e.row == e.col ? 0.5 * e.value : e.value;
        d.terms[slot[e.var]].push_back(Term{e.row, e.col, w});
      }
      blocks_.push_back(std::move(d));
    }
    nlp_ = static_cast<int>(p.rows.size());
    G_ = MatrixXd::Zero(nlp_, m_);
    h_ = VectorXd::Zero(nlp_);
    for (int i = 0; i < nlp_; ++i) {
      for (const auto& [k, v] : p.rows[i].coeffs) {
        if (k < 0 || k >= m_) throw std::invalid_argument("sdp: bad variable");
        G_(i, k) += v;
      }
      h_[i] = p.rows[i].rhs;
    }
    dim_ = nlp_;
    for (const auto& d : blocks_) dim_ += d.n;
  }

  Result run();

 private:
  // sum_k y_k A_jk.
  MatrixXd adjoint(const DenseBlock& d, const VectorXd& y) const {
    MatrixXd out = MatrixXd::Zero(d.n, d.n);
    for (std::size_t s = 0; s < d.vars.size(); ++s) {
      const double yk = y[d.vars[s]];
      if (yk == 0.0) continue;
      for (const auto& t : d.terms[s]) {
        out(t.row, t.col) += yk * t.w;
        out(t.col, t.row) += yk * t.w;
      }
    }
    return out;
  }

  // Adds (<A_jk, X>)_k into out.
  void apply(const DenseBlock& d, const MatrixXd& X, VectorXd& out) const {
    for (std::size_t s = 0; s < d.vars.size(); ++s) {
      double acc = 0.0;
      for (const auto& t : d.terms[s]) {
        acc += t.w * (X(t.row, t.col) + X(t.col, t.row));
      }
      out[d.vars[s]] += acc;
    }
  }

  // Adds the HKM Schur complement <A_k, X A_l S^{-1}> of one block into M.
  void add_schur(const DenseBlock& d, const MatrixXd& X, const MatrixXd& Si,
                 MatrixXd& M) const {
    const std::size_t nv = d.vars.size();
    for (std::size_t a = 0; a < nv; ++a) {
      for (std::size_t b = a; b < nv; ++b) {
        double acc = 0.0;
        for (const auto& e : d.terms[a]) {
          const int p = e.row, q = e.col;
          for (const auto& f : d.terms[b]) {
            const int r = f.row, c = f.col;
            acc += e.w * f.w *
                   (X(p, r) * Si(c, q) + X(p, c) * Si(r, q) +
                    X(q, r) * Si(c, p) + X(q, c) * Si(r, p));
          }
        }
        M(d.vars[a], d.vars[b]) += acc;
        if (a != b) M(d.vars[b], d.vars[a]) += acc;
      }
    }
  }

  // Largest alpha in (0, inf] keeping P + alpha dP positive semidefinite.
  static double max_step(const MatrixXd& P, const MatrixXd& dP) {
    Eigen::LLT<MatrixXd> llt(P);
    if (llt.info() != Eigen::Success) return 0.0;
    const MatrixXd Linv_dP =
        llt.matrixL().solve(dP);  // L^{-1} dP
    const MatrixXd W =
        llt.matrixL().solve(Linv_dP.transpose());  // L^{-1} dP^T L^{-T}
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(W),
                                               Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    return lmin < 0.0 ? -1.0 / lmin : kInf;
  }

  static double max_step_lp(const VectorXd& v, const VectorXd& dv) {
    double a = kInf;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    }
    return a;
  }

  Options opt_;
  int m_ = 0;
  int nlp_ = 0;
  int dim_ = 0;
  VectorXd b_;
  std::vector<DenseBlock> blocks_;
  MatrixXd G_;
  VectorXd h_;
};

Result Solver::run() {
  const int nb = static_cast<int>(blocks_.size());

  // Starting point scaled to the data, in the spirit of common SDP codes.
  double norm_c = 0.0;
  double max_a = 0.0;
  std::vector<double> a_norm(m_, 0.0);
  for (const auto& d : blocks_) {
    norm_c = std::max(norm_c, d.C.norm());
    for (std::size_t s = 0; s < d.vars.size(); ++s) {
      double sq = 0.0;
      for (const auto& t : d.terms[s]) {
        sq += (t.row == t.col ? 4.0 : 2.0) * t.w * t.w;
      }
      a_norm[d.vars[s]] += sq;
    }
  }
  for (int k = 0; k < m_; ++k) {
    a_norm[k] = std::sqrt(a_norm[k] + G_.col(k).squaredNorm());
    max_a = std::max(max_a, a_norm[k]);
  }
  norm_c = std::max(norm_c, h_.norm());
  double xi = 10.0, zeta = 10.0;
  for (int k = 0; k < m_; ++k) {
    xi = std::max(xi, (1.0 + std::abs(b_[k])) / (1.0 + a_norm[k]));
  }
  xi = std::max(xi, std::sqrt(static_cast<double>(dim_)));
  zeta = std::max({zeta, std::sqrt(static_cast<double>(dim_)), norm_c, max_a});

  std::vector<MatrixXd> X(nb), S(nb);
  for (int j = 0; j < nb; ++j) {
    X[j] = xi * MatrixXd::Identity(blocks_[j].n, blocks_[j].n);
    S[j] = zeta * MatrixXd::Identity(blocks_[j].n, blocks_[j].n);
  }
  VectorXd x = VectorXd::Constant(nlp_, xi);
  VectorXd s = VectorXd::Constant(nlp_, zeta);
  VectorXd y = VectorXd::Zero(m_);

  const double norm_b = b_.norm();
  double norm_data_c = h_.squaredNorm();
  for (const auto& d : blocks_) norm_data_c += d.C.squaredNorm();
  norm_data_c = std::sqrt(norm_data_c);

  Result res;
  res.y = y;
  int stall = 0;

  for (int iter = 0; iter <= opt_.max_iterations; ++iter) {
    // Residuals and objectives.
    VectorXd ax = VectorXd::Zero(m_);
    std::vector<MatrixXd> Rd(nb);
    double rd_sq = 0.0, cert_sq = 0.0;
    double pobj = h_.dot(x);
    for (int j = 0; j < nb; ++j) {
      apply(blocks_[j], X[j], ax);
      Rd[j] = blocks_[j].C - adjoint(blocks_[j], y) - S[j];
      rd_sq += Rd[j].squaredNorm();
      cert_sq += (blocks_[j].C - Rd[j]).squaredNorm();
      pobj += inner(blocks_[j].C, X[j]);
    }
    const VectorXd Rp = b_ - ax - G_.transpose() * x;
    VectorXd rlp = h_ - G_ * y - s;
    rd_sq += rlp.squaredNorm();
    cert_sq += (h_ - rlp).squaredNorm();
    const double dobj = b_.dot(y);

    double mu = x.dot(s);
    for (int j = 0; j < nb; ++j) mu += inner(X[j], S[j]);
    mu /= std::max(1, dim_);

    const double pinf = Rp.norm() / (1.0 + norm_b);
    const double dinf = std::sqrt(rd_sq) / (1.0 + norm_data_c);
    const double gap = pobj - dobj;
    const double relgap = std::abs(gap) / (1.0 + std::abs(pobj) + std::abs(dobj));

    res.y = y;
    res.value = dobj;
    res.dual_value = pobj;
    res.gap = gap;
    res.primal_residual = pinf;
    res.dual_residual = dinf;
    res.iterations = iter;

    if (opt_.verbose) {
      std::fprintf(stderr,
                   "it %3d  pobj %+.10e  dobj %+.10e  gap %.2e  pinf %.2e  "
                   "dinf %.2e  mu %.2e\n",
                   iter, pobj, dobj, gap, pinf, dinf, mu);
    }

    if (relgap <= opt_.tol && pinf <= opt_.tol && dinf <= opt_.tol) {
      res.status = Status::Optimal;
      res.message = "converged";
      return res;
    }
    // y-problem unbounded: y approaches a ray with b^T y > 0, -A*(y) PSD and
    // -G y >= 0; the slack S + (C - Rd) vanishes relative to b^T y.
    if (dobj > 0.0 && std::sqrt(cert_sq) / dobj < opt_.infeasibility_tol &&
        dinf < 1e-3 * (1.0 + dobj)) {
      res.status = Status::Unbounded;
      res.message = "b^T y diverges along a recession direction";
      return res;
    }
    // y-problem infeasible: (X, x) approaches a ray with A(X) + G^T x = 0 and
    // negative dual objective.
    if (pobj < 0.0 && (b_ - Rp).norm() / (-pobj) < opt_.infeasibility_tol) {
      res.status = Status::Infeasible;
      res.message = "dual objective diverges to -infinity";
      return res;
    }
    if (iter == opt_.max_iterations || stall >= 5) break;
    // Complementarity is at round-off level; further steps only add noise.
    if (mu < 1e-15 * (1.0 + std::abs(dobj))) {
      res.message = "complementarity at round-off level";
      break;
    }

    // Schur complement.
    std::vector<MatrixXd> Si(nb);
    MatrixXd M = MatrixXd::Zero(m_, m_);
    bool ok = true;
    for (int j = 0; j < nb; ++j) {
      Eigen::LLT<MatrixXd> llt(S[j]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      Si[j] = llt.solve(MatrixXd::Identity(blocks_[j].n, blocks_[j].n));
      Si[j] = symmetrize(Si[j]);
      add_schur(blocks_[j], X[j], Si[j], M);
    }
    if (!ok) {
      res.message = "slack matrix lost definiteness";
      break;
    }
    const VectorXd xs = x.cwiseQuotient(s);
    if (nlp_ > 0) {
      MatrixXd DG = xs.asDiagonal() * G_;
      M.noalias() += G_.transpose() * DG;
    }
    const double reg = 1e-14 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
    M.diagonal().array() += reg;
    Eigen::LDLT<MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) {
      res.message = "Schur complement factorization failed";
      break;
    }

    // Computes the search direction for target sigma*mu and corrector terms.
    struct Dir {
      VectorXd dy, dx, ds;
      std::vector<MatrixXd> dX, dS;
    };
    auto direction = [&](double target, const std::vector<MatrixXd>* K,
                         const VectorXd* klp) {
      Dir dir;
      VectorXd rhs = Rp;
      std::vector<MatrixXd> W(nb);
      for (int j = 0; j < nb; ++j) {
        W[j] = target * Si[j] - X[j] - X[j] * Rd[j] * Si[j];
        if (K) W[j] -= (*K)[j];
        VectorXd aw = VectorXd::Zero(m_);
        apply(blocks_[j], symmetrize(W[j]), aw);
        rhs -= aw;
      }
      VectorXd w = target * s.cwiseInverse() - x - x.cwiseProduct(rlp).cwiseQuotient(s);
      if (klp) w -= *klp;
      if (nlp_ > 0) rhs -= G_.transpose() * w;
      dir.dy = ldlt.solve(rhs);
      for (int r = 0; r < 2; ++r) dir.dy += ldlt.solve(rhs - M * dir.dy);
      dir.dX.resize(nb);
      dir.dS.resize(nb);
      for (int j = 0; j < nb; ++j) {
        dir.dS[j] = Rd[j] - adjoint(blocks_[j], dir.dy);
        dir.dX[j] = symmetrize(W[j] - X[j] * (dir.dS[j] - Rd[j]) * Si[j]);
      }
      dir.ds = rlp - G_ * dir.dy;
      dir.dx = w + xs.cwiseProduct(G_ * dir.dy);
      return dir;
    };
    auto steps = [&](const Dir& dir, double& ap, double& ad) {
      ap = max_step_lp(x, dir.dx);
      ad = max_step_lp(s, dir.ds);
      for (int j = 0; j < nb; ++j) {
        ap = std::min(ap, max_step(X[j], dir.dX[j]));
        ad = std::min(ad, max_step(S[j], dir.dS[j]));
      }
    };

    // Predictor.
    Dir aff = direction(0.0, nullptr, nullptr);
    double ap_aff, ad_aff;
    steps(aff, ap_aff, ad_aff);
    ap_aff = std::min(1.0, ap_aff);
    ad_aff = std::min(1.0, ad_aff);
    double mu_aff = (x + ap_aff * aff.dx).dot(s + ad_aff * aff.ds);
    for (int j = 0; j < nb; ++j) {
      mu_aff += inner(X[j] + ap_aff * aff.dX[j], S[j] + ad_aff * aff.dS[j]);
    }
    mu_aff /= std::max(1, dim_);
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector.
    std::vector<MatrixXd> K(nb);
    for (int j = 0; j < nb; ++j) K[j] = aff.dX[j] * aff.dS[j] * Si[j];
    const VectorXd klp = aff.dx.cwiseProduct(aff.ds).cwiseQuotient(s);
    Dir dir = direction(sigma * mu, &K, &klp);
    double ap, ad;
    steps(dir, ap, ad);
    const double gamma = 0.9 + 0.09 * std::min(ap_aff, ad_aff);
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (!(ap > 0.0) || !(ad > 0.0) || !std::isfinite(ap + ad)) {
      res.message = "zero step length";
      break;
    }
    stall = (ap < 1e-10 && ad < 1e-10) ? stall + 1 : 0;

    // Take the step, backtracking while round-off leaves a block that fails
    // a Cholesky test; near the optimum the step-length bound is computed
    // from nearly singular matrices and can overshoot by a few ulps.
    bool accepted = false;
    for (int tries = 0; tries < 30 && !accepted; ++tries, ap *= 0.5, ad *= 0.5) {
      std::vector<MatrixXd> Xn(nb), Sn(nb);
      accepted = true;
      for (int j = 0; j < nb && accepted; ++j) {
        Xn[j] = symmetrize(X[j] + ap * dir.dX[j]);
        Sn[j] = symmetrize(S[j] + ad * dir.dS[j]);
        accepted = Eigen::LLT<MatrixXd>(Xn[j]).info() == Eigen::Success &&
                   Eigen::LLT<MatrixXd>(Sn[j]).info() == Eigen::Success;
      }
      if (!accepted) continue;
      x += ap * dir.dx;
      s += ad * dir.ds;
      y += ad * dir.dy;
      X = std::move(Xn);
      S = std::move(Sn);
    }
    if (!accepted) {
      res.message = "no step keeps the iterates positive definite";
      break;
    }
  }

  if (res.gap <= opt_.relaxed_tol * std::max(1.0, std::abs(res.value)) &&
      res.gap >= -opt_.relaxed_tol * std::max(1.0, std::abs(res.value)) &&
      res.primal_residual <= opt_.relaxed_tol &&
      res.dual_residual <= opt_.relaxed_tol) {
    res.status = Status::Optimal;
    res.message = "accepted at relaxed tolerance (" + res.message + ")";
    return res;
  }
  res.status = Status::NumericalTrouble;
  std::ostringstream os;
  os << (res.message.empty() ? "iteration limit" : res.message)
     << "; gap " << res.gap << ", primal residual " << res.primal_residual
     << ", dual residual " << res.dual_residual;
  res.message = os.str();
  return res;
}

}  // namespace

Result solve(const Problem& problem, const Options& options) {
  Solver solver(problem, options);
  return solver.run();
}

}  // namespace sflab::sdp
