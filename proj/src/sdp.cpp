#include "iqccert/sdp.hpp"

#include "iqccert/schur_kernels.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <cstdio>

namespace iqccert::sdp {

void add_sym(SparseSym& m, int r, int c, double v) {
  if (v == 0.0) return;
  m.push_back({r, c, v});
  if (r != c) m.push_back({c, r, v});
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Feasible:
      return "feasible";
    case Verdict::Infeasible:
      return "infeasible";
    case Verdict::NumericalFailure:
      return "numerical_failure";
  }
  return "unknown";
}

void validate(const LmiProblem& p) {
  if (p.N <= 0 || p.n < 0) throw ValidationError("LMI: empty problem");
  if (p.H.rows() != p.n || p.H.cols() != p.N || p.G.rows() != p.n || p.G.cols() != p.N)
    throw ValidationError("LMI: H/G must be n x N");
  if (p.F0.rows() != p.N || p.F0.cols() != p.N) throw ValidationError("LMI: F0 must be N x N");
  if (!p.F0.allFinite() || !p.H.allFinite() || !p.G.allFinite()) throw ValidationError("LMI: non-finite data");
  if ((p.F0 - p.F0.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + p.F0.cwiseAbs().maxCoeff()))
    throw ValidationError("LMI: F0 not symmetric");
  for (const auto& term : p.scalar_terms)
    for (const auto& t : term)
      if (t.row < 0 || t.col < 0 || t.row >= p.N || t.col >= p.N || !std::isfinite(t.value))
        throw ValidationError("LMI: scalar term entry out of range");
}

Matrix evaluate(const LmiProblem& p, const Matrix& P, const Vector& s) {
  Matrix F = p.F0;
  if (p.n > 0) {
    const Matrix HP = p.H.transpose() * P * p.G;
    F += HP + HP.transpose();
  }
  for (size_t k = 0; k < p.scalar_terms.size(); ++k)
    for (const auto& t : p.scalar_terms[k]) F(t.row, t.col) += s(static_cast<Eigen::Index>(k)) * t.value;
  return linalg::symmetrize(F);
}

namespace {

// Block layout: [LMI (N)] [P >= 0 (n), optional] [LP (ns)]
struct Layout {
  int n, np, ns, m, t_index;
  bool psd_P;
};

struct Primal {
  Matrix X1;  // LMI
  Matrix X2;  // P block
  Vector x3;  // LP
};

double inner(const Primal& a, const Primal& b, bool psd) {
  double v = (a.X1.cwiseProduct(b.X1)).sum() + a.x3.dot(b.x3);
  if (psd) v += (a.X2.cwiseProduct(b.X2)).sum();
  return v;
}

struct Problem {
  const LmiProblem& p;
  Layout L;
  Matrix Hp, Gp;  // P block map: -E
  SparseSym t_entries;
  StructuredBlock lmi, pblk;

  explicit Problem(const LmiProblem& prob) : p(prob) {
    L.n = p.n;
    L.np = p.n * (p.n + 1) / 2;
    L.ns = static_cast<int>(p.scalar_terms.size());
    L.t_index = L.np + L.ns;
    L.m = L.np + L.ns + 1;
    L.psd_P = p.psd_P && p.n > 0;
    Hp = Matrix::Identity(p.n, p.n);
    Gp = -0.5 * Matrix::Identity(p.n, p.n);
    for (int i = 0; i < p.N; ++i) t_entries.push_back({i, i, -1.0});
    lmi.dim = p.N;
    if (p.n > 0) {
      lmi.H = &p.H;
      lmi.G = &p.G;
    }
    for (int k = 0; k < L.ns; ++k) lmi.sparse.push_back({L.np + k, &p.scalar_terms[static_cast<size_t>(k)]});
    lmi.sparse.push_back({L.t_index, &t_entries});
    pblk.dim = p.n;
    pblk.H = &Hp;
    pblk.G = &Gp;
  }

  Matrix p_of(const Vector& y) const {
    Matrix P(L.n, L.n);
    for (int k = 0; k < L.n; ++k)
      for (int l = k; l < L.n; ++l) P(k, l) = P(l, k) = y(p_index(L.n, k, l));
    return P;
  }

  // A^T y, split into blocks (sign convention: Z = C - A^T y)
  Primal adjoint(const Vector& y) const {
    Primal out;
    const Matrix P = p_of(y);
    out.X1 = Matrix::Zero(p.N, p.N);
    if (L.n > 0) {
      const Matrix HP = p.H.transpose() * P * p.G;
      out.X1 = HP + HP.transpose();
    }
    for (int k = 0; k < L.ns; ++k)
      for (const auto& t : p.scalar_terms[static_cast<size_t>(k)]) out.X1(t.row, t.col) += y(L.np + k) * t.value;
    out.X1.diagonal().array() -= y(L.t_index);
    if (L.psd_P) out.X2 = -P;
    out.x3 = -y.segment(L.np, L.ns);
    return out;
  }

  // A(X): tr(A_i X) per variable. X blocks assumed symmetric.
  Vector forward(const Primal& X) const {
    Vector out = Vector::Zero(L.m);
    Matrix T = Matrix::Zero(L.n, L.n);
    if (L.n > 0) {
      const Matrix GXH = p.G * X.X1 * p.H.transpose();
      T = GXH + GXH.transpose();
      if (L.psd_P) T -= X.X2;
    }
    for (int k = 0; k < L.n; ++k)
      for (int l = k; l < L.n; ++l) out(p_index(L.n, k, l)) = k == l ? T(k, k) : 2.0 * T(k, l);
    for (int k = 0; k < L.ns; ++k) {
      double acc = 0.0;
      for (const auto& t : p.scalar_terms[static_cast<size_t>(k)]) acc += t.value * X.X1(t.row, t.col);
      out(L.np + k) = acc - X.x3(k);
    }
    out(L.t_index) = -X.X1.trace();
    return out;
  }

  Matrix schur(const Primal& X, const Primal& Zi, bool parallel) const {
    Matrix M = Matrix::Zero(L.m, L.m);
    if (parallel) {
      schur_parallel(lmi, L.n, X.X1, Zi.X1, M);
      if (L.psd_P) schur_parallel(pblk, L.n, X.X2, Zi.X2, M);
    } else {
      schur_serial(lmi, L.n, X.X1, Zi.X1, M);
      if (L.psd_P) schur_serial(pblk, L.n, X.X2, Zi.X2, M);
    }
    for (int k = 0; k < L.ns; ++k) M(L.np + k, L.np + k) += X.x3(k) * Zi.x3(k);
    return M;
  }
};

bool chol_inverse(const Matrix& Z, Matrix& Zi) {
  if (Z.size() == 0) {
    Zi = Z;
    return true;
  }
  Eigen::LLT<Matrix> llt(Z);
  if (llt.info() != Eigen::Success) return false;
  Zi = llt.solve(Matrix::Identity(Z.rows(), Z.cols()));
  Zi = linalg::symmetrize(Zi);
  return Zi.allFinite();
}

// Largest alpha <= 1 keeping X + alpha dX positive definite.
double max_step(const Matrix& X, const Matrix& dX) {
  if (X.size() == 0) return 1.0;
  Eigen::LLT<Matrix> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  const Matrix Lm = llt.matrixL();
  Matrix W = Lm.triangularView<Eigen::Lower>().solve(dX);
  const Matrix Wt = W.transpose();
  W = Lm.triangularView<Eigen::Lower>().solve(Wt);
  const double lmin = linalg::min_sym_eigenvalue(linalg::symmetrize(W));
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

double max_step(const Vector& x, const Vector& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (dx(i) < 0.0) a = std::min(a, -x(i) / dx(i));
  return a;
}

struct Direction {
  Vector dy;
  Primal dX, dZ;
};

}  // namespace

Result solve(const LmiProblem& prob, const Options& opt) {
  validate(prob);
  const Problem pr(prob);
  const Layout& L = pr.L;
  Result res;

  Vector b = Vector::Zero(L.m);
  b(L.t_index) = -1.0;
  Primal C;
  C.X1 = -prob.F0;
  if (L.psd_P) C.X2 = Matrix::Zero(L.n, L.n);
  C.x3 = Vector::Zero(L.ns);

  // Starting point scaled to the data, in the spirit of common infeasible-start codes.
  double anorm = std::sqrt(static_cast<double>(prob.N));
  if (L.n > 0) anorm = std::max(anorm, 2.0 * prob.H.norm() * prob.G.norm());
  for (const auto& term : prob.scalar_terms) {
    double s2 = 0.0;
    for (const auto& t : term) s2 += t.value * t.value;
    anorm = std::max(anorm, std::sqrt(s2));
  }
  const double cnorm = prob.F0.norm();
  const double xi_d = std::max({10.0, std::sqrt(static_cast<double>(prob.N)), anorm, cnorm});
  const double xi_p = std::max({10.0, std::sqrt(static_cast<double>(prob.N)), 2.0 / (1.0 + anorm) * prob.N});

  Primal X, Z;
  X.X1 = xi_p * Matrix::Identity(prob.N, prob.N);
  Z.X1 = xi_d * Matrix::Identity(prob.N, prob.N);
  if (L.psd_P) {
    X.X2 = xi_p * Matrix::Identity(L.n, L.n);
    Z.X2 = xi_d * Matrix::Identity(L.n, L.n);
  }
  X.x3 = Vector::Constant(L.ns, xi_p);
  Z.x3 = Vector::Constant(L.ns, xi_d);
  Vector y = Vector::Zero(L.m);

  const double nu = prob.N + (L.psd_P ? L.n : 0) + L.ns;
  const double bnorm = 1.0;
  const double Cnorm = std::max(1.0, cnorm);

  auto try_feasible = [&](const Vector& yv) -> bool {
    Matrix P = pr.p_of(yv);
    Vector s = yv.segment(L.np, L.ns).cwiseMax(0.0);
    const Matrix F = evaluate(prob, P, s);
    const double me = linalg::max_sym_eigenvalue(F);
    const double mp = L.n > 0 ? linalg::min_sym_eigenvalue(P) : 0.0;
    if (me <= -opt.eps_feas && (!prob.psd_P || mp >= -opt.eps_psd)) {
      res.verdict = Verdict::Feasible;
      res.P = P;
      res.s = s;
      res.max_eig = me;
      res.min_eig_P = mp;
      return true;
    }
    return false;
  };

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    res.iterations = iter;
    const Primal Aty = pr.adjoint(y);
    Primal Rd;
    Rd.X1 = C.X1 - Z.X1 - Aty.X1;
    if (L.psd_P) Rd.X2 = C.X2 - Z.X2 - Aty.X2;
    Rd.x3 = C.x3 - Z.x3 - Aty.x3;
    const Vector Rp = b - pr.forward(X);
    const double gap = inner(X, Z, L.psd_P);
    const double mu = gap / nu;
    const double pobj = inner(C, X, L.psd_P);
    const double dobj = b.dot(y);
    const double rel_p = Rp.norm() / (1.0 + bnorm);
    const double rel_d = std::sqrt(inner(Rd, Rd, L.psd_P)) / (1.0 + Cnorm);
    const double rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    res.primal_residual = rel_p;
    res.dual_residual = rel_d;
    res.gap = rel_gap;
    res.t = y(L.t_index);

    if (!std::isfinite(gap) || !y.allFinite()) {
      res.verdict = Verdict::NumericalFailure;
      res.message = "non-finite iterate";
      return res;
    }
    // Early feasible exit: the current multipliers already certify F < -eps I.
    if (y(L.t_index) < -opt.eps_feas && try_feasible(y)) {
      res.message = "strictly feasible point found";
      return res;
    }
    // Weak duality: t* >= -<C, X> = tr(F0 X1) for primal-feasible X.
    const double t_lower = -pobj;
    if (rel_p < 1e-10 && t_lower > std::max(opt.eps_feas, 1e-7 * (1.0 + std::abs(t_lower)))) {
      res.verdict = Verdict::Infeasible;
      res.message = "dual bound certifies min max-eig > 0";
      return res;
    }
    if (rel_p < opt.tol && rel_d < opt.tol && rel_gap < opt.tol) {
      if (y(L.t_index) < -opt.eps_feas && try_feasible(y)) return res;
      if (y(L.t_index) > -opt.eps_feas) {
        res.verdict = Verdict::Infeasible;
        res.message = "converged with optimal max-eig >= -eps_feas";
      } else {
        res.verdict = Verdict::NumericalFailure;
        res.message = "converged but witness failed validation";
      }
      return res;
    }

    Primal Zi;
    if (opt.verbose)
      std::fprintf(stderr, "it %3d  t=% .6e  rp=%.2e  rd=%.2e  gap=%.2e\n", iter, y(L.t_index), rel_p, rel_d, rel_gap);
    if (!chol_inverse(Z.X1, Zi.X1) || (L.psd_P && !chol_inverse(Z.X2, Zi.X2))) {
      res.verdict = Verdict::NumericalFailure;
      res.message = "dual slack lost definiteness";
      return res;
    }
    Zi.x3 = Z.x3.cwiseInverse();

    Matrix M = pr.schur(X, Zi, opt.parallel);
    Eigen::LLT<Matrix> mllt(M);
    Eigen::LDLT<Matrix> mldlt;
    bool use_llt = mllt.info() == Eigen::Success;
    if (!use_llt) {
      // Mild regularization for nearly singular Schur matrices.
      const double reg = 1e-14 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
      M.diagonal().array() += reg;
      mllt.compute(M);
      use_llt = mllt.info() == Eigen::Success;
      if (!use_llt) {
        mldlt.compute(M);
        if (mldlt.info() != Eigen::Success) {
          res.verdict = Verdict::NumericalFailure;
          res.message = "Schur complement factorization failed";
          return res;
        }
      }
    }
    auto msolve = [&](const Vector& r) -> Vector { return use_llt ? Vector(mllt.solve(r)) : Vector(mldlt.solve(r)); };

    // Builds the direction for a given sigma*mu and optional corrector term.
    auto direction = [&](double smu, const Direction* corr) {
      Direction d;
      Primal T;  // sigma*mu*Zi - X - X*Rd*Zi - corr
      T.X1 = smu * Zi.X1 - X.X1 - X.X1 * Rd.X1 * Zi.X1;
      if (corr) T.X1 -= corr->dX.X1 * corr->dZ.X1 * Zi.X1;
      T.X1 = linalg::symmetrize(T.X1);
      if (L.psd_P) {
        T.X2 = smu * Zi.X2 - X.X2 - X.X2 * Rd.X2 * Zi.X2;
        if (corr) T.X2 -= corr->dX.X2 * corr->dZ.X2 * Zi.X2;
        T.X2 = linalg::symmetrize(T.X2);
      }
      T.x3 = smu * Zi.x3 - X.x3 - X.x3.cwiseProduct(Rd.x3).cwiseProduct(Zi.x3);
      if (corr) T.x3 -= corr->dX.x3.cwiseProduct(corr->dZ.x3).cwiseProduct(Zi.x3);
      d.dy = msolve(Rp - pr.forward(T));
      const Primal Atdy = pr.adjoint(d.dy);
      d.dZ.X1 = Rd.X1 - Atdy.X1;
      d.dX.X1 = T.X1 - linalg::symmetrize(X.X1 * (d.dZ.X1 - Rd.X1) * Zi.X1);
      if (L.psd_P) {
        d.dZ.X2 = Rd.X2 - Atdy.X2;
        d.dX.X2 = T.X2 - linalg::symmetrize(X.X2 * (d.dZ.X2 - Rd.X2) * Zi.X2);
      }
      d.dZ.x3 = Rd.x3 - Atdy.x3;
      d.dX.x3 = T.x3 - X.x3.cwiseProduct(d.dZ.x3 - Rd.x3).cwiseProduct(Zi.x3);
      return d;
    };

    auto steps = [&](const Direction& d, double& ap, double& ad) {
      ap = max_step(X.X1, d.dX.X1);
      ad = max_step(Z.X1, d.dZ.X1);
      if (L.psd_P) {
        ap = std::min(ap, max_step(X.X2, d.dX.X2));
        ad = std::min(ad, max_step(Z.X2, d.dZ.X2));
      }
      ap = std::min(ap, max_step(X.x3, d.dX.x3));
      ad = std::min(ad, max_step(Z.x3, d.dZ.x3));
    };

    const Direction pred = direction(0.0, nullptr);
    double ap = 0.0, ad = 0.0;
    steps(pred, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    Primal Xa = X, Za = Z;
    Xa.X1 += ap * pred.dX.X1;
    Za.X1 += ad * pred.dZ.X1;
    if (L.psd_P) {
      Xa.X2 += ap * pred.dX.X2;
      Za.X2 += ad * pred.dZ.X2;
    }
    Xa.x3 += ap * pred.dX.x3;
    Za.x3 += ad * pred.dZ.x3;
    const double mu_aff = inner(Xa, Za, L.psd_P) / nu;
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    const Direction corr = direction(sigma * mu, &pred);
    steps(corr, ap, ad);
    const double frac = 0.95;
    ap = std::min(1.0, frac * ap);
    ad = std::min(1.0, frac * ad);
    if (!(ap > 0.0) || !(ad > 0.0) || !std::isfinite(ap) || !std::isfinite(ad)) {
      res.verdict = Verdict::NumericalFailure;
      res.message = "zero step length";
      return res;
    }
    X.X1 += ap * corr.dX.X1;
    Z.X1 += ad * corr.dZ.X1;
    if (L.psd_P) {
      X.X2 += ap * corr.dX.X2;
      Z.X2 += ad * corr.dZ.X2;
    }
    X.x3 += ap * corr.dX.x3;
    Z.x3 += ad * corr.dZ.x3;
    y += ad * corr.dy;
    Z.X1 = linalg::symmetrize(Z.X1);
    X.X1 = linalg::symmetrize(X.X1);
  }
  res.iterations = opt.max_iter;
  if (y(L.t_index) < -opt.eps_feas && try_feasible(y)) return res;
  res.verdict = Verdict::NumericalFailure;
  std::ostringstream os;
  os << "iteration limit reached (t=" << y(L.t_index) << ", rel_p=" << res.primal_residual
     << ", rel_d=" << res.dual_residual << ", gap=" << res.gap << ")";
  res.message = os.str();
  return res;
}

}  // namespace iqccert::sdp
