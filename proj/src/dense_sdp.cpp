#include "iqccert/sdp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace iqccert::sdp {

namespace {

using Blocks = std::vector<Matrix>;

double inner(const Blocks& a, const Blocks& b) {
  double v = 0.0;
  for (size_t k = 0; k < a.size(); ++k) v += a[k].cwiseProduct(b[k]).sum();
  return v;
}

Blocks adjoint(const DenseSdp& p, const Vector& y) {
  Blocks out(p.C.size());
  for (size_t k = 0; k < p.C.size(); ++k) {
    out[k] = Matrix::Zero(p.C[k].rows(), p.C[k].cols());
    for (size_t i = 0; i < p.A[k].size(); ++i)
      if (y(static_cast<Eigen::Index>(i)) != 0.0) out[k] += y(static_cast<Eigen::Index>(i)) * p.A[k][i];
  }
  return out;
}

Vector forward(const DenseSdp& p, const Blocks& X) {
  Vector out = Vector::Zero(p.b.size());
  for (size_t k = 0; k < p.C.size(); ++k)
    for (size_t i = 0; i < p.A[k].size(); ++i) out(static_cast<Eigen::Index>(i)) += p.A[k][i].cwiseProduct(X[k]).sum();
  return out;
}

double step_to_boundary(const Matrix& X, const Matrix& dX) {
  Eigen::LLT<Matrix> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  const Matrix Lm = llt.matrixL();
  const Matrix W1 = Lm.triangularView<Eigen::Lower>().solve(dX);
  const Matrix W1t = W1.transpose();
  const Matrix W = Lm.triangularView<Eigen::Lower>().solve(W1t);
  const double lmin = linalg::min_sym_eigenvalue(linalg::symmetrize(W));
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

}  // namespace

DenseResult solve_dense(const DenseSdp& p, const DenseOptions& opt) {
  const size_t nb = p.C.size();
  const Eigen::Index m = p.b.size();
  if (p.A.size() != nb) throw ValidationError("solve_dense: one coefficient list per block required");
  double nu = 0.0, cnorm = 0.0, anorm = 1.0;
  for (size_t k = 0; k < nb; ++k) {
    if (static_cast<Eigen::Index>(p.A[k].size()) != m) throw ValidationError("solve_dense: coefficient count != m");
    nu += static_cast<double>(p.C[k].rows());
    cnorm = std::max(cnorm, p.C[k].norm());
    for (const auto& a : p.A[k]) anorm = std::max(anorm, a.norm());
  }
  const double xi_d = std::max({10.0, std::sqrt(nu), anorm, cnorm});
  const double xi_p = std::max(10.0, std::sqrt(nu));
  Blocks X(nb), Z(nb);
  for (size_t k = 0; k < nb; ++k) {
    X[k] = xi_p * Matrix::Identity(p.C[k].rows(), p.C[k].rows());
    Z[k] = xi_d * Matrix::Identity(p.C[k].rows(), p.C[k].rows());
  }
  DenseResult res;
  Vector y = Vector::Zero(m);

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    res.iterations = iter;
    const Blocks Aty = adjoint(p, y);
    Blocks Rd(nb);
    for (size_t k = 0; k < nb; ++k) Rd[k] = p.C[k] - Z[k] - Aty[k];
    const Vector Rp = p.b - forward(p, X);
    const double gap = inner(X, Z);
    const double mu = gap / nu;
    res.pobj = inner(p.C, X);
    res.dobj = p.b.dot(y);
    res.primal_residual = Rp.norm() / (1.0 + p.b.norm());
    res.dual_residual = std::sqrt(inner(Rd, Rd)) / (1.0 + cnorm);
    res.y = y;
    const double rel_gap = std::abs(res.pobj - res.dobj) / (1.0 + std::abs(res.pobj) + std::abs(res.dobj));
    if (!std::isfinite(gap) || !y.allFinite()) {
      res.message = "non-finite iterate";
      return res;
    }
    if (opt.accept && opt.accept(y)) {
      res.stopped_early = true;
      res.message = "accepted by caller";
      return res;
    }
    if (res.primal_residual < 1e-10 && res.pobj < opt.pobj_stop) {
      res.stopped_early = true;
      res.message = "primal bound below stop value";
      return res;
    }
    if (res.primal_residual < opt.tol && res.dual_residual < opt.tol && rel_gap < opt.tol) {
      res.converged = true;
      res.message = "converged";
      return res;
    }

    Blocks Zi(nb);
    for (size_t k = 0; k < nb; ++k) {
      Eigen::LLT<Matrix> llt(Z[k]);
      if (llt.info() != Eigen::Success) {
        res.message = "dual slack lost definiteness";
        return res;
      }
      Zi[k] = linalg::symmetrize(llt.solve(Matrix::Identity(Z[k].rows(), Z[k].rows())));
    }
    Matrix M = Matrix::Zero(m, m);
    for (size_t k = 0; k < nb; ++k) {
      std::vector<Matrix> AX(static_cast<size_t>(m)), AZ(static_cast<size_t>(m));
      for (Eigen::Index i = 0; i < m; ++i) {
        AX[static_cast<size_t>(i)] = p.A[k][static_cast<size_t>(i)] * X[k];
        AZ[static_cast<size_t>(i)] = p.A[k][static_cast<size_t>(i)] * Zi[k];
      }
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i; j < m; ++j) {
          // tr(A_i X A_j Zi) = sum_ab (A_i X)_ab (A_j Zi)_ba
          const double v = AX[static_cast<size_t>(i)].cwiseProduct(AZ[static_cast<size_t>(j)].transpose()).sum();
          M(i, j) += v;
          if (i != j) M(j, i) += v;
        }
    }
    Eigen::LDLT<Matrix> ldlt(M);
    if (ldlt.info() != Eigen::Success) {
      res.message = "Schur complement factorization failed";
      return res;
    }

    struct Dir {
      Vector dy;
      Blocks dX, dZ;
    };
    auto direction = [&](double smu, const Dir* corr) {
      Dir d;
      Blocks T(nb);
      for (size_t k = 0; k < nb; ++k) {
        T[k] = smu * Zi[k] - X[k] - X[k] * Rd[k] * Zi[k];
        if (corr) T[k] -= corr->dX[k] * corr->dZ[k] * Zi[k];
        T[k] = linalg::symmetrize(T[k]);
      }
      d.dy = ldlt.solve(Rp - forward(p, T));
      const Blocks Atdy = adjoint(p, d.dy);
      d.dX.resize(nb);
      d.dZ.resize(nb);
      for (size_t k = 0; k < nb; ++k) {
        d.dZ[k] = Rd[k] - Atdy[k];
        d.dX[k] = T[k] + linalg::symmetrize(X[k] * Atdy[k] * Zi[k]);
      }
      return d;
    };
    auto steps = [&](const Dir& d, double& ap, double& ad) {
      ap = ad = std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < nb; ++k) {
        ap = std::min(ap, step_to_boundary(X[k], d.dX[k]));
        ad = std::min(ad, step_to_boundary(Z[k], d.dZ[k]));
      }
    };
    const Dir pred = direction(0.0, nullptr);
    double ap = 0.0, ad = 0.0;
    steps(pred, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = 0.0;
    for (size_t k = 0; k < nb; ++k) mu_aff += (X[k] + ap * pred.dX[k]).cwiseProduct(Z[k] + ad * pred.dZ[k]).sum();
    mu_aff /= nu;
    const double sigma = std::clamp(std::pow(std::max(0.0, mu_aff) / mu, 3.0), 0.0, 1.0);
    const Dir corr = direction(sigma * mu, &pred);
    steps(corr, ap, ad);
    ap = std::min(1.0, 0.95 * ap);
    ad = std::min(1.0, 0.95 * ad);
    if (!(ap > 0.0) || !(ad > 0.0)) {
      res.message = "zero step length";
      return res;
    }
    for (size_t k = 0; k < nb; ++k) {
      X[k] = linalg::symmetrize(X[k] + ap * corr.dX[k]);
      Z[k] = linalg::symmetrize(Z[k] + ad * corr.dZ[k]);
    }
    y += ad * corr.dy;
  }
  res.iterations = opt.max_iter;
  res.message = "iteration limit reached";
  return res;
}

}  // namespace iqccert::sdp
