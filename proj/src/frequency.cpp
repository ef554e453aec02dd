#include "iqccert/frequency.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <complex>
#include <limits>

namespace iqccert {

using CMatrix = Eigen::MatrixXcd;

std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw ValidationError("log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> out(static_cast<size_t>(n));
  const double a = std::log10(lo), b = std::log10(hi);
  for (int k = 0; k < n; ++k) out[static_cast<size_t>(k)] = std::pow(10.0, a + (b - a) * k / (n - 1));
  return out;
}

std::vector<double> default_omega_grid() { return log_grid(1e-3, 1e3, 200); }

namespace {

struct FreqData {
  int n = 0;  // state dimension
  int r = 0;  // remaining channels (q, v, e)
  Matrix A;
  Matrix Brest;
};

FreqData freq_data(const CertProblem& cp) {
  const auto& L = cp.lmi;
  FreqData d;
  d.n = L.n;
  d.r = L.N - L.n;
  Matrix Hexp = Matrix::Zero(L.n, L.N);
  Hexp.leftCols(L.n) = Matrix::Identity(L.n, L.n);
  if (!L.H.isApprox(Hexp, 0.0)) throw ValidationError("frequency check expects H = [I 0]");
  d.A = L.G.leftCols(L.n);
  d.Brest = L.G.rightCols(d.r);
  return d;
}

// T(jw) = [(jwI - A)^{-1} B_rest; I]
CMatrix transfer(const FreqData& d, double w) {
  CMatrix jwA = -d.A.cast<std::complex<double>>();
  jwA.diagonal().array() += std::complex<double>(0.0, w);
  CMatrix T(d.n + d.r, d.r);
  T.topRows(d.n) = jwA.partialPivLu().solve(d.Brest.cast<std::complex<double>>());
  T.bottomRows(d.r) = CMatrix::Identity(d.r, d.r);
  return T;
}

Matrix embed(const CMatrix& h) {
  const Eigen::Index m = h.rows();
  Matrix out(2 * m, 2 * m);
  const Matrix re = 0.5 * (h.real() + h.real().transpose());
  const Matrix im = 0.5 * (h.imag() - h.imag().transpose());
  out << re, -im, im, re;
  return out;
}

Matrix sparse_dense(const sdp::SparseSym& s, int N) {
  Matrix m = Matrix::Zero(N, N);
  for (const auto& t : s) m(t.row, t.col) += t.value;
  return m;
}

Matrix pi_matrix(const CertProblem& cp, const Vector& s) {
  Matrix pi = cp.lmi.F0;
  for (size_t k = 0; k < cp.lmi.scalar_terms.size(); ++k)
    for (const auto& t : cp.lmi.scalar_terms[k]) pi(t.row, t.col) += s(static_cast<Eigen::Index>(k)) * t.value;
  return pi;
}

}  // namespace

FreqCheck freq_domain_check(const CertProblem& cp, const Vector& s, const std::vector<double>& omega, double eps) {
  if (s.size() != static_cast<Eigen::Index>(cp.lmi.scalar_terms.size()))
    throw ValidationError("freq_domain_check: multiplier vector has wrong length");
  const FreqData d = freq_data(cp);
  const Matrix pi = pi_matrix(cp, s);
  const CMatrix pic = pi.cast<std::complex<double>>();
  std::vector<double> worst(omega.size());
  const int nw = static_cast<int>(omega.size());
#pragma omp parallel for schedule(static)
  for (int k = 0; k < nw; ++k) {
    const CMatrix T = transfer(d, omega[static_cast<size_t>(k)]);
    const CMatrix phi = T.adjoint() * pic * T;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (phi + phi.adjoint()), Eigen::EigenvaluesOnly);
    worst[static_cast<size_t>(k)] = es.eigenvalues().maxCoeff();
  }
  FreqCheck out;
  out.max_eig = linalg::max_sym_eigenvalue(pi.bottomRightCorner(d.r, d.r));
  out.worst_omega = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < omega.size(); ++k)
    if (worst[k] > out.max_eig) {
      out.max_eig = worst[k];
      out.worst_omega = omega[k];
    }
  out.pass = out.max_eig <= -eps;
  return out;
}

FreqCheck freq_domain_check(const LtiSystem& plant, const GradientBoundSet& bounds, const MultiplierSet& lambda,
                            double gamma, const std::vector<double>& omega, double eps) {
  const CertProblem cp = assemble_lti_sdp(plant, bounds, gamma);
  if (lambda.lambda.rows() != bounds.n_a() || lambda.lambda.cols() != bounds.n_s())
    throw ValidationError("freq_domain_check: multiplier shape mismatch");
  Vector s(static_cast<Eigen::Index>(cp.q_entries.size()));
  for (size_t k = 0; k < cp.q_entries.size(); ++k)
    s(static_cast<Eigen::Index>(k)) = lambda.lambda(cp.q_entries[k].first, cp.q_entries[k].second);
  return freq_domain_check(cp, s, omega, eps);
}

FreqVerdict freq_domain_feasible(const CertProblem& cp, const std::vector<double>& omega, double eps) {
  const FreqData d = freq_data(cp);
  const int ns = static_cast<int>(cp.lmi.scalar_terms.size());
  const int m = ns + 1;  // multipliers and t
  const int N = cp.lmi.N;
  std::vector<Matrix> F(static_cast<size_t>(ns));
  for (int k = 0; k < ns; ++k) F[static_cast<size_t>(k)] = sparse_dense(cp.lmi.scalar_terms[static_cast<size_t>(k)], N);

  sdp::DenseSdp p;
  p.b = Vector::Zero(m);
  p.b(ns) = -1.0;
  const size_t nw = omega.size();
  p.C.resize(nw);
  p.A.resize(nw);
#pragma omp parallel for schedule(static)
  for (int w = 0; w < static_cast<int>(nw); ++w) {
    const CMatrix T = transfer(d, omega[static_cast<size_t>(w)]);
    const CMatrix Tt = T.adjoint();
    p.C[static_cast<size_t>(w)] = -embed(Tt * cp.lmi.F0.cast<std::complex<double>>() * T);
    auto& a = p.A[static_cast<size_t>(w)];
    a.resize(static_cast<size_t>(m));
    for (int k = 0; k < ns; ++k) a[static_cast<size_t>(k)] = embed(Tt * F[static_cast<size_t>(k)].cast<std::complex<double>>() * T);
    a[static_cast<size_t>(ns)] = -Matrix::Identity(2 * d.r, 2 * d.r);
  }
  // High-frequency limit: the (q, v, e) corner of Pi.
  {
    p.C.push_back(-cp.lmi.F0.bottomRightCorner(d.r, d.r));
    std::vector<Matrix> a(static_cast<size_t>(m));
    for (int k = 0; k < ns; ++k) a[static_cast<size_t>(k)] = F[static_cast<size_t>(k)].bottomRightCorner(d.r, d.r);
    a[static_cast<size_t>(ns)] = -Matrix::Identity(d.r, d.r);
    p.A.push_back(std::move(a));
  }
  // Multipliers are nonnegative.
  for (int k = 0; k < ns; ++k) {
    p.C.push_back(Matrix::Zero(1, 1));
    std::vector<Matrix> a(static_cast<size_t>(m), Matrix::Zero(1, 1));
    a[static_cast<size_t>(k)](0, 0) = -1.0;
    p.A.push_back(std::move(a));
  }

  FreqVerdict out;
  sdp::DenseOptions opt;
  opt.pobj_stop = -std::max(eps, 1e-7);
  opt.accept = [&](const Vector& y) {
    if (y(ns) >= -eps) return false;
    const Vector s = y.head(ns).cwiseMax(0.0);
    if (freq_domain_check(cp, s, omega, eps).pass) {
      out.s = s;
      return true;
    }
    return false;
  };
  const sdp::DenseResult r = sdp::solve_dense(p, opt);
  out.iterations = r.iterations;
  out.t = r.y.size() == m ? r.y(ns) : 0.0;
  out.message = r.message;
  if (r.stopped_early && out.s.size() == ns) {
    out.verdict = sdp::Verdict::Feasible;
  } else if (r.stopped_early || (r.converged && out.t >= -eps)) {
    out.verdict = sdp::Verdict::Infeasible;
  } else {
    out.verdict = sdp::Verdict::NumericalFailure;
  }
  return out;
}

}  // namespace iqccert
