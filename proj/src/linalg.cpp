#include "iqccert/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace iqccert::linalg {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_square(const Matrix& m, const std::string& what) {
  if (m.rows() != m.cols()) {
    throw ValidationError(what + ": expected a square matrix, got " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
  }
}

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw ValidationError(what + ": non-finite entries");
}

double max_real_eigenvalue(const Matrix& a) {
  require_square(a, "max_real_eigenvalue");
  require_finite(a, "max_real_eigenvalue");
  if (a.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue iteration did not converge");
  return es.eigenvalues().real().maxCoeff();
}

double max_sym_eigenvalue(const Matrix& s) {
  if (s.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(s.rows() - 1);
}

double min_sym_eigenvalue(const Matrix& s) {
  if (s.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  require_square(a, "solve_lyapunov");
  const Eigen::Index n = a.rows();
  const Matrix eye = Matrix::Identity(n, n);
  // vec(A^T X + X A) = (I kron A^T + A^T kron I) vec(X)
  const Matrix op = kron(eye, a.transpose()) + kron(a.transpose(), eye);
  Eigen::Map<const Vector> qv(q.data(), n * n);
  Eigen::PartialPivLU<Matrix> lu(op);
  Vector xv = lu.solve(-qv);
  Matrix x = Eigen::Map<Matrix>(xv.data(), n, n);
  if (!x.allFinite()) throw NumericalError("Lyapunov equation is singular");
  return symmetrize(x);
}

namespace {

Matrix care_residual(const Matrix& a, const Matrix& g, const Matrix& q, const Matrix& x) {
  return a.transpose() * x + x * a - x * g * x + q;
}

}  // namespace

Matrix solve_care(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r) {
  require_square(a, "solve_care(A)");
  require_square(q, "solve_care(Q)");
  require_square(r, "solve_care(R)");
  const Eigen::Index n = a.rows();
  if (b.rows() != n || q.rows() != n || r.rows() != b.cols())
    throw ValidationError("solve_care: dimension mismatch");
  Eigen::LLT<Matrix> rllt(r);
  if (rllt.info() != Eigen::Success) throw ValidationError("solve_care: R must be positive definite");
  const Matrix g = b * rllt.solve(b.transpose());

  Matrix h(2 * n, 2 * n);
  h << a, -g, -q, -a.transpose();

  // Newton iteration for sign(H) with determinant scaling.
  Matrix z = h;
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<Matrix> lu(z);
    const double det = lu.determinant();
    if (!std::isfinite(det) || det == 0.0) throw NumericalError("solve_care: Hamiltonian has imaginary-axis eigenvalues");
    const Matrix zinv = lu.inverse();
    const double c = std::pow(std::abs(det), -1.0 / static_cast<double>(2 * n));
    const Matrix znew = 0.5 * (c * z + zinv / c);
    const double delta = (znew - z).norm() / std::max(1.0, z.norm());
    z = znew;
    if (delta < 1e-13) {
      converged = true;
      break;
    }
  }
  if (!converged && !z.allFinite()) throw NumericalError("solve_care: sign iteration diverged");

  const Matrix w11 = z.topLeftCorner(n, n);
  const Matrix w12 = z.topRightCorner(n, n);
  const Matrix w21 = z.bottomLeftCorner(n, n);
  const Matrix w22 = z.bottomRightCorner(n, n);
  Matrix lhs(2 * n, n);
  lhs << w12, w22 + Matrix::Identity(n, n);
  Matrix rhs(2 * n, n);
  rhs << w11 + Matrix::Identity(n, n), w21;
  Matrix x = symmetrize(lhs.colPivHouseholderQr().solve(-rhs));
  if (!x.allFinite()) throw NumericalError("solve_care: no stabilizing solution");

  // Newton-Kleinman refinement from the sign-function estimate.
  for (int it = 0; it < 4; ++it) {
    const Matrix acl = a - g * x;
    if (max_real_eigenvalue(acl) >= 0.0) break;
    const Matrix xn = solve_lyapunov(acl, q + x * g * x);
    if (!xn.allFinite()) break;
    const double delta = (xn - x).norm() / std::max(1.0, x.norm());
    x = xn;
    if (delta < 1e-14) break;
  }
  const Matrix acl = a - g * x;
  const double res = care_residual(a, g, q, x).norm() / std::max(1.0, q.norm() + x.norm());
  if (max_real_eigenvalue(acl) >= 0.0 || res > 1e-6)
    throw NumericalError("solve_care: no stabilizing solution (pair not stabilizable?)");
  return x;
}

double spectral_norm(const Matrix& w, int max_iter, double tol) {
  if (w.size() == 0) return 0.0;
  const Matrix gram = w.transpose() * w;
  Vector v = Vector::Constant(w.cols(), 1.0);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += 0.01 * static_cast<double>(i % 7);
  v.normalize();
  double sigma2 = 0.0;
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    Vector u = gram * v;
    const double nu = u.norm();
    if (nu == 0.0) return 0.0;
    const double next = v.dot(u);
    u /= nu;
    if (it > 0 && std::abs(next - sigma2) <= tol * std::max(1.0, std::abs(next)) && (u - v).norm() < 1e-6) {
      sigma2 = next;
      converged = true;
      break;
    }
    sigma2 = next;
    v = u;
  }
  if (!converged) {
    Eigen::JacobiSVD<Matrix> svd(w);
    return svd.singularValues()(0);
  }
  return std::sqrt(std::max(0.0, sigma2));
}

}  // namespace iqccert::linalg
