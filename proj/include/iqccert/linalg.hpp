#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace iqccert {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when inputs violate a documented precondition (dimensions, signs,
/// non-finite entries). Maps to exit code 2 in the CLI.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical routine cannot produce a trustworthy answer.
/// Maps to exit code 3 in the CLI.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace linalg {

bool all_finite(const Matrix& m);
void require_square(const Matrix& m, const std::string& what);
void require_finite(const Matrix& m, const std::string& what);

/// Largest real part over the spectrum of a general square matrix.
double max_real_eigenvalue(const Matrix& a);

double max_sym_eigenvalue(const Matrix& s);
double min_sym_eigenvalue(const Matrix& s);

Matrix symmetrize(const Matrix& m);

/// Solves A^T X + X A + Q = 0 for symmetric X via the Kronecker form.
/// Intended for the small state dimensions used here (n <= ~40).
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

/// Stabilizing solution of A^T X + X A - X B R^{-1} B^T X + Q = 0.
/// Matrix sign iteration on the Hamiltonian followed by Newton-Kleinman
/// refinement. Throws NumericalError if no stabilizing solution is found.
Matrix solve_care(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r);

/// Largest singular value by power iteration on W^T W from a deterministic
/// start vector. Falls back to a full SVD when the iteration has not
/// converged to `tol` within `max_iter` steps.
double spectral_norm(const Matrix& w, int max_iter = 50, double tol = 1e-10);

Matrix kron(const Matrix& a, const Matrix& b);

}  // namespace linalg
}  // namespace iqccert
