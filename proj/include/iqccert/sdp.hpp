#pragma once

#include "iqccert/linalg.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace iqccert::sdp {

/// One entry of a symmetric coefficient matrix. Stored in full (both
/// (r,c) and (c,r) present for off-diagonal entries).
struct Triplet {
  int row;
  int col;
  double value;
};

using SparseSym = std::vector<Triplet>;

/// Adds v*(e_r e_c^T + e_c e_r^T) (or v*e_r e_r^T when r == c) to `m`.
void add_sym(SparseSym& m, int r, int c, double v);

/// Matrix inequality F(P, s) = F0 + H^T P G + G^T P H + sum_k s_k F_k < 0
/// over a symmetric n x n matrix P (optionally P >= 0) and scalars s >= 0.
/// H and G are n x N; F0 and each F_k are N x N and symmetric.
struct LmiProblem {
  int N = 0;
  int n = 0;
  Matrix H;
  Matrix G;
  Matrix F0;
  std::vector<SparseSym> scalar_terms;
  bool psd_P = true;
  std::vector<std::string> scalar_names;
};

void validate(const LmiProblem& p);

/// F(P, s) as a dense N x N matrix.
Matrix evaluate(const LmiProblem& p, const Matrix& P, const Vector& s);

enum class Verdict { Feasible, Infeasible, NumericalFailure };

const char* to_string(Verdict v);

struct Options {
  double eps_feas = 1e-8;  // F <= -eps_feas * I
  double eps_psd = 1e-9;   // P >= -eps_psd * I
  int max_iter = 120;
  double tol = 1e-9;       // relative residual / gap tolerance at convergence
  bool parallel = true;    // OpenMP Schur assembly
  bool verbose = false;    // per-iteration trace on stderr
};

struct Result {
  Verdict verdict = Verdict::NumericalFailure;
  Matrix P;
  Vector s;
  double t = 0.0;          // max eigenvalue bound from the solver
  double max_eig = 0.0;    // directly re-validated max eig of F (feasible case)
  double min_eig_P = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  std::string message;
};

/// Minimizes t subject to F(P, s) <= t I with a primal-dual interior point
/// method (HKM direction, Mehrotra predictor-corrector, infeasible start).
/// Feasible verdicts are only returned after direct eigenvalue validation.
Result solve(const LmiProblem& p, const Options& opt = {});

}  // namespace iqccert::sdp

namespace iqccert::sdp {

/// General block SDP with dense coefficient matrices:
///   max b^T y  s.t.  Z_k = C_k - sum_i y_i A_{k,i} >= 0 for every block k.
/// Independent from the structured solver above; used by the sampled
/// frequency-domain route and as a reference in tests.
struct DenseSdp {
  std::vector<Matrix> C;
  std::vector<std::vector<Matrix>> A;  // A[k][i]
  Vector b;
};

struct DenseResult {
  bool converged = false;
  bool stopped_early = false;
  Vector y;
  double pobj = 0.0;
  double dobj = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  std::string message;
};

struct DenseOptions {
  int max_iter = 100;
  double tol = 1e-9;
  /// Stop as soon as the primal iterate is feasible (relative residual
  /// below 1e-10) with <C, X> below this value.
  double pobj_stop = -std::numeric_limits<double>::infinity();
  /// Called with the current y; returning true stops the iteration.
  std::function<bool(const Vector&)> accept;
};

DenseResult solve_dense(const DenseSdp& p, const DenseOptions& opt = {});

}  // namespace iqccert::sdp
