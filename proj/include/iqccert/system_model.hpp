#pragma once

#include "iqccert/iqc_blocks.hpp"
#include "iqccert/linalg.hpp"

#include <string>
#include <utility>
#include <vector>

namespace iqccert {

inline constexpr double kHurwitzMargin = 1e-9;

/// x' = A x + B u, y = C x.
struct LtiSystem {
  Matrix A, B, C;

  LtiSystem() = default;
  /// C defaults to identity when empty.
  LtiSystem(Matrix a, Matrix b, Matrix c = Matrix());

  int n_s() const { return static_cast<int>(A.rows()); }
  int n_a() const { return static_cast<int>(B.cols()); }
  int n_o() const { return static_cast<int>(C.rows()); }

  void validate() const;
};

bool is_hurwitz(const Matrix& a, double margin = kHurwitzMargin);

/// Residual nonlinearities, stored by tag so slope sectors are exact.
enum class NonlinearKind {
  SinMinusArg,  // phi(a) = sin(a) - a
  ArgMinusSin,  // phi(a) = a - sin(a)
};

/// One scalar channel: a = arg . x, contributes input * scale * phi(a) to x'.
struct NonlinearChannel {
  NonlinearKind kind = NonlinearKind::SinMinusArg;
  Vector arg;
  Vector input;
  double domain = 0.0;  // validity interval |a| <= domain

  double phi(double a) const;
  double dphi(double a) const;
  /// Exact slope interval of phi over [-domain, domain].
  std::pair<double, double> slope_sector() const;
};

struct NonlinearBlock {
  std::vector<NonlinearChannel> channels;

  int size() const { return static_cast<int>(channels.size()); }
  /// g(x) summed over channels.
  Vector eval(const Vector& x) const;
  /// Rows are the argument vectors (n_channels x n_s).
  Matrix arg_matrix(int n_s) const;
  /// Columns are the input vectors (n_s x n_channels).
  Matrix input_matrix(int n_s) const;
};

NonlinearKind parse_nonlinear_kind(const std::string& s);
std::string to_string(NonlinearKind k);

/// Interconnection of the plant with filter Psi on the nonlinear channels,
/// augmented state [x_G; psi].
struct AugmentedSystem {
  Matrix A_bar;    // [[A, 0], [B_psi^y C_y, A_psi]]
  Matrix B_bar_e;  // [B; 0]
  Matrix B_bar_q;  // [B W; 0]
  Matrix B_bar_v;  // [E; B_psi^v]
  Matrix C_bar;    // [D_psi^y C_y, C_psi]
  Matrix D_psi_v;
  int n_s = 0;
  int n_psi = 0;
  int n_a = 0;
};

/// W = I_{n_a} kron 1_{1 x n_s}.
Matrix selection_matrix(int n_a, int n_s);

/// Builds the augmented system. `nl` supplies the argument map C_y (rows of
/// channel arguments) and the residual input map E. Its channel count must
/// match the filter's y and v dimensions. W must equal selection_matrix().
AugmentedSystem augment(const LtiSystem& plant, const NonlinearBlock& nl, const IqcBlock& filter, const Matrix& W);

/// Variant used when the filter input is the full plant output (C_y = I)
/// and the residual enters through E.
AugmentedSystem augment(const LtiSystem& plant, const Matrix& E, const IqcBlock& filter, const Matrix& W);

enum class NominalMethod { Lqr, Given };

/// Stabilizing state feedback u = K x. LQR solves the Riccati equation with
/// weights Q, R; Given validates `given`. Throws NumericalError when A + B K
/// is not Hurwitz.
Matrix nominal_controller(const LtiSystem& plant, NominalMethod method, const Matrix& Q, const Matrix& R,
                          const Matrix& given = Matrix());

}  // namespace iqccert
