#pragma once

#include "iqccert/linalg.hpp"

#include <functional>
#include <string>
#include <vector>

namespace iqccert {

using VectorFunction = std::function<Vector(const Vector&)>;

/// Per-entry bounds lower_ij <= d pi_i / d x_j <= upper_ij.
struct GradientBoundSet {
  Matrix lower;  // n_a x n_s
  Matrix upper;

  GradientBoundSet() = default;
  GradientBoundSet(Matrix lo, Matrix hi);

  int n_a() const { return static_cast<int>(lower.rows()); }
  int n_s() const { return static_cast<int>(lower.cols()); }
  Matrix c() const { return 0.5 * (lower + upper); }
  Matrix c_bar() const { return upper - c(); }
  /// Entry (i, j) pinned to [0, 0]: agent i does not use observation j.
  bool is_zero(int i, int j) const { return lower(i, j) == 0.0 && upper(i, j) == 0.0; }

  void validate() const;

  static GradientBoundSet uniform(int n_a, int n_s, double l);
  /// mask(i, j) != 0 keeps [-l, l], else [0, 0].
  static GradientBoundSet sparse(const Matrix& mask, double l);
  /// Sign pattern: '+' -> [-eps l, l], '-' -> [-l, eps l], '0' -> [0, 0],
  /// anything else ('±') -> [-l, l].
  static GradientBoundSet one_sided(const std::vector<std::vector<std::string>>& pattern, double l, double eps);
};

struct MultiplierSet {
  Matrix lambda;  // n_a x n_s, >= 0
};

struct QuadConstraint {
  Matrix M;  // (n_s + n_a n_s) square, ordering (x, q) with q index i * n_s + j
  Matrix W;  // I_{n_a} kron 1_{1 x n_s}
};

QuadConstraint build_M(const GradientBoundSet& bounds, const MultiplierSet& mult);

/// Per-entry terms phi_ij = (cbar^2 - c^2) dx_j^2 + 2 c q_ij dx_j - q_ij^2.
Matrix constraint_terms(const GradientBoundSet& bounds, const Vector& dx, const Matrix& q);

/// Hybrid-vector differences: q_ij = f_i(h^{j-1}) - f_i(h^j) with
/// h^j = [y_1..y_j, x_{j+1}..x_n], so that sum_j q_ij = f_i(x) - f_i(y).
Matrix hybrid_differences(const VectorFunction& f, int n_out, const Vector& x, const Vector& y);

bool check_pointwise(const GradientBoundSet& bounds, const VectorFunction& f, const Vector& x, const Vector& y,
                     double tol = 1e-10);

/// q_ij for pi between 0 and y: sum_j q_ij = pi_i(y) - pi_i(0).
Matrix decompose_sector(const VectorFunction& pi, const GradientBoundSet& bounds, const Vector& y);

bool membership_S(const GradientBoundSet& bounds, const Vector& x, const Matrix& q, double tol = 1e-10);

}  // namespace iqccert
