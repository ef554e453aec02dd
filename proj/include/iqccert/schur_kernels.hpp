#pragma once

// Schur complement assembly for the HKM direction:
//   M_ij += tr(A_i X A_j Z^{-1})
// for a single semidefinite block whose coefficient matrices are either the
// P-map E_kl -> H^T E_kl G + G^T E_kl H or explicit sparse symmetric matrices.

#include "iqccert/linalg.hpp"
#include "iqccert/sdp.hpp"

#include <vector>

namespace iqccert::sdp {

struct SparseVar {
  int index;  // column/row of M
  const SparseSym* entries;
};

struct StructuredBlock {
  int dim = 0;
  const Matrix* H = nullptr;  // n x dim, null if P does not enter the block
  const Matrix* G = nullptr;
  std::vector<SparseVar> sparse;
};

/// Index of P entry (k, l), k <= l, in the upper-triangular row-major order.
int p_index(int n, int k, int l);

/// Structured kernels. M must be pre-sized (m x m); only contributions are added.
void schur_serial(const StructuredBlock& b, int n, const Matrix& X, const Matrix& Zi, Matrix& M);
void schur_parallel(const StructuredBlock& b, int n, const Matrix& X, const Matrix& Zi, Matrix& M);

/// Builds every coefficient matrix densely and evaluates the trace products
/// directly. O(m^2 dim^3); only for tests on small problems.
void schur_dense_reference(const StructuredBlock& b, int n, const Matrix& X, const Matrix& Zi, Matrix& M);

/// Dense coefficient matrix of P entry (k,l) in block b.
Matrix p_coefficient(const StructuredBlock& b, int k, int l);

}  // namespace iqccert::sdp
