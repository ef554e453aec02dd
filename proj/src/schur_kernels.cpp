#include "iqccert/schur_kernels.hpp"

#include <omp.h>

#include <array>

namespace iqccert::sdp {

int p_index(int n, int k, int l) {
  // rows 0..k-1 contribute n, n-1, ..., n-k+1 entries
  return k * n - (k * (k - 1)) / 2 + (l - k);
}

namespace {

struct PEntry {
  int a;
  int b;
};

std::vector<PEntry> p_entries(int n) {
  std::vector<PEntry> out;
  out.reserve(static_cast<size_t>(n * (n + 1) / 2));
  for (int k = 0; k < n; ++k)
    for (int l = k; l < n; ++l) out.push_back({k, l});
  return out;
}

// Precomputed products for the P x P part.
struct PPFactors {
  Matrix a1, a2, g1, h1, g2, h2;
  Matrix GX, HX, GZ, HZ;  // n x dim
};

PPFactors make_factors(const StructuredBlock& b, const Matrix& X, const Matrix& Zi) {
  const Matrix& H = *b.H;
  const Matrix& G = *b.G;
  PPFactors f;
  f.GX.noalias() = G * X;
  f.HX.noalias() = H * X;
  f.GZ.noalias() = G * Zi;
  f.HZ.noalias() = H * Zi;
  f.a1.noalias() = f.GX * H.transpose();
  f.g1.noalias() = f.GX * G.transpose();
  f.h1.noalias() = f.HX * H.transpose();
  f.a2.noalias() = f.GZ * H.transpose();
  f.g2.noalias() = f.GZ * G.transpose();
  f.h2.noalias() = f.HZ * H.transpose();
  return f;
}

// tr(E_i R E_j S) summed over the four products of the P-map, for
// E = e_a e_b^T + e_b e_a^T (a != b) or e_a e_a^T.
inline double pp_value(const PPFactors& f, PEntry i, PEntry j) {
  std::array<std::pair<int, int>, 2> ei{{{i.a, i.b}, {i.b, i.a}}};
  std::array<std::pair<int, int>, 2> ej{{{j.a, j.b}, {j.b, j.a}}};
  const int ni = i.a == i.b ? 1 : 2;
  const int nj = j.a == j.b ? 1 : 2;
  double acc = 0.0;
  for (int u = 0; u < ni; ++u) {
    const int p = ei[u].first, q = ei[u].second;
    for (int v = 0; v < nj; ++v) {
      const int r = ej[v].first, s = ej[v].second;
      acc += f.a1(q, r) * f.a2(s, p) + f.g1(q, r) * f.h2(s, p) + f.h1(q, r) * f.g2(s, p) +
             f.a1(r, q) * f.a2(p, s);
    }
  }
  return acc;
}

// S = sum v [GX[:,p] HZ[:,q]^T + HX[:,p] GZ[:,q]^T]; returns tr(E_kl S) per P entry.
void p_sparse_column(const PPFactors& f, const SparseSym& entries, int n, const std::vector<PEntry>& pe,
                     Eigen::Ref<Vector> out) {
  Matrix S = Matrix::Zero(n, n);
  for (const auto& t : entries) {
    S.noalias() += t.value * f.GX.col(t.row) * f.HZ.col(t.col).transpose();
    S.noalias() += t.value * f.HX.col(t.row) * f.GZ.col(t.col).transpose();
  }
  for (size_t idx = 0; idx < pe.size(); ++idx) {
    const auto [a, b] = pe[idx];
    out(static_cast<Eigen::Index>(idx)) = a == b ? S(a, a) : S(a, b) + S(b, a);
  }
}

inline double sparse_sparse(const SparseSym& ai, const SparseSym& aj, const Matrix& X, const Matrix& Zi) {
  double acc = 0.0;
  for (const auto& u : ai)
    for (const auto& w : aj) acc += u.value * w.value * X(u.col, w.row) * Zi(w.col, u.row);
  return acc;
}

template <bool Parallel>
void schur_impl(const StructuredBlock& b, int n, const Matrix& X, const Matrix& Zi, Matrix& M) {
  const bool has_p = b.H != nullptr;
  const int nv = static_cast<int>(b.sparse.size());
  if (has_p) {
    const PPFactors f = make_factors(b, X, Zi);
    const auto pe = p_entries(n);
    const int np = static_cast<int>(pe.size());
#pragma omp parallel for schedule(dynamic, 8) if (Parallel)
    for (int i = 0; i < np; ++i) {
      for (int j = i; j < np; ++j) {
        const double v = pp_value(f, pe[i], pe[j]);
        M(i, j) += v;
        if (j != i) M(j, i) += v;
      }
    }
#pragma omp parallel for schedule(dynamic, 1) if (Parallel)
    for (int k = 0; k < nv; ++k) {
      Vector col(np);
      p_sparse_column(f, *b.sparse[k].entries, n, pe, col);
      const int jv = b.sparse[k].index;
      for (int i = 0; i < np; ++i) {
        M(i, jv) += col(i);
        M(jv, i) += col(i);
      }
    }
  }
#pragma omp parallel for schedule(dynamic, 1) if (Parallel)
  for (int k = 0; k < nv; ++k) {
    for (int l = k; l < nv; ++l) {
      const double v = sparse_sparse(*b.sparse[k].entries, *b.sparse[l].entries, X, Zi);
      const int ik = b.sparse[k].index, il = b.sparse[l].index;
      M(ik, il) += v;
      if (ik != il) M(il, ik) += v;
    }
  }
}

Matrix sparse_dense(const SparseSym& s, int dim) {
  Matrix out = Matrix::Zero(dim, dim);
  for (const auto& t : s) out(t.row, t.col) += t.value;
  return out;
}

}  // namespace

Matrix p_coefficient(const StructuredBlock& b, int k, int l) {
  const int n = static_cast<int>(b.H->rows());
  Matrix E = Matrix::Zero(n, n);
  E(k, l) = 1.0;
  E(l, k) = 1.0;
  return b.H->transpose() * E * *b.G + b.G->transpose() * E * *b.H;
}

void schur_serial(const StructuredBlock& b, int n, const Matrix& X, const Matrix& Zi, Matrix& M) {
  schur_impl<false>(b, n, X, Zi, M);
}

void schur_parallel(const StructuredBlock& b, int n, const Matrix& X, const Matrix& Zi, Matrix& M) {
  schur_impl<true>(b, n, X, Zi, M);
}

void schur_dense_reference(const StructuredBlock& b, int n, const Matrix& X, const Matrix& Zi, Matrix& M) {
  std::vector<std::pair<int, Matrix>> coeffs;
  if (b.H != nullptr) {
    for (int k = 0; k < n; ++k)
      for (int l = k; l < n; ++l) coeffs.emplace_back(p_index(n, k, l), p_coefficient(b, k, l));
  }
  for (const auto& sv : b.sparse) coeffs.emplace_back(sv.index, sparse_dense(*sv.entries, b.dim));
  for (const auto& [i, Ai] : coeffs) {
    const Matrix left = Ai * X;
    for (const auto& [j, Aj] : coeffs) M(i, j) += (left * Aj * Zi).trace();
  }
}

}  // namespace iqccert::sdp
