#include "iqccert/iqc_blocks.hpp"

#include <cmath>
#include <numeric>

namespace iqccert {

void IqcBlock::validate() const {
  const Eigen::Index np = A_psi.rows();
  const Eigen::Index nz = M_g.rows();
  if (A_psi.cols() != np || B_psi_y.rows() != np || B_psi_v.rows() != np || C_psi.cols() != np)
    throw ValidationError("IqcBlock: filter state dimensions inconsistent");
  if (M_g.cols() != nz || C_psi.rows() != nz || D_psi_y.rows() != nz || D_psi_v.rows() != nz)
    throw ValidationError("IqcBlock: output dimension inconsistent with M_g");
  if (B_psi_y.cols() != D_psi_y.cols() || B_psi_v.cols() != D_psi_v.cols())
    throw ValidationError("IqcBlock: input dimensions inconsistent");
  if (!M_g.allFinite() || (M_g - M_g.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ValidationError("IqcBlock: M_g must be finite and symmetric");
  if (std::accumulate(parts.begin(), parts.end(), 0) != nz)
    throw ValidationError("IqcBlock: parts do not partition z");
  if (np > 0 && linalg::max_real_eigenvalue(A_psi) >= 0.0) throw ValidationError("IqcBlock: A_psi not Hurwitz");
}

namespace {

IqcBlock static_block(int ny, int nv, Matrix m) {
  IqcBlock b;
  b.A_psi = Matrix::Zero(0, 0);
  b.B_psi_y = Matrix::Zero(0, ny);
  b.B_psi_v = Matrix::Zero(0, nv);
  b.C_psi = Matrix::Zero(ny + nv, 0);
  b.D_psi_y = Matrix::Zero(ny + nv, ny);
  b.D_psi_y.topRows(ny) = Matrix::Identity(ny, ny);
  b.D_psi_v = Matrix::Zero(ny + nv, nv);
  b.D_psi_v.bottomRows(nv) = Matrix::Identity(nv, nv);
  b.M_g = std::move(m);
  b.parts = {ny + nv};
  return b;
}

}  // namespace

IqcBlock sector_iqc(double alpha, double beta) {
  if (!std::isfinite(alpha) || !std::isfinite(beta)) throw ValidationError("sector_iqc: non-finite slope");
  if (alpha > beta) throw ValidationError("sector_iqc: alpha > beta");
  Matrix m(2, 2);
  m << -2.0 * alpha * beta, alpha + beta, alpha + beta, -2.0;
  return static_block(1, 1, m);
}

IqcBlock l2_gain_iqc(double gamma, int n, int m, double lambda0) {
  if (!(gamma >= 0.0)) throw ValidationError("l2_gain_iqc: gamma must be >= 0");
  if (!(lambda0 > 0.0)) throw ValidationError("l2_gain_iqc: lambda0 must be > 0");
  if (n <= 0 || m <= 0) throw ValidationError("l2_gain_iqc: dimensions must be positive");
  Matrix mg = Matrix::Zero(n + m, n + m);
  mg.topLeftCorner(n, n) = lambda0 * gamma * gamma * Matrix::Identity(n, n);
  mg.bottomRightCorner(m, m) = -lambda0 * Matrix::Identity(m, m);
  return static_block(n, m, mg);
}

IqcBlock identity_iqc(int n_y, int n_v) { return static_block(n_y, n_v, Matrix::Zero(n_y + n_v, n_y + n_v)); }

IqcBlock zames_falb_iqc(double m_lo, double m_hi, double pole) {
  if (!std::isfinite(m_lo) || !std::isfinite(m_hi)) throw ValidationError("zames_falb_iqc: non-finite slope");
  if (m_hi - m_lo < 0.0) throw ValidationError("zames_falb_iqc: m_hi < m_lo");
  if (std::isnan(pole) || pole <= 0.0) throw ValidationError("zames_falb_iqc: pole must be > 0");
  if (std::isinf(pole)) return sector_iqc(m_lo, m_hi);

  IqcBlock b;
  b.A_psi = Matrix::Constant(1, 1, -pole);
  b.B_psi_y = Matrix::Constant(1, 1, -pole * m_lo);
  b.B_psi_v = Matrix::Constant(1, 1, pole);
  // z = [y, v, y, v, psi]
  b.C_psi = Matrix::Zero(5, 1);
  b.C_psi(4, 0) = 1.0;
  b.D_psi_y = Matrix::Zero(5, 1);
  b.D_psi_y(0, 0) = 1.0;
  b.D_psi_y(2, 0) = 1.0;
  b.D_psi_v = Matrix::Zero(5, 1);
  b.D_psi_v(1, 0) = 1.0;
  b.D_psi_v(3, 0) = 1.0;
  b.M_g = Matrix::Zero(5, 5);
  b.M_g.topLeftCorner(2, 2) = sector_iqc(m_lo, m_hi).M_g;
  Matrix zf(3, 3);
  zf << -2.0 * m_lo * m_hi, m_lo + m_hi, -m_hi,  //
      m_lo + m_hi, -2.0, 1.0,                     //
      -m_hi, 1.0, 0.0;
  b.M_g.bottomRightCorner(3, 3) = zf;
  b.parts = {2, 3};
  return b;
}

IqcBlock combine(const std::vector<IqcBlock>& blocks, const std::vector<double>& taus) {
  if (blocks.empty()) throw ValidationError("combine: no blocks");
  if (taus.size() != blocks.size()) throw ValidationError("combine: one weight per block required");
  int np = 0, ny = 0, nv = 0, nz = 0;
  for (size_t k = 0; k < blocks.size(); ++k) {
    blocks[k].validate();
    if (!(taus[k] >= 0.0)) throw ValidationError("combine: negative weight");
    np += blocks[k].n_psi();
    ny += blocks[k].n_y();
    nv += blocks[k].n_v();
    nz += blocks[k].n_z();
  }
  if (blocks.size() == 1 && taus[0] == 1.0) return blocks[0];
  IqcBlock out;
  out.A_psi = Matrix::Zero(np, np);
  out.B_psi_y = Matrix::Zero(np, ny);
  out.B_psi_v = Matrix::Zero(np, nv);
  out.C_psi = Matrix::Zero(nz, np);
  out.D_psi_y = Matrix::Zero(nz, ny);
  out.D_psi_v = Matrix::Zero(nz, nv);
  out.M_g = Matrix::Zero(nz, nz);
  int op = 0, oy = 0, ov = 0, oz = 0;
  for (size_t k = 0; k < blocks.size(); ++k) {
    const IqcBlock& b = blocks[k];
    const int p = b.n_psi(), y = b.n_y(), v = b.n_v(), z = b.n_z();
    out.A_psi.block(op, op, p, p) = b.A_psi;
    out.B_psi_y.block(op, oy, p, y) = b.B_psi_y;
    out.B_psi_v.block(op, ov, p, v) = b.B_psi_v;
    out.C_psi.block(oz, op, z, p) = b.C_psi;
    out.D_psi_y.block(oz, oy, z, y) = b.D_psi_y;
    out.D_psi_v.block(oz, ov, z, v) = b.D_psi_v;
    out.M_g.block(oz, oz, z, z) = taus[k] * b.M_g;
    out.parts.insert(out.parts.end(), b.parts.begin(), b.parts.end());
    op += p;
    oy += y;
    ov += v;
    oz += z;
  }
  return out;
}

}  // namespace iqccert
