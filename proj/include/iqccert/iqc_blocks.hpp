#pragma once

#include "iqccert/linalg.hpp"

#include <limits>
#include <vector>

namespace iqccert {

/// Stable filter Psi with inputs (y, v) and output z, plus the symmetric
/// middle matrix M_g.
///   psi' = A_psi psi + B_psi_y y + B_psi_v v
///   z    = C_psi psi + D_psi_y y + D_psi_v v
/// For a scalar channel, y is the nonlinearity argument and v its output.
/// After combine(), `parts` records the z-partition that each multiplier
/// weight tau_k scales.
struct IqcBlock {
  Matrix A_psi, B_psi_y, B_psi_v, C_psi, D_psi_y, D_psi_v;
  Matrix M_g;
  std::vector<int> parts;

  int n_psi() const { return static_cast<int>(A_psi.rows()); }
  int n_y() const { return static_cast<int>(D_psi_y.cols()); }
  int n_v() const { return static_cast<int>(D_psi_v.cols()); }
  int n_z() const { return static_cast<int>(M_g.rows()); }

  void validate() const;
};

inline constexpr double kStaticPole = std::numeric_limits<double>::infinity();

/// Static sector [alpha, beta]: M = [[-2 alpha beta, alpha+beta], [alpha+beta, -2]], z = [y; v].
IqcBlock sector_iqc(double alpha, double beta);

/// Static gain bound: M = diag(lambda0 gamma^2 I_n, -lambda0 I_m), z = [y; v].
IqcBlock l2_gain_iqc(double gamma, int n, int m, double lambda0);

/// First-order causal multiplier for a nonlinearity with slope in
/// [m_lo, m_hi]. pole = kStaticPole returns sector_iqc(m_lo, m_hi).
/// Otherwise psi' = -p psi + p (v - m_lo y) and z = [y; v | y; v; psi] with
/// two parts: the static sector form and
///   2 (m_hi y - v)(v - m_lo y - psi),
/// the shifted output against (1 - H) applied to the loop-shifted
/// nonlinearity, H(s) = p/(s+p). Independent weights on the two parts give
/// the multiplier family tau_1 + tau_2 (1 - H), which contains the static one.
IqcBlock zames_falb_iqc(double m_lo, double m_hi, double pole);

/// Block-diagonal stacking. Inputs/outputs are concatenated in order;
/// M_g = diag(tau_k M_k).
IqcBlock combine(const std::vector<IqcBlock>& blocks, const std::vector<double>& taus);

/// Static identity pass-through with M_g = 0 (degenerate augmentation).
IqcBlock identity_iqc(int n_y, int n_v);

}  // namespace iqccert
