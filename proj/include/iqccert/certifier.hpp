#pragma once

#include "iqccert/gradient_bounds.hpp"
#include "iqccert/iqc_blocks.hpp"
#include "iqccert/sdp.hpp"
#include "iqccert/system_model.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace iqccert {

/// Assembled LMI together with the bookkeeping needed to read back the
/// multipliers. Variable ordering inside the LMI: [x | q | v | e] where x is
/// the (augmented) state, q the kept gradient-decomposition entries, v the
/// nonlinearity outputs and e the exogenous input.
struct CertProblem {
  sdp::LmiProblem lmi;
  std::vector<std::pair<int, int>> q_entries;  // (i, j) of each lambda variable
  int n_s = 0;                                 // plant states (first block of x)
  int n_x = 0;                                 // n_s + n_psi
  int n_v = 0;
  int n_a = 0;
  int n_tau = 0;
  double gamma = 0.0;
  GradientBoundSet bounds;
};

CertProblem assemble_lti_sdp(const LtiSystem& plant, const GradientBoundSet& bounds, double gamma);

/// When `optimize_tau` is false the IQC parts enter with weight 1.
CertProblem assemble_nonlinear_sdp(const AugmentedSystem& aug, const IqcBlock& block, const GradientBoundSet& bounds,
                                   double gamma, bool optimize_tau = true);

struct SolverStats {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  double max_eig = 0.0;
  double min_eig_P = 0.0;
  double solve_ms = 0.0;
  int solves = 0;
  std::string message;
};

struct Certificate {
  sdp::Verdict verdict = sdp::Verdict::NumericalFailure;
  bool feasible = false;
  double gamma = 0.0;
  Matrix P;
  MultiplierSet lambda;
  Vector tau;
  SolverStats stats;
  GradientBoundSet bounds;
};

struct CertifierOptions {
  sdp::Options sdp;
  double gamma_lo = 1e-2;
  double gamma_hi = 1e4;
  double gamma_tol = 0.05;  // multiplicative
  int max_bisect = 40;
  bool bisect = true;       // sweep: refine gamma at feasible levels
};

Certificate feasibility(const CertProblem& problem, const sdp::Options& opt = {});

using Assembler = std::function<CertProblem(double gamma)>;

/// Smallest feasible gamma within the multiplicative tolerance. gamma_hi is
/// checked first; an infeasible gamma_hi yields an infeasible certificate
/// carrying gamma_hi. Numerical failures are propagated, never read as
/// infeasible.
Certificate bisect_gamma(const Assembler& assemble, double gamma_lo, double gamma_hi, double tol,
                         const CertifierOptions& opt = {});

enum class ConstraintMode { L2Only, Sparsity, Nonhomogeneous };

ConstraintMode parse_mode(const std::string& s);
std::string to_string(ConstraintMode m);

/// Bounds for a level l: uniform [-l, l]; masked [-l, l] / [0, 0]; or
/// one-sided from a sign pattern with margin eps.
struct BoundsFactory {
  int n_a = 0;
  int n_s = 0;
  Matrix mask;                                   // n_a x n_s, nonzero = observed
  std::vector<std::vector<std::string>> pattern; // for Nonhomogeneous
  double eps = 0.1;

  GradientBoundSet make(ConstraintMode mode, double l) const;
};

/// A certification target: the plant (nominal loop closed) with optional
/// nonlinear channels and their multiplier block.
struct CertSetup {
  LtiSystem plant;
  NonlinearBlock nonlinear;  // empty -> LTI certification
  IqcBlock filter;           // used only when nonlinear is non-empty
  bool optimize_tau = true;

  Assembler assembler(const GradientBoundSet& bounds) const;
};

struct LevelResult {
  double l = 0.0;
  sdp::Verdict verdict = sdp::Verdict::NumericalFailure;
  bool feasible = false;
  double gamma = 0.0;
  double solve_ms = 0.0;
};

struct MarginCurve {
  ConstraintMode mode = ConstraintMode::L2Only;
  std::vector<LevelResult> levels;

  /// Largest grid level such that it and every lower level are feasible;
  /// 0 if the first level is infeasible.
  double max_certified() const;
  bool monotone() const;
};

/// Levels are solved concurrently; results are stored by grid index.
MarginCurve sweep_margin(const CertSetup& setup, const BoundsFactory& factory, ConstraintMode mode,
                         const std::vector<double>& grid, const CertifierOptions& opt = {});

/// Parses "a:step:b" (inclusive) or a comma list.
std::vector<double> parse_grid(const std::string& spec);

}  // namespace iqccert
