#pragma once

#include "iqccert/certifier.hpp"

#include <vector>

namespace iqccert {

/// n log-spaced points in [lo, hi].
std::vector<double> log_grid(double lo, double hi, int n);

/// Default grid: 200 points over [1e-3, 1e3].
std::vector<double> default_omega_grid();

struct FreqCheck {
  bool pass = false;
  double max_eig = 0.0;     // worst eigenvalue over the grid (and omega = inf)
  double worst_omega = 0.0; // +inf when the high-frequency limit is worst
};

/// Evaluates [G(jw); I]^* Pi [G(jw); I] with Pi = F0 + sum_k s_k F_k, where
/// G(jw) = (jwI - A)^{-1} [B_q, B_v, B_e] is read off the assembled problem.
/// Passes iff every sampled max eigenvalue is <= -eps.
FreqCheck freq_domain_check(const CertProblem& cp, const Vector& s, const std::vector<double>& omega,
                            double eps = 1e-8);

/// LTI convenience form with explicit multipliers.
FreqCheck freq_domain_check(const LtiSystem& plant, const GradientBoundSet& bounds, const MultiplierSet& lambda,
                            double gamma, const std::vector<double>& omega, double eps = 1e-8);

struct FreqVerdict {
  sdp::Verdict verdict = sdp::Verdict::NumericalFailure;
  Vector s;         // multipliers (lambda then tau) when feasible
  double t = 0.0;   // optimal worst eigenvalue estimate
  int iterations = 0;
  std::string message;
};

/// Searches for multipliers satisfying the sampled frequency condition
/// (no storage matrix involved). Hermitian blocks are embedded as real
/// symmetric matrices of twice the size.
FreqVerdict freq_domain_feasible(const CertProblem& cp, const std::vector<double>& omega, double eps = 1e-8);

}  // namespace iqccert
