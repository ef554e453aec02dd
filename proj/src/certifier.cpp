#include "iqccert/certifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace iqccert {

namespace {

struct Blocks {
  Matrix A;    // n x n
  Matrix Be;   // n x n_a
  Matrix BqW;  // n x (n_a n_s): column i*n_s+j is B_i
  Matrix Bv;   // n x n_v
  Matrix Cz;   // n_z x n
  Matrix Dv;   // n_z x n_v
  Matrix Mg;
  std::vector<int> parts;
  int n_s = 0;
};

void dense_to_triplets(const Matrix& m, sdp::SparseSym& out) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      if (m(r, c) != 0.0) out.push_back({static_cast<int>(r), static_cast<int>(c), m(r, c)});
}

CertProblem assemble(const Blocks& b, const GradientBoundSet& bounds, double gamma, bool optimize_tau) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("assemble: gamma must be positive and finite");
  bounds.validate();
  const int n = static_cast<int>(b.A.rows());
  const int na = static_cast<int>(b.Be.cols());
  const int ns = b.n_s;
  if (bounds.n_a() != na || bounds.n_s() != ns)
    throw ValidationError("assemble: bounds must be " + std::to_string(na) + "x" + std::to_string(ns));
  const int nv = static_cast<int>(b.Bv.cols());

  CertProblem cp;
  cp.gamma = gamma;
  cp.bounds = bounds;
  cp.n_s = ns;
  cp.n_x = n;
  cp.n_v = nv;
  cp.n_a = na;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < ns; ++j)
      if (!bounds.is_zero(i, j)) cp.q_entries.emplace_back(i, j);
  const int nq = static_cast<int>(cp.q_entries.size());
  const int oq = n, ov = n + nq, oe = n + nq + nv;
  const int N = oe + na;

  sdp::LmiProblem& L = cp.lmi;
  L.N = N;
  L.n = n;
  L.H = Matrix::Zero(n, N);
  L.H.leftCols(n) = Matrix::Identity(n, n);
  L.G = Matrix::Zero(n, N);
  L.G.leftCols(n) = b.A;
  for (int k = 0; k < nq; ++k) {
    const auto [i, j] = cp.q_entries[static_cast<size_t>(k)];
    L.G.col(oq + k) = b.BqW.col(i * ns + j);
  }
  if (nv > 0) L.G.middleCols(ov, nv) = b.Bv;
  L.G.middleCols(oe, na) = b.Be;

  L.F0 = Matrix::Zero(N, N);
  for (int j = 0; j < ns; ++j) L.F0(j, j) = 1.0 / gamma;
  for (int k = 0; k < na; ++k) L.F0(oe + k, oe + k) = -gamma;

  const Matrix c = bounds.c();
  const Matrix cb = bounds.c_bar();
  for (int k = 0; k < nq; ++k) {
    const auto [i, j] = cp.q_entries[static_cast<size_t>(k)];
    sdp::SparseSym t;
    sdp::add_sym(t, j, j, cb(i, j) * cb(i, j) - c(i, j) * c(i, j));
    sdp::add_sym(t, j, oq + k, c(i, j));
    sdp::add_sym(t, oq + k, oq + k, -1.0);
    L.scalar_terms.push_back(std::move(t));
    L.scalar_names.push_back("lambda_" + std::to_string(i) + "_" + std::to_string(j));
  }

  if (nv > 0) {
    int oz = 0;
    for (size_t p = 0; p < b.parts.size(); ++p) {
      const int sz = b.parts[p];
      Matrix K = Matrix::Zero(sz, N);
      K.leftCols(n) = b.Cz.middleRows(oz, sz);
      K.middleCols(ov, nv) = b.Dv.middleRows(oz, sz);
      const Matrix F = K.transpose() * b.Mg.block(oz, oz, sz, sz) * K;
      if (optimize_tau) {
        sdp::SparseSym t;
        dense_to_triplets(linalg::symmetrize(F), t);
        L.scalar_terms.push_back(std::move(t));
        L.scalar_names.push_back("tau_" + std::to_string(p));
        ++cp.n_tau;
      } else {
        L.F0 += linalg::symmetrize(F);
      }
      oz += sz;
    }
  }
  return cp;
}

}  // namespace

CertProblem assemble_lti_sdp(const LtiSystem& plant, const GradientBoundSet& bounds, double gamma) {
  plant.validate();
  if (!is_hurwitz(plant.A)) throw ValidationError("assemble_lti_sdp: plant A is not Hurwitz");
  Blocks b;
  b.A = plant.A;
  b.Be = plant.B;
  b.BqW = plant.B * selection_matrix(plant.n_a(), plant.n_s());
  b.Bv = Matrix::Zero(plant.n_s(), 0);
  b.Cz = Matrix::Zero(0, plant.n_s());
  b.Dv = Matrix::Zero(0, 0);
  b.Mg = Matrix::Zero(0, 0);
  b.n_s = plant.n_s();
  return assemble(b, bounds, gamma, true);
}

CertProblem assemble_nonlinear_sdp(const AugmentedSystem& aug, const IqcBlock& block, const GradientBoundSet& bounds,
                                   double gamma, bool optimize_tau) {
  block.validate();
  const int n = aug.n_s + aug.n_psi;
  if (aug.A_bar.rows() != n || aug.C_bar.rows() != block.n_z() || aug.B_bar_v.cols() != block.n_v())
    throw ValidationError("assemble_nonlinear_sdp: augmented system does not match the IQC block");
  if (!is_hurwitz(aug.A_bar.topLeftCorner(aug.n_s, aug.n_s)))
    throw ValidationError("assemble_nonlinear_sdp: plant A is not Hurwitz");
  Blocks b;
  b.A = aug.A_bar;
  b.Be = aug.B_bar_e;
  b.BqW = aug.B_bar_q;
  b.Bv = aug.B_bar_v;
  b.Cz = aug.C_bar;
  b.Dv = aug.D_psi_v;
  b.Mg = block.M_g;
  b.parts = block.parts;
  b.n_s = aug.n_s;
  return assemble(b, bounds, gamma, optimize_tau);
}

Certificate feasibility(const CertProblem& cp, const sdp::Options& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const sdp::Result r = sdp::solve(cp.lmi, opt);
  const auto t1 = std::chrono::steady_clock::now();
  Certificate c;
  c.verdict = r.verdict;
  c.feasible = r.verdict == sdp::Verdict::Feasible;
  c.gamma = cp.gamma;
  c.bounds = cp.bounds;
  c.stats.iterations = r.iterations;
  c.stats.primal_residual = r.primal_residual;
  c.stats.dual_residual = r.dual_residual;
  c.stats.gap = r.gap;
  c.stats.max_eig = r.max_eig;
  c.stats.min_eig_P = r.min_eig_P;
  c.stats.solve_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  c.stats.solves = 1;
  c.stats.message = r.message;
  c.lambda.lambda = Matrix::Zero(cp.n_a, cp.n_s);
  c.tau = Vector::Ones(cp.n_tau);
  if (c.feasible) {
    c.P = r.P;
    for (size_t k = 0; k < cp.q_entries.size(); ++k)
      c.lambda.lambda(cp.q_entries[k].first, cp.q_entries[k].second) = r.s(static_cast<Eigen::Index>(k));
    c.tau = r.s.segment(static_cast<Eigen::Index>(cp.q_entries.size()), cp.n_tau);
  }
  return c;
}

namespace {

Certificate bisect_from(const Assembler& assemble, double lo, Certificate hi_cert, double tol,
                        const CertifierOptions& opt) {
  SolverStats total = hi_cert.stats;
  int failures = 0;
  auto run = [&](double g) {
    Certificate c = feasibility(assemble(g), opt.sdp);
    total.solve_ms += c.stats.solve_ms;
    total.solves += 1;
    if (c.verdict == sdp::Verdict::NumericalFailure) ++failures;
    return c;
  };
  Certificate best = std::move(hi_cert);
  Certificate lo_cert = run(lo);
  if (lo_cert.feasible) {
    best = std::move(lo_cert);
  } else {
    double hi = best.gamma;
    for (int it = 0; it < opt.max_bisect && hi / lo > 1.0 + tol; ++it) {
      const double mid = std::sqrt(lo * hi);
      Certificate c = run(mid);
      // A failed solve at an intermediate gamma is treated as "not certified":
      // the returned gamma stays backed by a validated witness.
      if (c.feasible) {
        hi = mid;
        best = std::move(c);
      } else {
        lo = mid;
      }
    }
  }
  best.stats.solve_ms = total.solve_ms;
  best.stats.solves = total.solves;
  if (failures > 0) best.stats.message += " (" + std::to_string(failures) + " numerical failures during bisection)";
  return best;
}

}  // namespace

Certificate bisect_gamma(const Assembler& assemble, double gamma_lo, double gamma_hi, double tol,
                         const CertifierOptions& opt) {
  if (!(gamma_lo > 0.0)) throw ValidationError("bisect_gamma: gamma_lo must be > 0");
  if (!(tol > 0.0)) throw ValidationError("bisect_gamma: tol must be > 0");
  if (gamma_hi <= 0.0) {
    // Open upper end: expand by x2 from gamma_lo until feasible.
    double lo = gamma_lo;
    double g = gamma_lo;
    SolverStats total;
    for (int it = 0; it < opt.max_bisect; ++it) {
      Certificate c = feasibility(assemble(g), opt.sdp);
      total.solve_ms += c.stats.solve_ms;
      total.solves += 1;
      if (c.feasible) {
        if (it == 0) return c;
        c = bisect_from(assemble, lo, std::move(c), tol, opt);
        c.stats.solve_ms += total.solve_ms;
        c.stats.solves += total.solves;
        return c;
      }
      lo = g;
      g *= 2.0;
    }
    Certificate c = feasibility(assemble(g), opt.sdp);
    c.stats.message += " (expansion cap reached)";
    return c;
  }
  if (gamma_hi < gamma_lo) throw ValidationError("bisect_gamma: gamma_hi < gamma_lo");
  Certificate hi = feasibility(assemble(gamma_hi), opt.sdp);
  if (!hi.feasible) return hi;
  return bisect_from(assemble, gamma_lo, std::move(hi), tol, opt);
}

ConstraintMode parse_mode(const std::string& s) {
  if (s == "l2" || s == "l2_only") return ConstraintMode::L2Only;
  if (s == "sparsity") return ConstraintMode::Sparsity;
  if (s == "nonhom" || s == "nonhomogeneous") return ConstraintMode::Nonhomogeneous;
  throw ValidationError("unknown constraint mode '" + s + "'");
}

std::string to_string(ConstraintMode m) {
  switch (m) {
    case ConstraintMode::L2Only:
      return "l2";
    case ConstraintMode::Sparsity:
      return "sparsity";
    case ConstraintMode::Nonhomogeneous:
      return "nonhom";
  }
  return "?";
}

GradientBoundSet BoundsFactory::make(ConstraintMode mode, double l) const {
  switch (mode) {
    case ConstraintMode::L2Only:
      return GradientBoundSet::uniform(n_a, n_s, l);
    case ConstraintMode::Sparsity:
      if (mask.rows() != n_a || mask.cols() != n_s) throw ValidationError("sparsity mode needs an n_a x n_s mask");
      return GradientBoundSet::sparse(mask, l);
    case ConstraintMode::Nonhomogeneous: {
      if (pattern.empty()) throw ValidationError("nonhomogeneous mode needs a sign pattern");
      GradientBoundSet b = GradientBoundSet::one_sided(pattern, l, eps);
      if (b.n_a() != n_a || b.n_s() != n_s) throw ValidationError("sign pattern has the wrong shape");
      return b;
    }
  }
  throw ValidationError("unknown mode");
}

Assembler CertSetup::assembler(const GradientBoundSet& bounds) const {
  if (nonlinear.size() == 0) {
    return [p = plant, bounds](double g) { return assemble_lti_sdp(p, bounds, g); };
  }
  const AugmentedSystem aug = augment(plant, nonlinear, filter, selection_matrix(plant.n_a(), plant.n_s()));
  return [aug, f = filter, bounds, tau = optimize_tau](double g) { return assemble_nonlinear_sdp(aug, f, bounds, g, tau); };
}

double MarginCurve::max_certified() const {
  double best = 0.0;
  for (const auto& lv : levels) {
    if (!lv.feasible) break;
    best = lv.l;
  }
  return best;
}

bool MarginCurve::monotone() const {
  bool seen_infeasible = false;
  for (const auto& lv : levels) {
    if (lv.verdict == sdp::Verdict::Infeasible) seen_infeasible = true;
    if (lv.feasible && seen_infeasible) return false;
  }
  return true;
}

MarginCurve sweep_margin(const CertSetup& setup, const BoundsFactory& factory, ConstraintMode mode,
                         const std::vector<double>& grid, const CertifierOptions& opt) {
  if (grid.empty()) throw ValidationError("sweep_margin: empty grid");
  for (size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw ValidationError("sweep_margin: grid must be increasing");
  MarginCurve curve;
  curve.mode = mode;
  curve.levels.resize(grid.size());
  const int nl = static_cast<int>(grid.size());
  std::vector<std::string> errors(grid.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < nl; ++k) {
    LevelResult& lv = curve.levels[static_cast<size_t>(k)];
    lv.l = grid[static_cast<size_t>(k)];
    try {
      const Assembler as = setup.assembler(factory.make(mode, lv.l));
      Certificate c = feasibility(as(opt.gamma_hi), opt.sdp);
      if (c.feasible && opt.bisect) c = bisect_from(as, opt.gamma_lo, std::move(c), opt.gamma_tol, opt);
      lv.verdict = c.verdict;
      lv.feasible = c.feasible;
      lv.gamma = c.feasible ? c.gamma : opt.gamma_hi;
      lv.solve_ms = c.stats.solve_ms;
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(k)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw ValidationError("sweep_margin: " + e);
  return curve;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> out;
  auto to_d = [](const std::string& s) {
    size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw ValidationError("grid: cannot parse '" + s + "'");
    }
    if (pos != s.size() || !std::isfinite(v)) throw ValidationError("grid: cannot parse '" + s + "'");
    return v;
  };
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw ValidationError("grid: expected start:step:stop");
    const double a = to_d(parts[0]), h = to_d(parts[1]), b = to_d(parts[2]);
    if (!(h > 0.0) || b < a) throw ValidationError("grid: need step > 0 and stop >= start");
    const long n = std::lround(std::floor((b - a) / h + 1e-9));
    for (long k = 0; k <= n; ++k) out.push_back(a + static_cast<double>(k) * h);
  } else {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_d(item));
  }
  if (out.empty()) throw ValidationError("grid: empty");
  return out;
}

}  // namespace iqccert
