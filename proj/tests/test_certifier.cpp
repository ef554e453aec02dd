#include "iqccert/benchmarks.hpp"
#include "iqccert/certifier.hpp"
#include "iqccert/frequency.hpp"
#include "iqccert/simulator.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace iqccert;
using namespace testutil;

namespace {

LtiSystem scalar_plant(double b = 1.0) { return LtiSystem(Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, b)); }

bool lti_feasible(const LtiSystem& p, const GradientBoundSet& b, double gamma) {
  return feasibility(assemble_lti_sdp(p, b, gamma)).feasible;
}

Vector multipliers_of(const CertProblem& cp, const Certificate& c) {
  Vector s(cp.lmi.scalar_terms.size());
  size_t k = 0;
  for (const auto& [i, j] : cp.q_entries) s(static_cast<Eigen::Index>(k++)) = c.lambda.lambda(i, j);
  for (Eigen::Index t = 0; t < c.tau.size(); ++t) s(static_cast<Eigen::Index>(k++)) = c.tau(t);
  return s;
}

}  // namespace

TEST_CASE("lti assembly: scalar (1,1) entry") {
  const double l = 0.6, gamma = 4.0, p = 0.37, lam = 1.9;
  const CertProblem cp = assemble_lti_sdp(scalar_plant(), GradientBoundSet::uniform(1, 1, l), gamma);
  REQUIRE(cp.lmi.N == 3);
  REQUIRE(cp.lmi.scalar_terms.size() == 1);
  const Matrix F = sdp::evaluate(cp.lmi, Matrix::Constant(1, 1, p), Vector::Constant(1, lam));
  CHECK(F(0, 0) == doctest::Approx(-2.0 * p + 1.0 / gamma + lam * l * l).epsilon(1e-14));
  CHECK(F(2, 2) == doctest::Approx(-gamma));
  CHECK(F(1, 1) == doctest::Approx(-lam));
}

TEST_CASE("lti assembly: flight LMI is 79 x 79, non-Hurwitz plants rejected") {
  const Benchmark fl = build_flight();
  const CertProblem cp = assemble_lti_sdp(fl.plant, GradientBoundSet::uniform(4, 15, 0.5), 10.0);
  CHECK(cp.lmi.N == 79);
  CHECK_THROWS_AS(assemble_lti_sdp(LtiSystem(Matrix::Ones(1, 1), Matrix::Ones(1, 1)),
                                   GradientBoundSet::uniform(1, 1, 0.1), 1.0),
                  ValidationError);
  CHECK_THROWS_AS(assemble_lti_sdp(scalar_plant(), GradientBoundSet::uniform(1, 1, 0.1), 0.0), ValidationError);
}

TEST_CASE("feasibility: scalar small-gain oracle") {
  const auto r9 = feasibility(assemble_lti_sdp(scalar_plant(), GradientBoundSet::uniform(1, 1, 0.9), 50.0));
  REQUIRE(r9.feasible);
  CHECK(r9.verdict == sdp::Verdict::Feasible);
  CHECK(r9.stats.max_eig <= -1e-8);
  CHECK(r9.stats.min_eig_P >= -1e-9);
  for (double g : {1.0, 50.0, 1e4})
    CHECK(feasibility(assemble_lti_sdp(scalar_plant(), GradientBoundSet::uniform(1, 1, 1.1), g)).verdict ==
          sdp::Verdict::Infeasible);
}

TEST_CASE("bisect_gamma: open loop, closed loop, infeasible, easy lower end") {
  const CertSetup s{scalar_plant(), {}, {}, true};
  CertifierOptions opt;
  const auto c0 = bisect_gamma(s.assembler(GradientBoundSet::uniform(1, 1, 0.0)), 1e-2, 1e4, 0.05, opt);
  REQUIRE(c0.feasible);
  CHECK(c0.gamma >= 1.0);
  CHECK(c0.gamma <= 1.05 * 1.0 + 1e-9);

  // Worst-case static feedback k = l gives 1 / (1 - l).
  const auto c5 = bisect_gamma(s.assembler(GradientBoundSet::uniform(1, 1, 0.5)), 1e-2, 1e4, 0.05, opt);
  REQUIRE(c5.feasible);
  CHECK(c5.gamma >= 2.0 * (1 - 1e-6));
  CHECK(c5.gamma <= 2.0 * 1.05 * 1.05);

  const auto c11 = bisect_gamma(s.assembler(GradientBoundSet::uniform(1, 1, 1.1)), 1e-2, 1e4, 0.05, opt);
  CHECK_FALSE(c11.feasible);
  CHECK(c11.verdict == sdp::Verdict::Infeasible);
  CHECK(c11.gamma == 1e4);

  const auto easy = bisect_gamma(s.assembler(GradientBoundSet::uniform(1, 1, 0.0)), 5.0, 1e4, 0.05, opt);
  REQUIRE(easy.feasible);
  CHECK(easy.gamma <= 5.0 * 1.05);
}

TEST_CASE("nonlinear assembly with an inert identity filter matches the LTI route") {
  const LtiSystem p = scalar_plant();
  const IqcBlock id = identity_iqc(1, 0);
  const AugmentedSystem aug = augment(p, Matrix::Zero(1, 0), id, selection_matrix(1, 1));
  for (double l : {0.5, 0.9, 1.1}) {
    const auto b = GradientBoundSet::uniform(1, 1, l);
    const bool lti = lti_feasible(p, b, 50.0);
    const bool nl = feasibility(assemble_nonlinear_sdp(aug, id, b, 50.0)).feasible;
    CHECK(lti == nl);
  }
}

TEST_CASE("zero bounds are feasible for any stable plant at large gamma") {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 10; ++trial) {
    const LtiSystem p = random_plant(rng, unif_int(rng, 1, 4), unif_int(rng, 1, 2), unif(rng, 0.1, 1.0));
    const auto b = GradientBoundSet(Matrix::Zero(p.n_a(), p.n_s()), Matrix::Zero(p.n_a(), p.n_s()));
    CHECK(lti_feasible(p, b, 1e4));
  }
}

TEST_CASE("feasibility is monotone in l and gamma (property)") {
  std::mt19937_64 rng(41);
  int tested = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const LtiSystem p = random_plant(rng, unif_int(rng, 1, 3), unif_int(rng, 1, 2), unif(rng, 0.2, 1.5));
    const double l = unif(rng, 0.05, 1.0);
    const CertSetup s{p, {}, {}, true};
    const auto c = bisect_gamma(s.assembler(GradientBoundSet::uniform(p.n_a(), p.n_s(), l)), 1e-2, 1e4, 0.05);
    if (!c.feasible) continue;
    ++tested;
    CHECK(lti_feasible(p, GradientBoundSet::uniform(p.n_a(), p.n_s(), 0.9 * l), c.gamma));
    CHECK(lti_feasible(p, GradientBoundSet::uniform(p.n_a(), p.n_s(), l), 2.0 * c.gamma));
  }
  CHECK(tested >= 5);
}

TEST_CASE("loop-gain scaling invariance") {
  std::mt19937_64 rng(42);
  for (double alpha : {0.25, 2.0, 5.0}) {
    for (double l : {0.3, 0.9, 1.1, 1.6}) {
      const bool base = lti_feasible(scalar_plant(), GradientBoundSet::uniform(1, 1, l), 1e3);
      const bool scaled = lti_feasible(scalar_plant(alpha), GradientBoundSet::uniform(1, 1, l / alpha), 1e3);
      CHECK(base == scaled);
    }
  }
  const LtiSystem p2 = random_plant(rng, 2, 1, 0.5);
  const CertSetup s{p2, {}, {}, true};
  // Scan levels on a geometric grid in loop-gain units.
  for (double alpha : {0.5, 3.0}) {
    LtiSystem q = p2;
    q.B *= alpha;
    for (double lg : {0.1, 0.3, 1.0, 3.0, 10.0}) {
      const bool base = lti_feasible(p2, GradientBoundSet::uniform(1, 2, lg), 1e4);
      const bool scaled = lti_feasible(q, GradientBoundSet::uniform(1, 2, lg / alpha), 1e4);
      CHECK(base == scaled);
    }
  }
}

TEST_CASE("dissipation inequality holds on simulated scalar loops") {
  const double l = 0.6;
  const CertSetup s{scalar_plant(), {}, {}, true};
  const auto c = bisect_gamma(s.assembler(GradientBoundSet::uniform(1, 1, l)), 1e-2, 1e4, 0.05);
  REQUIRE(c.feasible);
  Dynamics dyn;
  dyn.A = Matrix::Constant(1, 1, -1.0);
  dyn.B = Matrix::Ones(1, 1);
  dyn.C = Matrix::Ones(1, 1);
  dyn.Q = Matrix::Ones(1, 1);
  dyn.R = Matrix::Ones(1, 1);
  const double h = 1e-3, T = 20.0;
  const int K = static_cast<int>(std::llround(T / h)) + 1;
  std::vector<Controller> ctrls = {
      [=](const Vector& x) { return Vector(l * x); },
      [=](const Vector& x) { return Vector(-l * x); },
      [=](const Vector& x) { return Vector(l * x.array().tanh().matrix()); },
      [=](const Vector& x) { return Vector(l * x.array().sin().matrix()); },
  };
  for (size_t k = 0; k < ctrls.size(); ++k) {
    std::vector<Matrix> ex;
    for (int seed = 0; seed < 3; ++seed) ex.push_back(lowpass_noise(1, K, h, 1.0, 0.5 + seed, 100 + seed));
    const auto g = empirical_l2_gain(dyn, ctrls[k], ex, T, h);
    CHECK(g.gain <= c.gamma);
  }
}

TEST_CASE("frequency-domain cross-check") {
  const LtiSystem p = scalar_plant();
  const auto grid = default_omega_grid();
  CHECK(grid.size() >= 200);
  CHECK(grid.front() == doctest::Approx(1e-3));
  CHECK(grid.back() == doctest::Approx(1e3));

  const CertProblem cp = assemble_lti_sdp(p, GradientBoundSet::uniform(1, 1, 0.7), 20.0);
  const Certificate c = feasibility(cp);
  REQUIRE(c.feasible);
  const Vector s = multipliers_of(cp, c);
  CHECK(freq_domain_check(cp, s, grid).pass);
  CHECK_FALSE(freq_domain_check(cp, -s, grid).pass);

  const auto zero = GradientBoundSet::uniform(1, 1, 0.0);
  const MultiplierSet none{Matrix::Zero(1, 1)};
  CHECK(freq_domain_check(p, zero, none, 1.05, grid).pass);
  CHECK_FALSE(freq_domain_check(p, zero, none, 0.95, grid).pass);

  const auto fv = freq_domain_feasible(cp, grid);
  CHECK(fv.verdict == sdp::Verdict::Feasible);
  const CertProblem bad = assemble_lti_sdp(p, GradientBoundSet::uniform(1, 1, 1.2), 1e3);
  CHECK(freq_domain_feasible(bad, grid).verdict == sdp::Verdict::Infeasible);
}

TEST_CASE("sweeps: trivial grid, monotone curves, static vs dynamic multipliers") {
  const CertSetup s{scalar_plant(), {}, {}, true};
  BoundsFactory f;
  f.n_a = 1;
  f.n_s = 1;
  f.mask = Matrix::Ones(1, 1);
  const auto c0 = sweep_margin(s, f, ConstraintMode::L2Only, {0.0});
  REQUIRE(c0.levels.size() == 1);
  CHECK(c0.levels[0].feasible);

  const auto curve = sweep_margin(s, f, ConstraintMode::L2Only, parse_grid("0.2:0.2:1.4"));
  CHECK(curve.monotone());
  CHECK(curve.max_certified() == doctest::Approx(0.8));

  const Benchmark fl = build_flight();
  const auto grid = parse_grid("0.3:0.1:0.7");
  const auto stat = sweep_margin(fl.cert_setup(false), fl.bounds_factory(), ConstraintMode::L2Only, grid);
  const auto dyn = sweep_margin(fl.cert_setup(true), fl.bounds_factory(), ConstraintMode::L2Only, grid);
  CHECK(stat.levels[2].feasible);  // l = 0.5
  CHECK(dyn.levels[2].feasible);
  CHECK(dyn.max_certified() >= stat.max_certified());
}

TEST_CASE("grid and mode parsing") {
  const auto g = parse_grid("0.1:0.1:0.5");
  REQUIRE(g.size() == 5);
  CHECK(g.back() == doctest::Approx(0.5));
  CHECK(parse_grid("0.5,1,2").size() == 3);
  CHECK_THROWS_AS(parse_grid(""), ValidationError);
  CHECK_THROWS_AS(parse_grid("1:2"), ValidationError);
  CHECK_THROWS_AS(parse_grid("1:-1:2"), ValidationError);
  CHECK(parse_mode("l2") == ConstraintMode::L2Only);
  CHECK(parse_mode("sparsity") == ConstraintMode::Sparsity);
  CHECK(parse_mode("nonhom") == ConstraintMode::Nonhomogeneous);
  CHECK_THROWS_AS(parse_mode("banana"), ValidationError);
}
