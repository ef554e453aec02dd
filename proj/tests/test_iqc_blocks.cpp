#include "iqccert/iqc_blocks.hpp"
#include "iqccert/system_model.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>

using namespace iqccert;
using namespace testutil;

namespace {

using Signal = std::function<Vector(double)>;

// Minimum over truncation times of int_0^T z' M z dt, with the filter state
// integrated by RK4 and the integral by the trapezoid rule.
double min_running_integral(const IqcBlock& b, const Matrix& M, const Signal& y, const Signal& v, double T, double h) {
  Vector psi = Vector::Zero(b.n_psi());
  const auto dpsi = [&](const Vector& p, double t) -> Vector {
    if (b.n_psi() == 0) return Vector();
    return b.A_psi * p + b.B_psi_y * y(t) + b.B_psi_v * v(t);
  };
  const auto form = [&](const Vector& p, double t) {
    Vector z = b.D_psi_y * y(t) + b.D_psi_v * v(t);
    if (b.n_psi() > 0) z += b.C_psi * p;
    return z.dot(M * z);
  };
  const int steps = static_cast<int>(std::llround(T / h));
  double acc = 0.0, worst = 0.0, prev = form(psi, 0.0);
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    if (b.n_psi() > 0) {
      const Vector k1 = dpsi(psi, t), k2 = dpsi(psi + 0.5 * h * k1, t + 0.5 * h);
      const Vector k3 = dpsi(psi + 0.5 * h * k2, t + 0.5 * h), k4 = dpsi(psi + h * k3, t + h);
      psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const double cur = form(psi, t + h);
    acc += 0.5 * h * (prev + cur);
    prev = cur;
    worst = std::min(worst, acc);
  }
  return worst;
}

// Part p of a block's M_g, zero elsewhere.
Matrix part_matrix(const IqcBlock& b, size_t p) {
  int off = 0;
  for (size_t k = 0; k < p; ++k) off += b.parts[k];
  Matrix m = Matrix::Zero(b.n_z(), b.n_z());
  m.block(off, off, b.parts[p], b.parts[p]) = b.M_g.block(off, off, b.parts[p], b.parts[p]);
  return m;
}

Signal random_scalar_signal(std::mt19937_64& rng, double amp) {
  std::vector<double> a(4), w(4), ph(4);
  for (int k = 0; k < 4; ++k) {
    a[k] = unif(rng, 0.0, amp / 4.0);
    w[k] = std::exp(unif(rng, std::log(0.05), std::log(20.0)));
    ph[k] = unif(rng, 0.0, 2 * std::numbers::pi);
  }
  return [=](double t) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += a[k] * std::sin(w[k] * t + ph[k]);
    return Vector::Constant(1, s);
  };
}

}  // namespace

TEST_CASE("sector_iqc multiplier values") {
  CHECK(sector_iqc(0, 1).M_g == Matrix(Eigen::Matrix2d{{0, 1}, {1, -2}}));
  CHECK(sector_iqc(0, 0).M_g == Matrix(Eigen::Matrix2d{{0, 0}, {0, -2}}));
  CHECK(sector_iqc(-1, 0).M_g == Matrix(Eigen::Matrix2d{{0, -1}, {-1, -2}}));
  CHECK(sector_iqc(-1, 0).n_psi() == 0);
  CHECK_THROWS_AS(sector_iqc(1.0, 0.5), ValidationError);
}

TEST_CASE("l2_gain_iqc multiplier values") {
  CHECK(l2_gain_iqc(1, 1, 1, 1).M_g == Matrix(Eigen::Matrix2d{{1, 0}, {0, -1}}));
  const Matrix m = l2_gain_iqc(2, 2, 1, 0.5).M_g;
  CHECK(m == Matrix(Eigen::Vector3d(2, 2, -0.5).asDiagonal()));
  CHECK(l2_gain_iqc(0, 1, 1, 1).M_g(0, 0) == 0.0);
  CHECK_THROWS_AS(l2_gain_iqc(1, 1, 1, 0.0), ValidationError);
  CHECK_THROWS_AS(l2_gain_iqc(1, 1, 1, -1.0), ValidationError);
}

TEST_CASE("zames_falb_iqc: static sentinel, slopes, errors") {
  const double hi = 1.0 - std::cos(std::numbers::pi / 3.0);
  CHECK(hi == doctest::Approx(0.5).epsilon(1e-15));
  const IqcBlock zs = zames_falb_iqc(0.0, hi, kStaticPole), s = sector_iqc(0.0, hi);
  CHECK(zs.M_g == s.M_g);
  CHECK(zs.D_psi_y == s.D_psi_y);
  CHECK(zs.D_psi_v == s.D_psi_v);
  CHECK(zs.n_psi() == 0);
  const IqcBlock zd = zames_falb_iqc(0.0, hi, 1.0);
  CHECK(zd.n_psi() == 1);
  CHECK(zd.A_psi(0, 0) == -1.0);
  CHECK_THROWS_AS(zames_falb_iqc(0, 1, 0.0), ValidationError);
  CHECK_THROWS_AS(zames_falb_iqc(0, 1, -2.0), ValidationError);
  CHECK_THROWS_AS(zames_falb_iqc(1, 0, 1.0), ValidationError);
}

TEST_CASE("combine: identity, block-diagonal stacking, zero weights") {
  const IqcBlock a = sector_iqc(0, 1), b = sector_iqc(-1, 0);
  const IqcBlock one = combine({a}, {1.0});
  CHECK(one.M_g == a.M_g);
  const IqcBlock ab = combine({a, b}, {1.0, 2.0});
  REQUIRE(ab.n_z() == 4);
  CHECK(ab.M_g.topLeftCorner(2, 2) == a.M_g);
  CHECK(ab.M_g.bottomRightCorner(2, 2) == 2.0 * b.M_g);
  CHECK(ab.M_g.topRightCorner(2, 2).isZero(0.0));
  CHECK(ab.n_y() == 2);
  CHECK(ab.n_v() == 2);
  const IqcBlock a0 = combine({a, b}, {0.0, 1.0});
  CHECK(a0.M_g.topLeftCorner(2, 2).isZero(0.0));
  CHECK_THROWS_AS(combine({a, b}, {1.0}), ValidationError);
  CHECK_THROWS_AS(combine({a}, {-1.0}), ValidationError);
  CHECK_THROWS_AS(combine({}, {}), ValidationError);
}

TEST_CASE("hard IQC integrals stay nonnegative on sampled trajectories") {
  std::mt19937_64 rng(30);
  const double T = 20.0, h = 1e-3, tol = 1e-6 * T;
  for (auto kind : {NonlinearKind::SinMinusArg, NonlinearKind::ArgMinusSin}) {
    for (double domain : {std::numbers::pi / 3.0, std::numbers::pi / 2.0}) {
      NonlinearChannel ch;
      ch.kind = kind;
      ch.domain = domain;
      const auto [lo, hi] = ch.slope_sector();
      for (int trial = 0; trial < 3; ++trial) {
        const Signal y = random_scalar_signal(rng, domain);
        const Signal v = [&, y](double t) { return Vector::Constant(1, ch.phi(y(t)(0))); };
        const IqcBlock s = sector_iqc(lo, hi);
        CHECK(min_running_integral(s, s.M_g, y, v, T, h) >= -tol);
        for (double pole : {0.3, 1.0, 5.0}) {
          const IqcBlock z = zames_falb_iqc(lo, hi, pole);
          for (size_t p = 0; p < z.parts.size(); ++p)
            CHECK(min_running_integral(z, part_matrix(z, p), y, v, T, h) >= -tol);
        }
      }
    }
  }
}

TEST_CASE("hard IQC: l2 gain block and combinations") {
  std::mt19937_64 rng(31);
  const double T = 10.0, h = 1e-3, tol = 1e-6 * T;
  for (int trial = 0; trial < 5; ++trial) {
    const double g = unif(rng, 0.2, 2.0), k = unif(rng, -g, g);
    const Signal y = random_scalar_signal(rng, 1.0);
    const Signal v = [=](double t) { return Vector(k * y(t)); };
    const IqcBlock b = l2_gain_iqc(g, 1, 1, unif(rng, 0.1, 3.0));
    CHECK(min_running_integral(b, b.M_g, y, v, T, h) >= -tol);

    // Two slope-restricted channels with independent nonnegative weights.
    NonlinearChannel c1, c2;
    c1.kind = NonlinearKind::SinMinusArg;
    c2.kind = NonlinearKind::ArgMinusSin;
    c1.domain = c2.domain = std::numbers::pi / 3.0;
    const auto [l1, h1] = c1.slope_sector();
    const auto [l2, h2] = c2.slope_sector();
    const IqcBlock z1 = zames_falb_iqc(l1, h1, 1.0), z2 = zames_falb_iqc(l2, h2, 2.0);
    const IqcBlock both = combine({z1, z2}, {unif(rng, 0, 2), unif(rng, 0, 2)});
    const Signal y1 = random_scalar_signal(rng, c1.domain), y2 = random_scalar_signal(rng, c2.domain);
    const Signal yy = [=](double t) { return Vector(Eigen::Vector2d(y1(t)(0), y2(t)(0))); };
    const Signal vv = [=](double t) { return Vector(Eigen::Vector2d(c1.phi(y1(t)(0)), c2.phi(y2(t)(0)))); };
    // Each part carries its own weight in the certifier; check them one at a time.
    for (size_t p = 0; p < both.parts.size(); ++p)
      CHECK(min_running_integral(both, part_matrix(both, p), yy, vv, T, h) >= -tol);
  }
}

TEST_CASE("identity block is inert") {
  const IqcBlock b = identity_iqc(3, 2);
  CHECK(b.n_psi() == 0);
  CHECK(b.n_y() == 3);
  CHECK(b.n_v() == 2);
  CHECK(b.M_g.isZero(0.0));
}
