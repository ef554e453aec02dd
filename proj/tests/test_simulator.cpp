#include "iqccert/benchmarks.hpp"
#include "iqccert/simulator.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace iqccert;
using namespace testutil;

namespace {

Dynamics scalar_dyn(double a) {
  Dynamics d;
  d.A = Matrix::Constant(1, 1, a);
  d.B = Matrix::Ones(1, 1);
  d.C = Matrix::Ones(1, 1);
  d.Q = Matrix::Ones(1, 1);
  d.R = Matrix::Ones(1, 1);
  return d;
}

const Controller zero1 = [](const Vector&) { return Vector::Zero(1); };

}  // namespace

TEST_CASE("integrate: exponential decay accuracy and fourth-order convergence") {
  const Dynamics d = scalar_dyn(-1.0);
  const auto tr = integrate(d, zero1, Matrix(), Vector::Ones(1), 1.0, 1e-3);
  CHECK(std::abs(tr.x(tr.steps() - 1, 0) - std::exp(-1.0)) < 1e-9);
  CHECK(tr.times(tr.steps() - 1) == doctest::Approx(1.0));

  const auto err = [&](double h) {
    const auto t = integrate(d, zero1, Matrix(), Vector::Ones(1), 1.0, h);
    return std::abs(t.x(t.steps() - 1, 0) - std::exp(-1.0));
  };
  const double ratio = err(0.1) / err(0.05);
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("integrate: equilibrium stays put on both benchmarks") {
  for (const char* name : {"flight4", "power_swing"}) {
    const Benchmark bm = preset(name);
    const Dynamics d = bm.dynamics();
    const Controller z = [&](const Vector&) { return Vector::Zero(d.n_a()); };
    const auto tr = integrate(d, z, Matrix(), Vector::Zero(d.n_s()), 2.0, 1e-3);
    CHECK(tr.x.cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(tr.diverged);
  }
}

TEST_CASE("integrate: zero-order hold and exploration input") {
  const Dynamics d = scalar_dyn(0.0);
  int calls = 0;
  const Controller count = [&](const Vector&) {
    ++calls;
    return Vector::Ones(1);
  };
  IntegrateOptions opt;
  opt.control_every = 10;
  const auto tr = integrate(d, count, Matrix(), Vector::Zero(1), 1.0, 0.01, opt);
  CHECK(calls == 11);
  CHECK(tr.x(tr.steps() - 1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  // x' = u + e with e = 1 doubles the slope
  const auto tr2 = integrate(d, count, Matrix::Ones(101, 1), Vector::Zero(1), 1.0, 0.01, opt);
  CHECK(tr2.x(tr2.steps() - 1, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(tr2.e(5, 0) == 1.0);
  CHECK(tr2.r(0) == doctest::Approx(4.0));  // x = 0, u = 2
}

TEST_CASE("integrate: divergence is reported and the trajectory truncated") {
  const Dynamics d = scalar_dyn(5.0);
  const auto tr = integrate(d, zero1, Matrix(), Vector::Ones(1), 10.0, 1e-2);
  CHECK(tr.diverged);
  CHECK(tr.steps() < 1001);
  CHECK(tr.x.rows() == tr.steps());
}

TEST_CASE("integrate: argument validation") {
  const Dynamics d = scalar_dyn(-1.0);
  CHECK_THROWS_AS(integrate(d, zero1, Matrix(), Vector::Ones(2), 1.0, 1e-2), ValidationError);
  CHECK_THROWS_AS(integrate(d, zero1, Matrix(), Vector::Ones(1), 1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(integrate(d, zero1, Matrix::Ones(3, 1), Vector::Ones(1), 1.0, 1e-2), ValidationError);
  const Controller bad = [](const Vector&) { return Vector::Zero(2); };
  CHECK_THROWS_AS(integrate(d, bad, Matrix(), Vector::Ones(1), 1.0, 1e-2), ValidationError);
}

TEST_CASE("l2 norm of a decaying exponential") {
  const double h = 1e-3, T = 3.0;
  const int K = static_cast<int>(std::llround(T / h)) + 1;
  Matrix v(K, 1);
  for (int k = 0; k < K; ++k) v(k, 0) = std::exp(-k * h);
  const double exact = std::sqrt((1.0 - std::exp(-2.0 * T)) / 2.0);
  CHECK(std::abs(l2_norm(v, h) - exact) <= 1e-3 * exact);
  CHECK(l2_norm(Matrix::Zero(K, 2), h) == 0.0);
}

TEST_CASE("empirical gain: first-order lag") {
  const Dynamics d = scalar_dyn(-1.0);
  const double h = 1e-3;
  const auto sine = [&](double w, double T) {
    const int K = static_cast<int>(std::llround(T / h)) + 1;
    Matrix e(K, 1);
    for (int k = 0; k < K; ++k) e(k, 0) = std::sin(w * k * h);
    return e;
  };
  const auto slow = empirical_l2_gain(d, zero1, {sine(0.05, 200.0)}, 200.0, h);
  CHECK(slow.gain <= 1.0);
  CHECK(slow.gain >= 0.95);
  const auto fast = empirical_l2_gain(d, zero1, {sine(2.0, 50.0)}, 50.0, h);
  CHECK(fast.gain <= 1.0 / std::sqrt(5.0) + 0.02);
  CHECK(fast.gain >= 1.0 / std::sqrt(5.0) - 0.05);
}

TEST_CASE("empirical gain: zero-energy excitations are skipped or rejected") {
  const Dynamics d = scalar_dyn(-1.0);
  const Matrix z = Matrix::Zero(1001, 1);
  CHECK_THROWS_AS(empirical_l2_gain(d, zero1, {z}, 1.0, 1e-3), ValidationError);
  const auto g = empirical_l2_gain(d, zero1, {z, Matrix::Ones(1001, 1)}, 1.0, 1e-3);
  CHECK(g.skipped == 1);
  CHECK(g.ratios.size() == 1);
}

TEST_CASE("lowpass noise is seeded and has roughly the requested spread") {
  const Matrix a = lowpass_noise(2, 20000, 1e-2, 0.5, 1.0, 7), b = lowpass_noise(2, 20000, 1e-2, 0.5, 1.0, 7);
  CHECK(a == b);
  CHECK(a != lowpass_noise(2, 20000, 1e-2, 0.5, 1.0, 8));
  const double sd = std::sqrt(a.col(0).squaredNorm() / a.rows());
  CHECK(sd > 0.35);
  CHECK(sd < 0.65);
}

TEST_CASE("flight benchmark structure") {
  const Benchmark fl = build_flight();
  CHECK(fl.open_loop.n_s() == 15);
  CHECK(fl.open_loop.n_a() == 4);
  CHECK(fl.nonlinear.size() == 4);
  CHECK(is_hurwitz(fl.plant.A));
  CHECK(fl.obs_mask.rowwise().sum().minCoeff() >= 1.0);
  // Each spacing state is the difference of two vertical speeds.
  for (int j = 0; j < 15; ++j)
    if (fl.state_names[static_cast<size_t>(j)].rfind("dz", 0) == 0) CHECK(fl.open_loop.A.row(j).sum() == 0.0);
  CHECK_THROWS_AS(build_flight(1), ValidationError);
}

TEST_CASE("power benchmark structure") {
  const Benchmark pw = build_power();
  CHECK(pw.open_loop.n_s() == 20);
  CHECK(pw.open_loop.n_a() == 10);
  CHECK(pw.nonlinear.size() == 14);
  CHECK(is_hurwitz(pw.plant.A));
  // A uniform angle shift is an equilibrium direction of the raw network.
  Vector shift = Vector::Zero(20);
  shift.head(10).setOnes();
  CHECK((pw.open_loop.A * shift).norm() < 1e-12);
  // Line residuals are slope restricted to [0, 1 - cos(pi/3)].
  const auto [lo, hi] = pw.nonlinear.channels[0].slope_sector();
  CHECK(lo == doctest::Approx(0.0));
  CHECK(hi == doctest::Approx(0.5));
  // Star: the hub sees everything, the others see themselves and the hub.
  CHECK(pw.obs_mask.row(9).sum() == 20.0);
  CHECK(pw.obs_mask.row(0).sum() == 4.0);

  PowerParams p = default_power_params();
  p.lines = {{0, 1, 1.0}};
  CHECK_THROWS_AS(build_power(p), ValidationError);
  p = default_power_params();
  p.topology = "mesh";
  CHECK_THROWS_AS(build_power(p), ValidationError);
  CHECK_THROWS_AS(preset("nope"), ValidationError);
}
