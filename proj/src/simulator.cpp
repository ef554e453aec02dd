#include "iqccert/simulator.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <random>

namespace iqccert {

Vector Dynamics::f(const Vector& x, const Vector& u) const {
  Vector dx = A * x + B * u;
  if (nonlinear.size() > 0) dx += nonlinear.eval(x);
  return dx;
}

void Dynamics::validate() const {
  linalg::require_square(A, "Dynamics.A");
  if (B.rows() != A.rows()) throw ValidationError("Dynamics: B row count must equal n_s");
  if (C.cols() != A.rows()) throw ValidationError("Dynamics: C column count must equal n_s");
  if (Q.rows() != A.rows() || Q.cols() != A.rows()) throw ValidationError("Dynamics: Q must be n_s x n_s");
  if (R.rows() != B.cols() || R.cols() != B.cols()) throw ValidationError("Dynamics: R must be n_a x n_a");
}

Trajectory integrate(const Dynamics& dyn, const Controller& pi, const Matrix& e, const Vector& x0, double horizon,
                     double h, const IntegrateOptions& opt) {
  dyn.validate();
  if (!(h > 0.0) || !(horizon >= 0.0)) throw ValidationError("integrate: need h > 0 and horizon >= 0");
  if (x0.size() != dyn.n_s()) throw ValidationError("integrate: x0 has wrong length");
  if (opt.control_every < 1) throw ValidationError("integrate: control_every must be >= 1");
  const int steps = static_cast<int>(std::llround(horizon / h));
  const int K = steps + 1;
  if (e.size() != 0 && (e.rows() < K || e.cols() != dyn.n_a()))
    throw ValidationError("integrate: exploration must have one row per grid point and n_a columns");
  const int ns = dyn.n_s(), na = dyn.n_a(), no = static_cast<int>(dyn.C.rows());

  Trajectory tr;
  tr.times = Vector::LinSpaced(K, 0.0, h * steps);
  tr.x = Matrix::Zero(K, ns);
  tr.u = Matrix::Zero(K, na);
  tr.e = Matrix::Zero(K, na);
  tr.y = Matrix::Zero(K, no);
  tr.r = Vector::Zero(K);

  // Channel maps gathered once: g(x) = In * phi(Arg * x).
  const int nc = dyn.nonlinear.size();
  const Matrix Arg = nc > 0 ? dyn.nonlinear.arg_matrix(ns) : Matrix();
  const Matrix In = nc > 0 ? dyn.nonlinear.input_matrix(ns) : Matrix();
  Vector phi(nc);
  const auto f = [&](const Vector& xs, const Vector& us) {
    Vector dx = dyn.A * xs + dyn.B * us;
    if (nc > 0) {
      const Vector a = Arg * xs;
      for (int c = 0; c < nc; ++c) phi(c) = dyn.nonlinear.channels[static_cast<size_t>(c)].phi(a(c));
      dx.noalias() += In * phi;
    }
    return dx;
  };

  Vector x = x0;
  Vector u_hold = Vector::Zero(na);
  int k = 0;
  for (; k < K; ++k) {
    const Vector y = dyn.C * x;
    const Vector ek = e.size() != 0 ? Vector(e.row(k).transpose()) : Vector::Zero(na);
    if (k % opt.control_every == 0) {
      u_hold = pi(y);
      if (u_hold.size() != na) throw ValidationError("integrate: controller returned wrong action size");
    }
    const Vector u = u_hold + ek;
    tr.x.row(k) = x.transpose();
    tr.y.row(k) = y.transpose();
    tr.u.row(k) = u.transpose();
    tr.e.row(k) = ek.transpose();
    tr.r(k) = x.dot(dyn.Q * x) + u.dot(dyn.R * u);
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > opt.divergence) {
      tr.diverged = true;
      break;
    }
    if (k == K - 1) break;
    const Vector k1 = f(x, u);
    const Vector k2 = f(x + 0.5 * h * k1, u);
    const Vector k3 = f(x + 0.5 * h * k2, u);
    const Vector k4 = f(x + h * k3, u);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (tr.diverged) {
    const int kept = k + 1;
    tr.times.conservativeResize(kept);
    tr.x.conservativeResize(kept, Eigen::NoChange);
    tr.u.conservativeResize(kept, Eigen::NoChange);
    tr.e.conservativeResize(kept, Eigen::NoChange);
    tr.y.conservativeResize(kept, Eigen::NoChange);
    tr.r.conservativeResize(kept);
  }
  return tr;
}

Matrix lowpass_noise(int n, int samples, double h, double std, double cutoff, std::uint64_t seed) {
  if (n < 0 || samples < 0 || !(h > 0.0) || !(std >= 0.0) || !(cutoff > 0.0))
    throw ValidationError("lowpass_noise: invalid arguments");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Exact discretization of de = -c e dt + dW; stationary variance (1 - a^2)^{-1} b^2.
  const double a = std::exp(-cutoff * h);
  const double b = std::sqrt(1.0 - a * a);
  Matrix out(samples, n);
  Vector state(n);
  for (int j = 0; j < n; ++j) state(j) = gauss(rng);
  for (int k = 0; k < samples; ++k) {
    out.row(k) = std * state.transpose();
    for (int j = 0; j < n; ++j) state(j) = a * state(j) + b * gauss(rng);
  }
  return out;
}

double l2_norm(const Matrix& v, double h) {
  if (v.rows() < 2) return 0.0;
  const Vector sq = v.rowwise().squaredNorm();
  const double inner = sq.segment(1, sq.size() - 2).sum();
  return std::sqrt(h * (inner + 0.5 * (sq(0) + sq(sq.size() - 1))));
}

GainEstimate empirical_l2_gain(const Dynamics& dyn, const Controller& pi, const std::vector<Matrix>& excitations,
                               double horizon, double h) {
  GainEstimate g;
  const Vector x0 = Vector::Zero(dyn.n_s());
  for (const auto& e : excitations) {
    const double en = l2_norm(e, h);
    if (!(en > 0.0)) {
      ++g.skipped;
      std::cerr << "warning: skipping zero-energy excitation\n";
      continue;
    }
    const Trajectory tr = integrate(dyn, pi, e, x0, horizon, h);
    g.any_diverged = g.any_diverged || tr.diverged;
    // Energy of the applied excitation over the simulated window.
    const double ratio = tr.diverged ? std::numeric_limits<double>::infinity() : l2_norm(tr.y, h) / l2_norm(tr.e, h);
    g.ratios.push_back(ratio);
    g.gain = std::max(g.gain, ratio);
  }
  if (g.ratios.empty()) throw ValidationError("empirical_l2_gain: every excitation has zero energy");
  return g;
}

}  // namespace iqccert
