#pragma once

#include "iqccert/linalg.hpp"
#include "iqccert/system_model.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace iqccert {

using Controller = std::function<Vector(const Vector&)>;

/// x' = A x + B u + g(x), y = C x, stage cost r = x^T Q x + u^T R u.
struct Dynamics {
  Matrix A, B, C;
  NonlinearBlock nonlinear;
  Matrix Q, R;

  int n_s() const { return static_cast<int>(A.rows()); }
  int n_a() const { return static_cast<int>(B.cols()); }
  Vector f(const Vector& x, const Vector& u) const;
  void validate() const;
};

/// Samples on a uniform grid; row k is time k*h.
struct Trajectory {
  Vector times;
  Matrix x, u, e, y;
  Vector r;
  bool diverged = false;
  int steps() const { return static_cast<int>(times.size()); }
};

struct IntegrateOptions {
  double divergence = 1e6;  // ||x||_inf threshold
  int control_every = 1;    // controller re-evaluated every k steps (zero-order hold)
};

/// Classical RK4 with zero-order-hold control u_k = pi(y_k) + e_k. `e` is
/// either empty (no exploration) or has one row per grid point.
Trajectory integrate(const Dynamics& dyn, const Controller& pi, const Matrix& e, const Vector& x0, double horizon,
                     double h, const IntegrateOptions& opt = {});

/// Seeded Gaussian noise through a first-order low-pass (cutoff in rad/s),
/// scaled to stationary standard deviation `std`. One row per grid point.
Matrix lowpass_noise(int n, int samples, double h, double std, double cutoff, std::uint64_t seed);

/// Trapezoidal sqrt(int |v|^2 dt) over rows of v.
double l2_norm(const Matrix& v, double h);

struct GainEstimate {
  double gain = 0.0;
  std::vector<double> ratios;
  int skipped = 0;
  bool any_diverged = false;
};

/// max over excitations of ||y||_2 / ||e||_2 from x0 = 0. Zero-energy
/// excitations are skipped (counted); if none remain, throws ValidationError.
GainEstimate empirical_l2_gain(const Dynamics& dyn, const Controller& pi, const std::vector<Matrix>& excitations,
                               double horizon, double h);

}  // namespace iqccert
