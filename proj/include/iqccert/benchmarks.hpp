#pragma once

#include "iqccert/certifier.hpp"
#include "iqccert/iqc_blocks.hpp"
#include "iqccert/simulator.hpp"
#include "iqccert/system_model.hpp"

#include <string>
#include <tuple>
#include <vector>

namespace iqccert {

struct FlightParams {
  double alpha = 90.62;
  double beta = -42.15;
  double gamma = -13.22;
  double delta = 0.1;
  double distance = 1.0;        // target spacing d (states are deviations from it)
  double residual_scale = 1.0;  // multiplier on sin(theta) - theta in the theta'' row
  double cost_q = 1000.0;       // reward: Q = cost_q I, R = cost_r I
  double cost_r = 1.0;
  double nominal_q_distance = 7.0;  // LQR weight on relative-distance states
  double nominal_q_other = 10.0;    // LQR weight on the remaining states
  double nominal_r = 1.0;
  double zf_pole = 1.0;
};

struct PowerLine {
  int i;
  int j;
  double b;  // susceptance (p.u.)
};

struct PowerParams {
  std::vector<double> inertia;  // m_i
  std::vector<double> damping;  // d_i
  std::vector<PowerLine> lines;
  std::string topology = "star";  // communication pattern
  int hub = -1;                   // star hub (default: last generator)
  double theta_bar = 1.0471975511965976;  // pi/3
  double cost_q = 1000.0;
  double cost_r = 1.0;
  double nominal_q = 100.0;
  double nominal_r = 1.0;
  double zf_pole = 1.0;
};

/// Bundled 10-generator network (not the 39-bus data set).
PowerParams default_power_params();

struct Benchmark {
  std::string id;
  LtiSystem open_loop;     // raw (A, B)
  Matrix K_nominal;        // u = K x
  LtiSystem plant;         // (A + B K, B)
  NonlinearBlock nonlinear;
  Matrix cost_Q, cost_R;   // reward weights
  Matrix obs_mask;         // n_a x n_s, 1 = agent observes state
  double zf_pole = 1.0;
  std::vector<std::string> state_names;

  Dynamics dynamics() const;          // closed nominal loop plus residuals
  IqcBlock filter(bool dynamic = true) const;  // one multiplier per channel
  CertSetup cert_setup(bool dynamic = true) const;
  BoundsFactory bounds_factory(const std::vector<std::vector<std::string>>& pattern = {}, double eps = 0.1) const;
};

Benchmark build_flight(int n_agents = 4, const FlightParams& p = {});
Benchmark build_power(int n_gen, const PowerParams& p);
Benchmark build_power(const PowerParams& p = default_power_params());

/// Named presets: "flight4", "power_swing".
Benchmark preset(const std::string& name);

}  // namespace iqccert
