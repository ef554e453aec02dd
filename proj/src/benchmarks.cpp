#include "iqccert/benchmarks.hpp"

#include <cmath>
#include <numbers>
#include <queue>

namespace iqccert {

Dynamics Benchmark::dynamics() const {
  Dynamics d;
  d.A = plant.A;
  d.B = plant.B;
  d.C = Matrix::Identity(plant.n_s(), plant.n_s());
  d.nonlinear = nonlinear;
  d.Q = cost_Q;
  d.R = cost_R;
  return d;
}

IqcBlock Benchmark::filter(bool dynamic) const {
  std::vector<IqcBlock> blocks;
  for (const auto& ch : nonlinear.channels) {
    const auto [lo, hi] = ch.slope_sector();
    blocks.push_back(dynamic ? zames_falb_iqc(lo, hi, zf_pole) : sector_iqc(lo, hi));
  }
  return combine(blocks, std::vector<double>(blocks.size(), 1.0));
}

CertSetup Benchmark::cert_setup(bool dynamic) const {
  CertSetup s;
  s.plant = plant;
  s.nonlinear = nonlinear;
  if (nonlinear.size() > 0) s.filter = filter(dynamic);
  return s;
}

BoundsFactory Benchmark::bounds_factory(const std::vector<std::vector<std::string>>& pattern, double eps) const {
  BoundsFactory f;
  f.n_a = plant.n_a();
  f.n_s = plant.n_s();
  f.mask = obs_mask;
  f.pattern = pattern;
  f.eps = eps;
  return f;
}

Benchmark build_flight(int n_agents, const FlightParams& p) {
  if (n_agents < 2) throw ValidationError("build_flight: need at least two aircraft");
  if (!(p.delta > 0.0)) throw ValidationError("build_flight: delta must be > 0");
  const int ns = 4 * (n_agents - 1) + 3;
  std::vector<int> base(static_cast<size_t>(n_agents));  // index of z-dot for each aircraft
  for (int i = 0; i < n_agents; ++i) base[static_cast<size_t>(i)] = i < n_agents - 1 ? 4 * i + 1 : 4 * i;
  Matrix A = Matrix::Zero(ns, ns);
  Matrix B = Matrix::Zero(ns, n_agents);
  Benchmark bm;
  bm.id = "flight" + std::to_string(n_agents);
  bm.state_names.resize(static_cast<size_t>(ns));
  for (int i = 0; i < n_agents; ++i) {
    const int b = base[static_cast<size_t>(i)];
    const std::string tag = std::to_string(i + 1);
    if (i < n_agents - 1) {
      const int dist = b - 1;
      A(dist, b) = 1.0;
      A(dist, base[static_cast<size_t>(i + 1)]) = -1.0;
      bm.state_names[static_cast<size_t>(dist)] = "dz" + tag;
    }
    A(b, b) = p.alpha;
    A(b, b + 1) = p.beta;
    A(b, b + 2) = p.gamma;
    A(b + 1, b + 2) = 1.0;
    A(b + 2, b) = p.alpha / p.delta;
    A(b + 2, b + 1) = (p.beta + 1.0) / p.delta;
    A(b + 2, b + 2) = p.gamma / p.delta;
    B(b, i) = 1.0;
    B(b + 2, i) = 1.0 / p.delta;
    bm.state_names[static_cast<size_t>(b)] = "zdot" + tag;
    bm.state_names[static_cast<size_t>(b + 1)] = "theta" + tag;
    bm.state_names[static_cast<size_t>(b + 2)] = "thetadot" + tag;

    NonlinearChannel ch;
    ch.kind = NonlinearKind::SinMinusArg;
    ch.arg = Vector::Zero(ns);
    ch.arg(b + 1) = 1.0;
    ch.input = Vector::Zero(ns);
    ch.input(b + 2) = p.residual_scale;
    ch.domain = std::numbers::pi / 2.0;
    bm.nonlinear.channels.push_back(ch);
  }
  bm.open_loop = LtiSystem(A, B);

  // Agent i sees the spacing to its neighbours.
  bm.obs_mask = Matrix::Zero(n_agents, ns);
  for (int i = 0; i < n_agents; ++i) {
    if (i > 0) bm.obs_mask(i, base[static_cast<size_t>(i - 1)] - 1) = 1.0;
    if (i < n_agents - 1) bm.obs_mask(i, base[static_cast<size_t>(i)] - 1) = 1.0;
  }

  Vector qdiag = Vector::Constant(ns, p.nominal_q_other);
  for (int i = 0; i < n_agents - 1; ++i) qdiag(base[static_cast<size_t>(i)] - 1) = p.nominal_q_distance;
  bm.K_nominal = nominal_controller(bm.open_loop, NominalMethod::Lqr, qdiag.asDiagonal().toDenseMatrix(),
                                    p.nominal_r * Matrix::Identity(n_agents, n_agents));
  bm.plant = LtiSystem(A + B * bm.K_nominal, B);
  bm.cost_Q = p.cost_q * Matrix::Identity(ns, ns);
  bm.cost_R = p.cost_r * Matrix::Identity(n_agents, n_agents);
  bm.zf_pole = p.zf_pole;
  return bm;
}

PowerParams default_power_params() {
  PowerParams p;
  p.inertia = {4.2, 3.0, 3.6, 2.8, 3.2, 4.6, 2.6, 3.4, 2.9, 5.0};
  p.damping = {1.8, 1.2, 1.5, 1.1, 1.3, 2.0, 1.0, 1.4, 1.2, 2.2};
  // Ring with four chords.
  p.lines = {{0, 1, 1.9}, {1, 2, 2.3}, {2, 3, 1.6}, {3, 4, 2.1}, {4, 5, 1.8}, {5, 6, 2.4}, {6, 7, 1.5},
             {7, 8, 2.0}, {8, 9, 1.7}, {9, 0, 2.2}, {0, 5, 1.2}, {2, 7, 1.4}, {3, 9, 1.3}, {1, 6, 1.1}};
  return p;
}

namespace {

void require_connected(int n, const std::vector<PowerLine>& lines) {
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (const auto& l : lines) {
    adj[static_cast<size_t>(l.i)].push_back(l.j);
    adj[static_cast<size_t>(l.j)].push_back(l.i);
  }
  std::vector<bool> seen(static_cast<size_t>(n), false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int count = 1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : adj[static_cast<size_t>(v)])
      if (!seen[static_cast<size_t>(w)]) {
        seen[static_cast<size_t>(w)] = true;
        ++count;
        q.push(w);
      }
  }
  if (count != n) throw ValidationError("build_power: network topology is disconnected");
}

}  // namespace

Benchmark build_power(int n, const PowerParams& p) {
  if (n < 2) throw ValidationError("build_power: need at least two generators");
  if (static_cast<int>(p.inertia.size()) != n || static_cast<int>(p.damping.size()) != n)
    throw ValidationError("build_power: inertia/damping must have one entry per generator");
  for (int i = 0; i < n; ++i)
    if (!(p.inertia[static_cast<size_t>(i)] > 0.0) || !(p.damping[static_cast<size_t>(i)] > 0.0))
      throw ValidationError("build_power: inertias and dampings must be positive");
  if (!(p.theta_bar > 0.0 && p.theta_bar <= std::numbers::pi)) throw ValidationError("build_power: theta_bar in (0, pi]");
  for (const auto& l : p.lines)
    if (l.i < 0 || l.j < 0 || l.i >= n || l.j >= n || l.i == l.j || !(l.b > 0.0))
      throw ValidationError("build_power: invalid line");
  require_connected(n, p.lines);

  Matrix Lap = Matrix::Zero(n, n);
  for (const auto& l : p.lines) {
    Lap(l.i, l.i) += l.b;
    Lap(l.j, l.j) += l.b;
    Lap(l.i, l.j) -= l.b;
    Lap(l.j, l.i) -= l.b;
  }
  Vector minv(n), d(n);
  for (int i = 0; i < n; ++i) {
    minv(i) = 1.0 / p.inertia[static_cast<size_t>(i)];
    d(i) = p.damping[static_cast<size_t>(i)];
  }
  const int ns = 2 * n;
  Matrix A = Matrix::Zero(ns, ns);
  A.topRightCorner(n, n) = Matrix::Identity(n, n);
  A.bottomLeftCorner(n, n) = -(minv.asDiagonal() * Lap);
  A.bottomRightCorner(n, n) = Matrix((-minv.cwiseProduct(d)).asDiagonal());
  Matrix B = Matrix::Zero(ns, n);
  B.bottomRows(n) = minv.asDiagonal().toDenseMatrix();

  Benchmark bm;
  bm.id = "power" + std::to_string(n);
  bm.open_loop = LtiSystem(A, B);
  for (int i = 0; i < n; ++i) bm.state_names.push_back("theta" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) bm.state_names.push_back("omega" + std::to_string(i + 1));
  for (const auto& l : p.lines) {
    NonlinearChannel ch;
    ch.kind = NonlinearKind::ArgMinusSin;
    ch.arg = Vector::Zero(ns);
    ch.arg(l.i) = 1.0;
    ch.arg(l.j) = -1.0;
    ch.input = Vector::Zero(ns);
    ch.input(n + l.i) = l.b * minv(l.i);
    ch.input(n + l.j) = -l.b * minv(l.j);
    ch.domain = p.theta_bar;
    bm.nonlinear.channels.push_back(ch);
  }

  bm.obs_mask = Matrix::Zero(n, ns);
  if (p.topology == "star") {
    const int hub = p.hub < 0 ? n - 1 : p.hub;
    if (hub >= n) throw ValidationError("build_power: hub index out of range");
    for (int i = 0; i < n; ++i) {
      if (i == hub) {
        bm.obs_mask.row(i).setOnes();
        continue;
      }
      for (int g : {i, hub}) {
        bm.obs_mask(i, g) = 1.0;
        bm.obs_mask(i, n + g) = 1.0;
      }
    }
  } else if (p.topology == "decentralized") {
    for (int i = 0; i < n; ++i) {
      bm.obs_mask(i, i) = 1.0;
      bm.obs_mask(i, n + i) = 1.0;
    }
  } else if (p.topology == "full") {
    bm.obs_mask.setOnes();
  } else {
    throw ValidationError("build_power: unknown communication topology '" + p.topology + "'");
  }

  bm.K_nominal = nominal_controller(bm.open_loop, NominalMethod::Lqr, p.nominal_q * Matrix::Identity(ns, ns),
                                    p.nominal_r * Matrix::Identity(n, n));
  bm.plant = LtiSystem(A + B * bm.K_nominal, B);
  bm.cost_Q = p.cost_q * Matrix::Identity(ns, ns);
  bm.cost_R = p.cost_r * Matrix::Identity(n, n);
  bm.zf_pole = p.zf_pole;
  return bm;
}

Benchmark build_power(const PowerParams& p) { return build_power(static_cast<int>(p.inertia.size()), p); }

Benchmark preset(const std::string& name) {
  if (name == "flight4") return build_flight(4);
  if (name == "power_swing" || name == "power10") return build_power();
  throw ValidationError("unknown preset '" + name + "'");
}

}  // namespace iqccert
