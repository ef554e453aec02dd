#include "iqccert/learner.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <numbers>
#include <random>

namespace iqccert {

RegulationMode parse_regulation(const std::string& s) {
  if (s == "none") return RegulationMode::None;
  if (s == "soft" || s == "soft_penalty") return RegulationMode::SoftPenalty;
  if (s == "ht" || s == "hard_threshold") return RegulationMode::HardThreshold;
  throw ValidationError("unknown regulation mode '" + s + "' (expected none, soft_penalty or hard_threshold)");
}

std::string to_string(RegulationMode m) {
  switch (m) {
    case RegulationMode::None: return "none";
    case RegulationMode::SoftPenalty: return "soft_penalty";
    case RegulationMode::HardThreshold: return "hard_threshold";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (!(discount > 0.0 && discount <= 1.0)) throw ValidationError("train: discount must be in (0, 1]");
  if (!(horizon > 0.0) || !(h > 0.0) || control_every < 1) throw ValidationError("train: invalid time grid");
  if (rollouts < 1 || iterations < 0) throw ValidationError("train: rollouts >= 1 and iterations >= 0 required");
  if (!(l_cert > 0.0)) throw ValidationError("train: l_cert must be positive");
  if (!(delta_kl >= 0.0) || !(damping >= 0.0)) throw ValidationError("train: delta_kl and damping must be >= 0");
  if (!(std0 > 0.0) || !(std_floor > 0.0) || !(std_decay > 0.0 && std_decay <= 1.0))
    throw ValidationError("train: exploration std schedule must be positive");
  if (!(penalty_fraction >= 0.0)) throw ValidationError("train: penalty_fraction must be >= 0");
  if (!std::isfinite(w1) || !std::isfinite(w2)) throw ValidationError("train: penalty weights must be finite");
  if (monitor_window < 1 || monitor_stride < 1 || backtrack < 1 || cg_iters < 1)
    throw ValidationError("train: window, stride, backtrack and cg_iters must be >= 1");
}

double TrainConfig::exploration_std(int iter) const { return std::max(std_floor, std0 * std::pow(std_decay, iter)); }

void RolloutBatch::validate() const {
  const int n = size();
  if (u.rows() != n || logprob.size() != n || reward.size() != n)
    throw ValidationError("RolloutBatch: inconsistent sample counts");
  if (!(std > 0.0)) throw ValidationError("RolloutBatch: exploration std must be positive");
  if (advantage.size() == n && !linalg::all_finite(advantage)) throw ValidationError("RolloutBatch: non-finite advantage");
}

double gaussian_logprob(const Vector& u, const Vector& mean, double std) {
  if (!(std > 0.0)) throw ValidationError("gaussian_logprob: std must be positive");
  const double n = static_cast<double>(u.size());
  return -(u - mean).squaredNorm() / (2.0 * std * std) - n * std::log(std) - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

Vector reward_to_go(const Vector& rewards, double rho) {
  Vector g(rewards.size());
  double acc = 0.0;
  for (Eigen::Index t = rewards.size() - 1; t >= 0; --t) {
    acc = rewards(t) + rho * acc;
    g(t) = acc;
  }
  return g;
}

Matrix baseline_features(const Matrix& x, const Vector& t) {
  if (x.rows() != t.size()) throw ValidationError("baseline_features: size mismatch");
  Matrix phi(x.rows(), 2 * x.cols() + 3);
  phi << x, x.array().square().matrix(), t, t.array().square().matrix(), Vector::Ones(x.rows());
  return phi;
}

Vector fit_linear_baseline(const Matrix& phi, const Vector& returns, double ridge) {
  if (phi.rows() != returns.size()) throw ValidationError("fit_linear_baseline: size mismatch");
  Matrix g = phi.transpose() * phi;
  g.diagonal().array() += ridge * std::max(1.0, g.diagonal().maxCoeff());
  return g.ldlt().solve(phi.transpose() * returns);
}

void compute_advantages(RolloutBatch& b, double rho) {
  const int n = b.size();
  b.returns = Vector::Zero(n);
  for (size_t e = 0; e < b.episode_start.size(); ++e) {
    const int s = b.episode_start[e];
    const int end = e + 1 < b.episode_start.size() ? b.episode_start[e + 1] : n;
    b.returns.segment(s, end - s) = reward_to_go(b.reward.segment(s, end - s), rho);
  }
  const Vector t = b.time.size() == n ? b.time : Vector::Zero(n);
  const Matrix phi = baseline_features(b.x, t);
  b.advantage = b.returns - phi * fit_linear_baseline(phi, b.returns);
}

double surrogate_loss(const RolloutBatch& b, const PolicyNet& net, const PolicyNet& net_old) {
  b.validate();
  double s = 0.0;
  for (int t = 0; t < b.size(); ++t) {
    const Vector x = b.x.row(t).transpose();
    const Vector u = b.u.row(t).transpose();
    const double lr = gaussian_logprob(u, net.forward(x), b.std) - gaussian_logprob(u, net_old.forward(x), b.std);
    s += std::exp(lr) * b.advantage(t);
  }
  return s;
}

Vector surrogate_gradient(const RolloutBatch& b, const PolicyNet& net) {
  Vector g = Vector::Zero(net.n_params());
  const double inv_var = 1.0 / (b.std * b.std);
  for (int t = 0; t < b.size(); ++t) {
    const Vector x = b.x.row(t).transpose();
    const Vector r = (b.u.row(t).transpose() - net.forward(x)) * inv_var;
    g += b.advantage(t) * net.vjp(x, r);
  }
  return g;
}

namespace {

double param_grad_sq(const PolicyNet& net, const Vector& x) {
  double s = 0.0;
  for (int i = 0; i < net.n_out(); ++i) s += net.vjp(x, Vector::Unit(net.n_out(), i)).squaredNorm();
  return s;
}

double smooth_value(const RolloutBatch& b, const PolicyNet& net, SmoothnessKind kind) {
  double s = 0.0;
  for (int t = 0; t < b.size(); ++t) {
    const Vector x = b.x.row(t).transpose();
    s += kind == SmoothnessKind::InputGradient ? net.input_grad_sq(x, nullptr) : param_grad_sq(net, x);
  }
  return s;
}

}  // namespace

Penalties smoothness_penalties(const RolloutBatch& b, const PolicyNet& net, SmoothnessKind kind) {
  if (b.size() == 0) throw ValidationError("smoothness_penalties: empty batch");
  Penalties p;
  for (int t = 0; t < b.size(); ++t) {
    if (!b.has_prev[static_cast<size_t>(t)]) continue;
    p.explore += (b.u_prev.row(t).transpose() - net.forward(b.x.row(t).transpose())).squaredNorm();
  }
  p.smooth = smooth_value(b, net, kind);
  return p;
}

std::pair<Vector, Vector> penalty_gradients(const RolloutBatch& b, const PolicyNet& net, SmoothnessKind kind) {
  const int np = net.n_params();
  Vector ge = Vector::Zero(np), gs = Vector::Zero(np);
  Vector tmp;
  for (int t = 0; t < b.size(); ++t) {
    const Vector x = b.x.row(t).transpose();
    if (b.has_prev[static_cast<size_t>(t)]) ge += net.vjp(x, -2.0 * (b.u_prev.row(t).transpose() - net.forward(x)));
    if (kind == SmoothnessKind::InputGradient) {
      net.input_grad_sq(x, &tmp);
      gs += tmp;
    }
  }
  if (kind == SmoothnessKind::ParameterGradient) {
    // Second derivatives in parameters by central differences.
    const Vector p0 = net.params();
    PolicyNet probe = net;
    for (int k = 0; k < np; ++k) {
      const double step = 1e-6 * std::max(1.0, std::abs(p0(k)));
      Vector p = p0;
      p(k) = p0(k) + step;
      probe.set_params(p);
      const double hi = smooth_value(b, probe, kind);
      p(k) = p0(k) - step;
      probe.set_params(p);
      const double lo = smooth_value(b, probe, kind);
      gs(k) = (hi - lo) / (2.0 * step);
    }
  }
  return {ge, gs};
}

double mean_kl(const RolloutBatch& b, const PolicyNet& a, const PolicyNet& c) {
  if (b.size() == 0) return 0.0;
  double s = 0.0;
  for (int t = 0; t < b.size(); ++t) {
    const Vector x = b.x.row(t).transpose();
    s += (a.forward(x) - c.forward(x)).squaredNorm();
  }
  return s / (2.0 * b.std * b.std * b.size());
}

CgResult conjugate_gradient(const LinearOp& A, const Vector& b, int max_iter, double tol) {
  CgResult res;
  res.x = Vector::Zero(b.size());
  const double bn = b.norm();
  if (bn == 0.0) {
    res.converged = true;
    return res;
  }
  Vector r = b, p = b;
  double rr = r.squaredNorm();
  for (int k = 0; k < max_iter; ++k) {
    const Vector Ap = A(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) break;
    const double alpha = rr / pAp;
    res.x += alpha * p;
    r -= alpha * Ap;
    const double rr_new = r.squaredNorm();
    res.iterations = k + 1;
    if (std::sqrt(rr_new) <= tol * bn) {
      res.converged = true;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return res;
}

LinearOp fisher_operator(const RolloutBatch& b, const PolicyNet& net) {
  // Stacked parameter Jacobians, one n_a-row block per sample.
  const int na = net.n_out(), np = net.n_params(), n = b.size();
  auto J = std::make_shared<Matrix>(static_cast<Eigen::Index>(n) * na, np);
  for (int t = 0; t < n; ++t) {
    const Vector x = b.x.row(t).transpose();
    for (int i = 0; i < na; ++i)
      J->row(static_cast<Eigen::Index>(t) * na + i) = net.vjp(x, Vector::Unit(na, i)).transpose();
  }
  const double scale = 1.0 / (b.std * b.std * std::max(1, n));
  return [J, scale](const Vector& d) { return Vector(scale * (J->transpose() * (*J * d))); };
}

Direction natural_direction(const LinearOp& fisher, const Vector& g, double delta_kl, double damping, int cg_iters,
                            double cg_tol) {
  Direction dir;
  dir.step = Vector::Zero(g.size());
  if (delta_kl == 0.0 || g.norm() == 0.0) return dir;
  const LinearOp damped = [&](const Vector& v) { return Vector(fisher(v) + damping * v); };
  CgResult cg = conjugate_gradient(damped, g, cg_iters, cg_tol);
  Vector d = cg.x;
  if (!cg.converged) {
    dir.cg_fallback = true;
    d = g;
  }
  const double quad = d.dot(fisher(d));
  if (!(quad > 0.0) || !std::isfinite(quad)) return dir;
  dir.step = std::sqrt(2.0 * delta_kl / quad) * d;
  return dir;
}

StepResult natural_step(const PolicyNet& net, const Vector& gradient, const RolloutBatch& batch,
                        const std::function<double(const PolicyNet&)>& objective, const TrainConfig& cfg) {
  StepResult res;
  res.net = net;
  const Direction dir =
      natural_direction(fisher_operator(batch, net), gradient, cfg.delta_kl, cfg.damping, cfg.cg_iters, cfg.cg_tol);
  res.cg_fallback = dir.cg_fallback;
  if (dir.step.norm() == 0.0) return res;
  const double j0 = objective(net);
  const Vector p0 = net.params();
  double frac = 1.0;
  for (int k = 0; k < cfg.backtrack; ++k, frac *= 0.5) {
    PolicyNet cand = net;
    cand.set_params(p0 + frac * dir.step);
    const double kl = mean_kl(batch, cand, net);
    const double gain = objective(cand) - j0;
    if (std::isfinite(gain) && gain > 0.0 && kl <= cfg.delta_kl) {
      res.net = std::move(cand);
      res.kl = kl;
      res.improvement = gain;
      res.backtracks = k;
      res.accepted = true;
      return res;
    }
  }
  res.backtracks = cfg.backtrack;
  return res;
}

RolloutBatch collect_rollouts(const Dynamics& dyn, const PolicyNet& net, const TrainConfig& cfg, int iter) {
  cfg.validate();
  const int na = dyn.n_a(), ns = dyn.n_s();
  if (net.n_in() != static_cast<int>(dyn.C.rows()) || net.n_out() != na)
    throw ValidationError("collect_rollouts: policy dimensions do not match the plant");
  const double sigma = cfg.exploration_std(iter);
  const int steps = static_cast<int>(std::llround(cfg.horizon / cfg.h));
  const int K = steps + 1;
  const int c = cfg.control_every;

  std::vector<Trajectory> trajs(static_cast<size_t>(cfg.rollouts));
  const Controller pi = [&net](const Vector& y) { return net.forward(y); };
  IntegrateOptions opt;
  opt.control_every = c;
#pragma omp parallel for schedule(static) if (cfg.parallel)
  for (int r = 0; r < cfg.rollouts; ++r) {
    std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(iter),
                      static_cast<std::uint64_t>(r)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector x0(ns);
    for (int j = 0; j < ns; ++j) x0(j) = cfg.x0_std * gauss(rng);
    Matrix e(K, na);
    for (int k = 0; k < K; k += c) {
      Vector draw(na);
      for (int i = 0; i < na; ++i) draw(i) = sigma * gauss(rng);
      for (int kk = k; kk < std::min(K, k + c); ++kk) e.row(kk) = draw.transpose();
    }
    trajs[static_cast<size_t>(r)] = integrate(dyn, pi, e, x0, cfg.horizon, cfg.h, opt);
  }

  RolloutBatch b;
  b.std = sigma;
  std::vector<Vector> xs, us, ups;
  std::vector<double> lps, rws, ts;
  for (const auto& tr : trajs) {
    b.diverged = b.diverged || tr.diverged;
    b.episode_start.push_back(static_cast<int>(xs.size()));
    double ret = 0.0;
    const int kept = tr.steps();
    for (int k = 0; k < kept; k += c) {
      const int end = std::min(kept, k + c);
      const Vector x = tr.x.row(k).transpose();
      const Vector u = tr.u.row(k).transpose();
      const double cost = cfg.h * tr.r.segment(k, end - k).sum();
      const double rw = -cfg.reward_scale * cost;
      b.has_prev.push_back(k > 0);
      ups.push_back(k > 0 ? Vector(tr.u.row(k - c).transpose()) : Vector::Zero(na));
      xs.push_back(x);
      us.push_back(u);
      lps.push_back(gaussian_logprob(u, net.forward(dyn.C * x), sigma));
      rws.push_back(rw);
      ts.push_back(tr.times(k));
      ret += rw;
    }
    b.episode_return.push_back(ret);
  }
  const int n = static_cast<int>(xs.size());
  b.x.resize(n, ns);
  b.u.resize(n, na);
  b.u_prev.resize(n, na);
  b.logprob.resize(n);
  b.reward.resize(n);
  b.time = Eigen::Map<const Vector>(ts.data(), n);
  for (int t = 0; t < n; ++t) {
    b.x.row(t) = (dyn.C * xs[static_cast<size_t>(t)]).transpose();
    b.u.row(t) = us[static_cast<size_t>(t)].transpose();
    b.u_prev.row(t) = ups[static_cast<size_t>(t)].transpose();
    b.logprob(t) = lps[static_cast<size_t>(t)];
    b.reward(t) = rws[static_cast<size_t>(t)];
  }
  return b;
}

TrainResult train(const Dynamics& dyn, const Matrix& obs_mask, const TrainConfig& cfg, const IterationCallback& on_iter,
                  const PolicyNet* init) {
  cfg.validate();
  dyn.validate();
  if (obs_mask.rows() != dyn.n_a() || obs_mask.cols() != dyn.C.rows())
    throw ValidationError("train: observation mask must be n_a x n_y");
  PolicyNet net = init ? *init : PolicyNet::multi_agent(obs_mask, cfg.hidden, cfg.init_scale, cfg.seed, cfg.centered);
  if (cfg.mode == RegulationMode::HardThreshold) net = hard_threshold(net, cfg.l_cert);

  TrainResult res;
  GradientMonitor monitor(dyn.n_a(), static_cast<int>(dyn.C.rows()), cfg.monitor_window, net.input_dependency());
  // The smoothness term is the soft regulator; other modes leave it out.
  const bool use_smooth = cfg.mode == RegulationMode::SoftPenalty;
  double w1 = cfg.w1, w2 = use_smooth ? cfg.w2 : 0.0;
  const bool auto_w = w1 < 0.0 || w2 < 0.0;
  double w2_floor = std::max(0.0, w2);
  int clean = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    IterationRecord rec;
    rec.iter = it + 1;
    RolloutBatch batch = collect_rollouts(dyn, net, cfg, it);
    rec.std = batch.std;
    double mean_ret = 0.0;
    for (double r : batch.episode_return) mean_ret += r;
    rec.mean_reward = mean_ret / static_cast<double>(batch.episode_return.size());

    if (batch.diverged) {
      rec.diverged = true;
      ++res.diverged_iterations;
      std::cerr << "train: iteration " << rec.iter << ": rollout diverged, update skipped\n";
    } else {
      compute_advantages(batch, cfg.discount);
      const Penalties pen = smoothness_penalties(batch, net, cfg.smoothness);
      if (auto_w && (w1 < 0.0 || w2 < 0.0)) {
        const double scale = cfg.penalty_fraction * batch.advantage.cwiseAbs().sum();
        if (w1 < 0.0) w1 = pen.explore > 0.0 ? scale / pen.explore : 0.0;
        if (w2 < 0.0) w2 = pen.smooth > 0.0 ? scale / pen.smooth : 0.0;
        w2_floor = w2;
      }
      const auto [ge, gs] = penalty_gradients(batch, net, cfg.smoothness);
      const Vector grad = surrogate_gradient(batch, net) - w1 * ge - w2 * gs;
      const PolicyNet old = net;
      const auto objective = [&](const PolicyNet& p) {
        const Penalties q = smoothness_penalties(batch, p, cfg.smoothness);
        return surrogate_loss(batch, p, old) - w1 * q.explore - w2 * q.smooth;
      };
      StepResult step = natural_step(net, grad, batch, objective, cfg);
      rec.accepted = step.accepted;
      rec.cg_fallback = step.cg_fallback;
      rec.kl = step.kl;
      if (step.accepted) net = std::move(step.net);
      rec.l_explore = pen.explore;
      rec.l_smooth = pen.smooth;

      std::vector<Matrix> jac;
      for (int t = 0; t < batch.size(); t += cfg.monitor_stride) jac.push_back(net.jacobian(batch.x.row(t).transpose()));
      monitor.update(jac);
    }

    if (cfg.mode == RegulationMode::HardThreshold) {
      net = hard_threshold(net, cfg.l_cert);
      if (lipschitz_upper(net) > cfg.l_cert) ++res.ht_violations;
    }
    rec.lipschitz = lipschitz_upper(net);
    if (cfg.mode == RegulationMode::SoftPenalty && w2 >= 0.0) {
      if (rec.lipschitz > cfg.l_cert) {
        w2 = 2.0 * w2;
        clean = 0;
      } else if (++clean >= 10) {
        w2 = std::max(w2_floor, 0.5 * w2);
        clean = 0;
      }
    }
    rec.w1 = std::max(0.0, w1);
    rec.w2 = std::max(0.0, w2);
    res.curve.push_back(rec);
    if (on_iter) on_iter(rec, net);
  }
  res.net = net;
  if (!monitor.empty()) {
    res.pattern = monitor.pattern();
    res.grad_min = monitor.min();
    res.grad_max = monitor.max();
  }
  return res;
}

}  // namespace iqccert
