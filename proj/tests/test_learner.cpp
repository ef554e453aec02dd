#include "iqccert/benchmarks.hpp"
#include "iqccert/learner.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace iqccert;
using namespace testutil;

namespace {

PolicyNet linear_policy(const Matrix& K) {
  return PolicyNet({{K, Vector::Zero(K.rows()), Matrix::Ones(K.rows(), K.cols())}}, true);
}

// One episode of consecutive samples.
RolloutBatch make_batch(const Matrix& x, const Matrix& u, const Vector& adv, double std) {
  RolloutBatch b;
  const int n = static_cast<int>(x.rows());
  b.x = x;
  b.u = u;
  b.u_prev = Matrix::Zero(n, u.cols());
  b.has_prev.assign(static_cast<size_t>(n), false);
  for (int t = 1; t < n; ++t) {
    b.u_prev.row(t) = u.row(t - 1);
    b.has_prev[static_cast<size_t>(t)] = true;
  }
  b.logprob = Vector::Zero(n);
  b.reward = Vector::Zero(n);
  b.time = Vector::LinSpaced(n, 0.0, n - 1.0);
  b.advantage = adv;
  b.std = std;
  b.episode_start = {0};
  return b;
}

TrainConfig small_config() {
  TrainConfig c;
  c.horizon = 0.5;
  c.h = 2e-3;
  c.control_every = 10;
  c.rollouts = 2;
  c.iterations = 20;
  c.hidden = {3};
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("reward to go") {
  const Vector g = reward_to_go(Eigen::Vector3d(1, 1, 1), 0.5);
  CHECK(g(0) == 1.75);
  CHECK(g(1) == 1.5);
  CHECK(g(2) == 1.0);
  CHECK(reward_to_go(Eigen::Vector3d(1, 2, 3), 0.0) == Vector(Eigen::Vector3d(1, 2, 3)));
}

TEST_CASE("advantages on a two-state deterministic MDP match brute force") {
  // s0 --a--> s1 --> end. Reward r(s0, a) = 1 + a for a in {-1, +1}; r(s1) = 0.5.
  // Under a uniform policy V(s0) = 1 + rho * 0.5, V(s1) = 0.5; A(s0, a) = a, A(s1) = 0.
  const double rho = 0.9;
  RolloutBatch b;
  const int episodes = 6;
  b.x = Matrix::Zero(2 * episodes, 2);
  b.u = Matrix::Zero(2 * episodes, 1);
  b.reward = Vector::Zero(2 * episodes);
  b.time = Vector::Zero(2 * episodes);
  for (int e = 0; e < episodes; ++e) {
    const double a = e % 2 == 0 ? 1.0 : -1.0;
    b.x(2 * e, 0) = 1.0;
    b.x(2 * e + 1, 1) = 1.0;
    b.u(2 * e, 0) = a;
    b.reward(2 * e) = 1.0 + a;
    b.reward(2 * e + 1) = 0.5;
    b.time(2 * e + 1) = 1.0;
    b.episode_start.push_back(2 * e);
  }
  b.logprob = Vector::Zero(2 * episodes);
  compute_advantages(b, rho);
  for (int e = 0; e < episodes; ++e) {
    const double a = e % 2 == 0 ? 1.0 : -1.0;
    CHECK(std::abs(b.returns(2 * e) - (1.0 + a + rho * 0.5)) < 1e-15);
    CHECK(std::abs(b.advantage(2 * e) - a) < 1e-10);
    CHECK(std::abs(b.advantage(2 * e + 1)) < 1e-10);
  }
}

TEST_CASE("surrogate: identity ratio, zero advantages, hand example") {
  std::mt19937_64 rng(60);
  const Matrix x = randn(rng, 5, 2), u = randn(rng, 5, 1);
  const Vector adv = randv(rng, 5);
  const PolicyNet net = linear_policy(randn(rng, 1, 2));
  const RolloutBatch b = make_batch(x, u, adv, 0.4);
  CHECK(surrogate_loss(b, net, net) == doctest::Approx(adv.sum()).epsilon(1e-14));
  const RolloutBatch z = make_batch(x, u, Vector::Zero(5), 0.4);
  CHECK(surrogate_loss(z, linear_policy(randn(rng, 1, 2)), net) == 0.0);

  // pi_old = 0, pi = 0.3 x, sigma = 1
  Matrix hx(2, 1), hu(2, 1);
  hx << 1.0, -1.0;
  hu << 0.5, 0.2;
  const RolloutBatch h = make_batch(hx, hu, Eigen::Vector2d(2.0, -1.0), 1.0);
  const double r1 = std::exp(-0.5 * 0.2 * 0.2 + 0.5 * 0.5 * 0.5);
  const double r2 = std::exp(-0.5 * 0.5 * 0.5 + 0.5 * 0.2 * 0.2);
  const double ref = 2.0 * r1 - r2;
  CHECK(surrogate_loss(h, linear_policy(Matrix::Constant(1, 1, 0.3)), linear_policy(Matrix::Zero(1, 1))) ==
        doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("surrogate gradient matches finite differences") {
  std::mt19937_64 rng(61);
  const Matrix obs = Matrix::Ones(2, 3);
  PolicyNet net = PolicyNet::multi_agent(obs, {4}, 0.5, 3, false);
  const RolloutBatch b = make_batch(randn(rng, 6, 3), randn(rng, 6, 2), randv(rng, 6), 0.3);
  const Vector g = surrogate_gradient(b, net);
  const Vector p0 = net.params();
  const PolicyNet old = net;
  for (int k = 0; k < net.n_params(); k += 3) {
    const double s = 1e-6;
    Vector p = p0;
    p(k) += s;
    net.set_params(p);
    const double fp = surrogate_loss(b, net, old);
    p(k) -= 2 * s;
    net.set_params(p);
    const double fm = surrogate_loss(b, net, old);
    CHECK(g(k) == doctest::Approx((fp - fm) / (2 * s)).epsilon(1e-5));
  }
}

TEST_CASE("penalties: constant policy, linear policy closed forms, gradients") {
  Matrix x(3, 2), u(3, 1);
  x << 1, 2, -1, 0.5, 0.3, -2;
  u << 0.7, 0.7, 0.7;
  // Constant policy pi = 0.7 (not centered), taking constant actions.
  const PolicyNet c({{Matrix::Zero(1, 2), Vector::Constant(1, 0.7), Matrix::Ones(1, 2)}}, false);
  const auto pc = smoothness_penalties(make_batch(x, u, Vector::Zero(3), 1.0), c);
  CHECK(pc.explore == doctest::Approx(0.0));
  CHECK(pc.smooth == 0.0);

  Matrix K(1, 2);
  K << 0.4, -1.1;
  Matrix ul(3, 1);
  ul << 0.2, -0.3, 0.9;
  const RolloutBatch b = make_batch(x, ul, Vector::Zero(3), 1.0);
  const PolicyNet lin = linear_policy(K);
  const auto p = smoothness_penalties(b, lin);
  double ref = 0.0;
  for (int t = 1; t < 3; ++t) ref += std::pow(ul(t - 1, 0) - (K * x.row(t).transpose())(0), 2);
  CHECK(p.explore == doctest::Approx(ref).epsilon(1e-14));
  CHECK(p.smooth == doctest::Approx(3.0 * K.squaredNorm()).epsilon(1e-14));

  // Gradients against central differences on a small tanh network.
  std::mt19937_64 rng(62);
  PolicyNet net = PolicyNet::multi_agent(Matrix::Ones(1, 2), {3}, 0.6, 4, true);
  const auto [ge, gs] = penalty_gradients(b, net);
  const Vector p0 = net.params();
  for (int k = 0; k < net.n_params(); ++k) {
    const double s = 1e-6;
    Vector q = p0;
    q(k) += s;
    net.set_params(q);
    const auto plus = smoothness_penalties(b, net);
    q(k) -= 2 * s;
    net.set_params(q);
    const auto minus = smoothness_penalties(b, net);
    CHECK(ge(k) == doctest::Approx((plus.explore - minus.explore) / (2 * s)).epsilon(1e-5));
    CHECK(gs(k) == doctest::Approx((plus.smooth - minus.smooth) / (2 * s)).epsilon(1e-5));
  }
}

TEST_CASE("fisher operator and KL agree for linear policies") {
  std::mt19937_64 rng(63);
  const PolicyNet net = linear_policy(randn(rng, 2, 3));
  const RolloutBatch b = make_batch(randn(rng, 7, 3), randn(rng, 7, 2), Vector::Zero(7), 0.25);
  const LinearOp F = fisher_operator(b, net);
  const Vector d = randv(rng, net.n_params(), 0.1);
  Vector ref = Vector::Zero(net.n_params());
  for (int t = 0; t < 7; ++t) {
    const Vector xt = b.x.row(t).transpose();
    ref += net.vjp(xt, net.jvp(xt, d));
  }
  ref /= 0.25 * 0.25 * 7;
  CHECK((F(d) - ref).norm() <= 1e-12 * ref.norm());
  PolicyNet moved = net;
  moved.set_params(net.params() + d);
  CHECK(mean_kl(b, moved, net) == doctest::Approx(0.5 * d.dot(F(d))).epsilon(1e-12));
}

TEST_CASE("conjugate gradient matches a direct solve") {
  std::mt19937_64 rng(64);
  const Matrix a = randn(rng, 8, 8);
  const Matrix H = a * a.transpose() + Matrix::Identity(8, 8);
  const Vector g = randv(rng, 8);
  const auto r = conjugate_gradient([&](const Vector& v) { return Vector(H * v); }, g, 100, 1e-12);
  CHECK(r.converged);
  CHECK((r.x - H.ldlt().solve(g)).norm() <= 1e-8 * r.x.norm());
}

TEST_CASE("natural direction: identity Fisher scaling and zero trust region") {
  std::mt19937_64 rng(65);
  const Vector g = randv(rng, 6);
  const LinearOp I = [](const Vector& v) { return v; };
  const double delta = 0.02;
  const Direction d = natural_direction(I, g, delta, 1e-3, 50, 1e-12);
  CHECK((d.step - std::sqrt(2 * delta / g.squaredNorm()) * g).norm() <= 1e-12);
  CHECK(0.5 * d.step.squaredNorm() == doctest::Approx(delta).epsilon(1e-12));
  CHECK(natural_direction(I, g, 0.0, 1e-3, 50, 1e-12).step.isZero(0.0));
}

TEST_CASE("natural step: accepted steps respect the KL budget") {
  const Benchmark fl = build_flight();
  TrainConfig cfg = small_config();
  const PolicyNet net = PolicyNet::multi_agent(fl.obs_mask, cfg.hidden, cfg.init_scale, cfg.seed);
  RolloutBatch b = collect_rollouts(fl.dynamics(), net, cfg, 0);
  compute_advantages(b, cfg.discount);
  const auto objective = [&](const PolicyNet& p) { return surrogate_loss(b, p, net); };
  const StepResult s = natural_step(net, surrogate_gradient(b, net), b, objective, cfg);
  if (s.accepted) {
    CHECK(s.kl <= cfg.delta_kl * (1 + 1e-9));
    CHECK(s.improvement > 0.0);
  } else {
    CHECK(s.net.params() == net.params());
  }
}

TEST_CASE("training: HT invariant, determinism, automatic penalty weights") {
  const Benchmark fl = build_flight();
  TrainConfig cfg = small_config();
  cfg.mode = RegulationMode::HardThreshold;
  cfg.l_cert = 0.3;
  int over = 0;
  const auto r1 = train(fl.dynamics(), fl.obs_mask, cfg, [&](const IterationRecord& rec, const PolicyNet& p) {
    if (lipschitz_upper(p) > cfg.l_cert * (1 + 1e-12)) ++over;
    CHECK(rec.lipschitz <= cfg.l_cert * (1 + 1e-12));
  });
  CHECK(over == 0);
  CHECK(r1.ht_violations == 0);
  REQUIRE(r1.curve.size() == 20);

  const auto r2 = train(fl.dynamics(), fl.obs_mask, cfg);
  CHECK(r2.net.params() == r1.net.params());
  for (size_t k = 0; k < r1.curve.size(); ++k) CHECK(r1.curve[k].mean_reward == r2.curve[k].mean_reward);

  cfg.parallel = false;
  const auto r3 = train(fl.dynamics(), fl.obs_mask, cfg);
  CHECK(r3.net.params() == r1.net.params());

  // First-iteration weights put w1 * L_explore at the configured share of sum |advantage|.
  cfg.iterations = 1;
  cfg.mode = RegulationMode::None;
  const PolicyNet init = PolicyNet::multi_agent(fl.obs_mask, cfg.hidden, cfg.init_scale, cfg.seed);
  RolloutBatch b = collect_rollouts(fl.dynamics(), init, cfg, 0);
  compute_advantages(b, cfg.discount);
  const auto r4 = train(fl.dynamics(), fl.obs_mask, cfg, {}, &init);
  const double share = r4.curve[0].w1 * r4.curve[0].l_explore / b.advantage.cwiseAbs().sum();
  CHECK(share == doctest::Approx(cfg.penalty_fraction).epsilon(1e-9));
  CHECK(r4.curve[0].w2 == 0.0);
}

TEST_CASE("training: soft penalty doubles w2 while the level is exceeded") {
  const Benchmark fl = build_flight();
  TrainConfig cfg = small_config();
  cfg.iterations = 4;
  cfg.mode = RegulationMode::SoftPenalty;
  cfg.l_cert = 1e-4;
  const auto r = train(fl.dynamics(), fl.obs_mask, cfg);
  REQUIRE(r.curve.size() == 4);
  CHECK(r.curve[0].w2 > 0.0);
  for (size_t k = 1; k < r.curve.size(); ++k) CHECK(r.curve[k].w2 == doctest::Approx(2.0 * r.curve[k - 1].w2));
}

TEST_CASE("training: diverging rollouts are skipped, not fatal") {
  Dynamics d;
  d.A = 50.0 * Matrix::Identity(2, 2);
  d.B = Matrix::Identity(2, 2);
  d.C = Matrix::Identity(2, 2);
  d.Q = Matrix::Identity(2, 2);
  d.R = Matrix::Identity(2, 2);
  TrainConfig cfg = small_config();
  cfg.horizon = 1.0;
  cfg.iterations = 3;
  cfg.x0_std = 1.0;
  const auto r = train(d, Matrix::Identity(2, 2), cfg);
  CHECK(r.diverged_iterations == 3);
  CHECK(r.curve.size() == 3);
}

TEST_CASE("config parsing and validation") {
  CHECK(parse_regulation("none") == RegulationMode::None);
  CHECK(parse_regulation("soft") == RegulationMode::SoftPenalty);
  CHECK(parse_regulation("hard_threshold") == RegulationMode::HardThreshold);
  CHECK_THROWS_AS(parse_regulation("clip"), ValidationError);
  TrainConfig c;
  c.exploration_std(0);
  CHECK(c.exploration_std(0) == doctest::Approx(0.3));
  CHECK(c.exploration_std(100000) == doctest::Approx(0.02));
  c.delta_kl = -1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}
