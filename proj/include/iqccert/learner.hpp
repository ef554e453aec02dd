#pragma once

#include "iqccert/linalg.hpp"
#include "iqccert/policy.hpp"
#include "iqccert/simulator.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace iqccert {

enum class RegulationMode { None, SoftPenalty, HardThreshold };
RegulationMode parse_regulation(const std::string& s);  // "none", "soft"/"soft_penalty", "ht"/"hard_threshold"
std::string to_string(RegulationMode m);

enum class SmoothnessKind { InputGradient, ParameterGradient };

struct TrainConfig {
  double discount = 0.99;
  double horizon = 20.0;
  double h = 1e-3;
  int control_every = 10;
  int rollouts = 4;
  int iterations = 1000;
  double x0_std = 0.1;
  double reward_scale = 1.0;

  double w1 = -1.0;  // < 0: chosen at the first iteration from penalty_fraction
  double w2 = -1.0;
  double penalty_fraction = 0.03;

  RegulationMode mode = RegulationMode::None;
  double l_cert = 1.0;
  SmoothnessKind smoothness = SmoothnessKind::InputGradient;

  double delta_kl = 0.01;
  double damping = 1e-3;
  int cg_iters = 100;
  double cg_tol = 1e-6;
  int backtrack = 10;

  double std0 = 0.3;
  double std_decay = 0.995;
  double std_floor = 0.02;

  std::vector<int> hidden = {};  // per-agent hidden widths; empty = linear
  double init_scale = 0.1;
  bool centered = true;
  std::uint64_t seed = 1;
  int monitor_window = 20;
  int monitor_stride = 10;  // states sampled per rollout for the gradient monitor: every k-th
  bool parallel = true;

  void validate() const;
  double exploration_std(int iter) const;  // iter counted from 0
};

/// Flat on-policy batch. Samples of one rollout are contiguous.
struct RolloutBatch {
  Matrix x;                 // N x n_s
  Matrix u;                 // N x n_a, actions taken
  Matrix u_prev;            // N x n_a, previous action (valid where has_prev)
  std::vector<bool> has_prev;
  Vector logprob;           // under the sampling policy
  Vector reward;
  Vector time;              // decision time (s)
  Vector returns;           // discounted reward-to-go
  Vector advantage;
  double std = 0.3;
  std::vector<int> episode_start;  // first sample index of each rollout
  std::vector<double> episode_return;
  bool diverged = false;

  int size() const { return static_cast<int>(x.rows()); }
  void validate() const;
};

double gaussian_logprob(const Vector& u, const Vector& mean, double std);

/// G_t = sum_{k >= t} rho^{k-t} r_k within one episode.
Vector reward_to_go(const Vector& rewards, double rho);
/// Baseline features [x, x.^2, t, t^2, 1]; the value is linear in them.
Matrix baseline_features(const Matrix& x, const Vector& t);
/// Least-squares weights (small ridge for rank deficiency).
Vector fit_linear_baseline(const Matrix& phi, const Vector& returns, double ridge = 1e-12);
/// Fills returns and advantage = reward-to-go minus linear baseline.
void compute_advantages(RolloutBatch& batch, double rho);

/// sum_t ratio_t A_t with ratio = pi(u|x) / pi_old(u|x).
double surrogate_loss(const RolloutBatch& batch, const PolicyNet& net, const PolicyNet& net_old);
Vector surrogate_gradient(const RolloutBatch& batch, const PolicyNet& net);  // at net == net_old

struct Penalties {
  double explore = 0.0;
  double smooth = 0.0;
};
Penalties smoothness_penalties(const RolloutBatch& batch, const PolicyNet& net,
                               SmoothnessKind kind = SmoothnessKind::InputGradient);
/// Parameter gradients of both penalties.
std::pair<Vector, Vector> penalty_gradients(const RolloutBatch& batch, const PolicyNet& net,
                                            SmoothnessKind kind = SmoothnessKind::InputGradient);

/// mean_t ||pi_a(x_t) - pi_b(x_t)||^2 / (2 std^2): exact KL for equal-std Gaussians.
double mean_kl(const RolloutBatch& batch, const PolicyNet& a, const PolicyNet& b);

using LinearOp = std::function<Vector(const Vector&)>;

struct CgResult {
  Vector x;
  int iterations = 0;
  bool converged = false;
};
CgResult conjugate_gradient(const LinearOp& A, const Vector& b, int max_iter, double tol);

/// Fisher-vector product of the Gaussian policy averaged over the batch states.
LinearOp fisher_operator(const RolloutBatch& batch, const PolicyNet& net);

struct Direction {
  Vector step;  // already scaled so that 0.5 step^T H step = delta_kl
  bool cg_fallback = false;
};
/// Solves (H + damping I) d = g by CG and scales to the KL radius. Falls back to
/// the plain gradient (same scaling) when CG does not converge.
Direction natural_direction(const LinearOp& fisher, const Vector& g, double delta_kl, double damping, int cg_iters,
                            double cg_tol);

struct StepResult {
  PolicyNet net;
  double kl = 0.0;
  double improvement = 0.0;
  int backtracks = 0;
  bool accepted = false;
  bool cg_fallback = false;
};
/// Natural-gradient step with halving line search: accepts only objective
/// improvement with batch-averaged KL <= delta_kl.
StepResult natural_step(const PolicyNet& net, const Vector& gradient, const RolloutBatch& batch,
                        const std::function<double(const PolicyNet&)>& objective, const TrainConfig& cfg);

struct IterationRecord {
  int iter = 0;
  double mean_reward = 0.0;
  double lipschitz = 0.0;
  double kl = 0.0;
  double w1 = 0.0;
  double w2 = 0.0;
  double l_explore = 0.0;
  double l_smooth = 0.0;
  double std = 0.0;
  bool diverged = false;
  bool accepted = false;
  bool cg_fallback = false;
};

struct TrainResult {
  std::vector<IterationRecord> curve;
  PolicyNet net;
  int ht_violations = 0;  // iterations ending with lipschitz_upper > l_cert in HT mode
  int diverged_iterations = 0;
  std::vector<std::vector<std::string>> pattern;  // monitor summary at the end
  Matrix grad_min, grad_max;
};

using IterationCallback = std::function<void(const IterationRecord&, const PolicyNet&)>;

/// Samples `rollouts` episodes of u = pi(x) + noise (held over each control
/// interval). Rollout r of iteration k uses a seed derived from (seed, k, r).
RolloutBatch collect_rollouts(const Dynamics& dyn, const PolicyNet& net, const TrainConfig& cfg, int iter);

TrainResult train(const Dynamics& dyn, const Matrix& obs_mask, const TrainConfig& cfg,
                  const IterationCallback& on_iter = {}, const PolicyNet* init = nullptr);

}  // namespace iqccert
