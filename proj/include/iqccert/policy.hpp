#pragma once

#include "iqccert/gradient_bounds.hpp"
#include "iqccert/linalg.hpp"

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

namespace iqccert {

struct Layer {
  Matrix W;
  Vector b;
  Matrix mask;  // same shape as W; 0 entries are structurally zero
};

/// Feedforward net: tanh on hidden layers, linear output.
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(std::vector<Layer> layers, bool centered);

  /// One sub-network per agent (row of obs_mask) reading only its observed
  /// inputs; hidden = units per hidden layer per agent (empty = linear policy).
  static PolicyNet multi_agent(const Matrix& obs_mask, const std::vector<int>& hidden, double init_scale,
                               std::uint64_t seed, bool centered = true);

  int n_in() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().W.cols()); }
  int n_out() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().W.rows()); }
  int n_layers() const { return static_cast<int>(layers_.size()); }
  bool centered() const { return centered_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Vector forward(const Vector& x) const;
  /// d pi_i / d x_j by reverse accumulation (n_out x n_in).
  Matrix jacobian(const Vector& x) const;
  /// Input mask implied by the first layer's structure and later layers'
  /// masks: entry (i, j) is 0 when output i cannot depend on input j.
  Matrix input_dependency() const;

  /// Free parameters: unmasked weights, then biases unless centered.
  int n_params() const;
  Vector params() const;
  void set_params(const Vector& p);

  /// Gradient of v^T pi(x) with respect to the parameters.
  Vector vjp(const Vector& x, const Vector& v) const;
  /// Directional derivative of pi(x) along parameter direction d.
  Vector jvp(const Vector& x, const Vector& d) const;
  /// ||d pi/d x (x)||_F^2 and its parameter gradient (double backprop).
  double input_grad_sq(const Vector& x, Vector* grad) const;

  void validate() const;

 private:
  struct Cache {
    std::vector<Vector> a;  // a[0] = x, a[k] = tanh(z_k) for hidden layers
    std::vector<Vector> s;  // s[k] = 1 - a[k]^2, hidden layers only (index k = 1..L-1)
    Vector out;
  };
  Cache run(const Vector& x) const;

  std::vector<Layer> layers_;
  bool centered_ = true;
};

/// Product of layer spectral norms (tanh is 1-Lipschitz).
double lipschitz_upper(const PolicyNet& net);

/// Scales every weight matrix by (l_cert / l)^{1/n_L} when l > l_cert, then
/// shrinks the output layer further if roundoff leaves l above l_cert.
/// Biases are untouched.
PolicyNet hard_threshold(const PolicyNet& net, double l_cert);

/// Running per-entry range of d pi_i / d x_j over a window of iterations.
class GradientMonitor {
 public:
  GradientMonitor(int n_a, int n_s, int window = 20, Matrix structural_mask = Matrix());

  /// One iteration's batch of Jacobians.
  void update(const std::vector<Matrix>& jacobians);
  bool empty() const { return history_.empty(); }
  int iterations() const { return static_cast<int>(history_.size()); }
  Matrix min() const;
  Matrix max() const;

  /// Symbols "+", "-", "±", "0" per entry (ASCII "+-" is never emitted).
  std::vector<std::vector<std::string>> pattern() const;
  /// One-sided bounds widened to contain the observed range.
  GradientBoundSet pattern_export(double eps, double l) const;

 private:
  int n_a_, n_s_, window_;
  Matrix mask_;
  std::deque<std::pair<Matrix, Matrix>> history_;
};

}  // namespace iqccert
