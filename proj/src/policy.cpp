#include "iqccert/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace iqccert {

PolicyNet::PolicyNet(std::vector<Layer> layers, bool centered) : layers_(std::move(layers)), centered_(centered) {
  validate();
  for (auto& l : layers_) {
    l.W = l.W.cwiseProduct(l.mask);
    if (centered_) l.b.setZero();
  }
}

void PolicyNet::validate() const {
  if (layers_.empty()) throw ValidationError("PolicyNet: no layers");
  for (size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.mask.rows() != l.W.rows() || l.mask.cols() != l.W.cols())
      throw ValidationError("PolicyNet: mask shape differs from weight shape");
    if (l.b.size() != l.W.rows()) throw ValidationError("PolicyNet: bias length differs from layer width");
    if (k > 0 && l.W.cols() != layers_[k - 1].W.rows()) throw ValidationError("PolicyNet: layer sizes do not chain");
    if (!linalg::all_finite(l.W) || !linalg::all_finite(l.b)) throw ValidationError("PolicyNet: non-finite parameter");
    if (((l.mask.array() == 0.0) && (l.W.array() != 0.0)).any())
      throw ValidationError("PolicyNet: nonzero weight at a masked position");
  }
}

PolicyNet PolicyNet::multi_agent(const Matrix& obs_mask, const std::vector<int>& hidden, double init_scale,
                                 std::uint64_t seed, bool centered) {
  const int na = static_cast<int>(obs_mask.rows());
  const int ns = static_cast<int>(obs_mask.cols());
  if (na == 0 || ns == 0) throw ValidationError("multi_agent: empty observation mask");
  for (int h : hidden)
    if (h <= 0) throw ValidationError("multi_agent: hidden widths must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Layer> layers;
  int prev = ns;
  std::vector<int> widths(hidden);
  widths.push_back(1);  // one output per agent
  for (size_t k = 0; k < widths.size(); ++k) {
    const int w = widths[k];
    Layer l;
    l.W = Matrix::Zero(na * w, prev);
    l.mask = Matrix::Zero(na * w, prev);
    l.b = Vector::Zero(na * w);
    for (int i = 0; i < na; ++i) {
      for (int u = 0; u < w; ++u) {
        const int r = i * w + u;
        if (k == 0) {
          for (int j = 0; j < ns; ++j) l.mask(r, j) = obs_mask(i, j) != 0.0 ? 1.0 : 0.0;
        } else {
          const int pw = widths[k - 1];
          l.mask.block(r, i * pw, 1, pw).setOnes();
        }
      }
    }
    for (int r = 0; r < l.W.rows(); ++r) {
      const double fan = std::max(1.0, l.mask.row(r).sum());
      for (int c = 0; c < l.W.cols(); ++c)
        if (l.mask(r, c) != 0.0) l.W(r, c) = init_scale * gauss(rng) / std::sqrt(fan);
    }
    layers.push_back(std::move(l));
    prev = na * w;
  }
  return PolicyNet(std::move(layers), centered);
}

PolicyNet::Cache PolicyNet::run(const Vector& x) const {
  if (x.size() != n_in()) throw ValidationError("PolicyNet: input dimension mismatch");
  const int L = n_layers();
  Cache c;
  c.a.resize(static_cast<size_t>(L));
  c.s.resize(static_cast<size_t>(L));
  c.a[0] = x;
  for (int k = 0; k + 1 < L; ++k) {
    const auto& l = layers_[static_cast<size_t>(k)];
    Vector z = l.W * c.a[static_cast<size_t>(k)] + l.b;
    c.a[static_cast<size_t>(k + 1)] = z.array().tanh().matrix();
    c.s[static_cast<size_t>(k + 1)] = (1.0 - c.a[static_cast<size_t>(k + 1)].array().square()).matrix();
  }
  const auto& out = layers_.back();
  c.out = out.W * c.a.back() + out.b;
  return c;
}

Vector PolicyNet::forward(const Vector& x) const { return run(x).out; }

Matrix PolicyNet::jacobian(const Vector& x) const {
  const Cache c = run(x);
  Matrix G = layers_.back().W;
  for (int k = n_layers() - 2; k >= 0; --k)
    G = (G * c.s[static_cast<size_t>(k + 1)].asDiagonal()) * layers_[static_cast<size_t>(k)].W;
  return G;
}

Matrix PolicyNet::input_dependency() const {
  Matrix D = (layers_.front().mask.array() != 0.0).cast<double>().matrix();
  for (size_t k = 1; k < layers_.size(); ++k) {
    D = (layers_[k].mask.array() != 0.0).cast<double>().matrix() * D;
    D = (D.array() > 0.0).cast<double>().matrix();
  }
  return D;
}

int PolicyNet::n_params() const {
  int n = 0;
  for (const auto& l : layers_) {
    n += static_cast<int>((l.mask.array() != 0.0).count());
    if (!centered_) n += static_cast<int>(l.b.size());
  }
  return n;
}

namespace {

// Walks the parameter layout: masked weights row-major, then biases.
template <typename FW, typename FB>
void for_each_param(const std::vector<Layer>& layers, bool centered, FW&& on_weight, FB&& on_bias) {
  int idx = 0;
  for (size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    for (int r = 0; r < l.W.rows(); ++r)
      for (int c = 0; c < l.W.cols(); ++c)
        if (l.mask(r, c) != 0.0) on_weight(idx++, k, r, c);
    if (!centered)
      for (int r = 0; r < l.b.size(); ++r) on_bias(idx++, k, r);
  }
}

struct LayerGrads {
  std::vector<Matrix> W;
  std::vector<Vector> b;
};

LayerGrads zero_grads(const std::vector<Layer>& layers) {
  LayerGrads g;
  for (const auto& l : layers) {
    g.W.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
    g.b.push_back(Vector::Zero(l.b.size()));
  }
  return g;
}

Vector pack(const std::vector<Layer>& layers, bool centered, const LayerGrads& g, int n) {
  Vector p(n);
  for_each_param(
      layers, centered, [&](int i, size_t k, int r, int c) { p(i) = g.W[k](r, c); },
      [&](int i, size_t k, int r) { p(i) = g.b[k](r); });
  return p;
}

LayerGrads unpack(const std::vector<Layer>& layers, bool centered, const Vector& p) {
  LayerGrads g = zero_grads(layers);
  for_each_param(
      layers, centered, [&](int i, size_t k, int r, int c) { g.W[k](r, c) = p(i); },
      [&](int i, size_t k, int r) { g.b[k](r) = p(i); });
  return g;
}

}  // namespace

Vector PolicyNet::params() const {
  LayerGrads g;
  for (const auto& l : layers_) {
    g.W.push_back(l.W);
    g.b.push_back(l.b);
  }
  return pack(layers_, centered_, g, n_params());
}

void PolicyNet::set_params(const Vector& p) {
  if (p.size() != n_params()) throw ValidationError("PolicyNet: parameter vector has wrong length");
  if (!linalg::all_finite(p)) throw ValidationError("PolicyNet: non-finite parameters");
  const LayerGrads g = unpack(layers_, centered_, p);
  for (size_t k = 0; k < layers_.size(); ++k) {
    layers_[k].W = g.W[k];
    if (!centered_) layers_[k].b = g.b[k];
  }
}

Vector PolicyNet::vjp(const Vector& x, const Vector& v) const {
  if (v.size() != n_out()) throw ValidationError("PolicyNet::vjp: cotangent dimension mismatch");
  const Cache c = run(x);
  LayerGrads g = zero_grads(layers_);
  Vector gz = v;
  for (int k = n_layers() - 1; k >= 0; --k) {
    const auto ku = static_cast<size_t>(k);
    g.W[ku] = (gz * c.a[ku].transpose()).cwiseProduct(layers_[ku].mask);
    g.b[ku] = gz;
    if (k > 0) gz = (layers_[ku].W.transpose() * gz).cwiseProduct(c.s[ku]);
  }
  return pack(layers_, centered_, g, n_params());
}

Vector PolicyNet::jvp(const Vector& x, const Vector& d) const {
  if (d.size() != n_params()) throw ValidationError("PolicyNet::jvp: direction has wrong length");
  const Cache c = run(x);
  const LayerGrads g = unpack(layers_, centered_, d);
  Vector da = Vector::Zero(n_in());
  for (int k = 0; k < n_layers(); ++k) {
    const auto ku = static_cast<size_t>(k);
    Vector dz = g.W[ku] * c.a[ku] + layers_[ku].W * da + g.b[ku];
    if (k + 1 == n_layers()) return dz;
    da = dz.cwiseProduct(c.s[ku + 1]);
  }
  return da;
}

double PolicyNet::input_grad_sq(const Vector& x, Vector* grad) const {
  const Cache c = run(x);
  const int L = n_layers();
  // P[k] = d a_k / d x; Q[k] = W_k P[k].
  std::vector<Matrix> P(static_cast<size_t>(L)), Q(static_cast<size_t>(L));
  P[0] = Matrix::Identity(n_in(), n_in());
  for (int k = 0; k + 1 < L; ++k) {
    const auto ku = static_cast<size_t>(k);
    Q[ku] = layers_[ku].W * P[ku];
    P[ku + 1] = c.s[ku + 1].asDiagonal() * Q[ku];
  }
  const Matrix J = layers_.back().W * P.back();
  const double val = J.squaredNorm();
  if (!grad) return val;

  LayerGrads g = zero_grads(layers_);
  const Matrix GJ = 2.0 * J;
  g.W.back() += GJ * P.back().transpose();
  Matrix GP = layers_.back().W.transpose() * GJ;
  std::vector<Vector> gz(static_cast<size_t>(L));  // gradient w.r.t. pre-activation of a_k
  for (int k = L - 2; k >= 0; --k) {
    const auto ku = static_cast<size_t>(k);
    const Vector gs = GP.cwiseProduct(Q[ku]).rowwise().sum();
    gz[ku + 1] = gs.cwiseProduct((-2.0 * c.a[ku + 1]).cwiseProduct(c.s[ku + 1]));
    const Matrix GQ = c.s[ku + 1].asDiagonal() * GP;
    g.W[ku] += GQ * P[ku].transpose();
    GP = layers_[ku].W.transpose() * GQ;
  }
  // Back through the forward pass that produced the activations.
  for (int m = L - 1; m >= 1; --m) {
    const auto mu = static_cast<size_t>(m);
    if (m + 1 <= L - 1) gz[mu] += c.s[mu].cwiseProduct(layers_[mu].W.transpose() * gz[mu + 1]);
    g.W[mu - 1] += gz[mu] * c.a[mu - 1].transpose();
    g.b[mu - 1] += gz[mu];
  }
  for (size_t k = 0; k < layers_.size(); ++k) g.W[k] = g.W[k].cwiseProduct(layers_[k].mask);
  *grad = pack(layers_, centered_, g, n_params());
  return val;
}

double lipschitz_upper(const PolicyNet& net) {
  double l = 1.0;
  for (const auto& layer : net.layers()) l *= linalg::spectral_norm(layer.W);
  return l;
}

PolicyNet hard_threshold(const PolicyNet& net, double l_cert) {
  if (!(l_cert > 0.0) || !std::isfinite(l_cert)) throw ValidationError("hard_threshold: l_cert must be positive");
  PolicyNet out = net;
  const double l = lipschitz_upper(net);
  if (l <= l_cert) return out;
  const double s = std::pow(l_cert / l, 1.0 / net.n_layers());
  for (auto& layer : out.layers()) layer.W *= s;
  for (int it = 0; it < 8; ++it) {
    const double lp = lipschitz_upper(out);
    if (lp <= l_cert) break;
    out.layers().back().W *= (l_cert / lp) * (1.0 - 4e-16 * (1 << it));
  }
  return out;
}

GradientMonitor::GradientMonitor(int n_a, int n_s, int window, Matrix structural_mask)
    : n_a_(n_a), n_s_(n_s), window_(window), mask_(std::move(structural_mask)) {
  if (n_a <= 0 || n_s <= 0 || window <= 0) throw ValidationError("GradientMonitor: dimensions must be positive");
  if (mask_.size() > 0 && (mask_.rows() != n_a || mask_.cols() != n_s))
    throw ValidationError("GradientMonitor: structural mask shape mismatch");
}

void GradientMonitor::update(const std::vector<Matrix>& jacobians) {
  if (jacobians.empty()) return;
  Matrix lo = Matrix::Constant(n_a_, n_s_, std::numeric_limits<double>::infinity());
  Matrix hi = -lo;
  for (const auto& J : jacobians) {
    if (J.rows() != n_a_ || J.cols() != n_s_) throw ValidationError("GradientMonitor: Jacobian shape mismatch");
    lo = lo.cwiseMin(J);
    hi = hi.cwiseMax(J);
  }
  history_.emplace_back(lo, hi);
  while (static_cast<int>(history_.size()) > window_) history_.pop_front();
}

Matrix GradientMonitor::min() const {
  if (history_.empty()) throw ValidationError("GradientMonitor: no data");
  Matrix m = history_.front().first;
  for (const auto& h : history_) m = m.cwiseMin(h.first);
  return m;
}

Matrix GradientMonitor::max() const {
  if (history_.empty()) throw ValidationError("GradientMonitor: no data");
  Matrix m = history_.front().second;
  for (const auto& h : history_) m = m.cwiseMax(h.second);
  return m;
}

std::vector<std::vector<std::string>> GradientMonitor::pattern() const {
  const Matrix lo = min(), hi = max();
  std::vector<std::vector<std::string>> p(static_cast<size_t>(n_a_), std::vector<std::string>(static_cast<size_t>(n_s_)));
  for (int i = 0; i < n_a_; ++i)
    for (int j = 0; j < n_s_; ++j) {
      auto& s = p[static_cast<size_t>(i)][static_cast<size_t>(j)];
      const bool masked = mask_.size() > 0 && mask_(i, j) == 0.0;
      if (masked || (lo(i, j) == 0.0 && hi(i, j) == 0.0))
        s = "0";
      else if (lo(i, j) > 0.0)
        s = "+";
      else if (hi(i, j) < 0.0)
        s = "-";
      else
        s = "±";
    }
  return p;
}

GradientBoundSet GradientMonitor::pattern_export(double eps, double l) const {
  const auto pat = pattern();
  GradientBoundSet b = GradientBoundSet::one_sided(pat, l, eps);
  const Matrix lo = min(), hi = max();
  for (int i = 0; i < n_a_; ++i)
    for (int j = 0; j < n_s_; ++j) {
      if (b.is_zero(i, j)) continue;
      b.lower(i, j) = std::min(b.lower(i, j), lo(i, j));
      b.upper(i, j) = std::max(b.upper(i, j), hi(i, j));
    }
  return b;
}

}  // namespace iqccert
