#include "iqccert/gradient_bounds.hpp"

#include <cmath>

namespace iqccert {

GradientBoundSet::GradientBoundSet(Matrix lo, Matrix hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

void GradientBoundSet::validate() const {
  if (lower.rows() != upper.rows() || lower.cols() != upper.cols())
    throw ValidationError("GradientBoundSet: lower/upper shape mismatch");
  if (lower.size() == 0) throw ValidationError("GradientBoundSet: empty");
  if (!lower.allFinite() || !upper.allFinite()) throw ValidationError("GradientBoundSet: non-finite bound");
  if ((lower.array() > upper.array()).any()) throw ValidationError("GradientBoundSet: lower > upper");
}

GradientBoundSet GradientBoundSet::uniform(int n_a, int n_s, double l) {
  if (!(l >= 0.0)) throw ValidationError("uniform bounds: l must be >= 0");
  return {Matrix::Constant(n_a, n_s, -l), Matrix::Constant(n_a, n_s, l)};
}

GradientBoundSet GradientBoundSet::sparse(const Matrix& mask, double l) {
  if (!(l >= 0.0)) throw ValidationError("sparse bounds: l must be >= 0");
  Matrix lo = Matrix::Zero(mask.rows(), mask.cols());
  Matrix hi = lo;
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      if (mask(i, j) != 0.0) {
        lo(i, j) = -l;
        hi(i, j) = l;
      }
  return {lo, hi};
}

GradientBoundSet GradientBoundSet::one_sided(const std::vector<std::vector<std::string>>& pattern, double l,
                                             double eps) {
  if (!(l >= 0.0)) throw ValidationError("one_sided bounds: l must be >= 0");
  if (!(eps >= 0.0 && eps < 1.0)) throw ValidationError("one_sided bounds: eps must lie in [0, 1)");
  if (pattern.empty() || pattern[0].empty()) throw ValidationError("one_sided bounds: empty pattern");
  const size_t ns = pattern[0].size();
  Matrix lo(static_cast<Eigen::Index>(pattern.size()), static_cast<Eigen::Index>(ns));
  Matrix hi = lo;
  for (size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i].size() != ns) throw ValidationError("one_sided bounds: ragged pattern");
    for (size_t j = 0; j < ns; ++j) {
      const std::string& s = pattern[i][j];
      double a = -l, b = l;
      if (s == "+") {
        a = -eps * l;
      } else if (s == "-" || s == "\u2212") {
        b = eps * l;
      } else if (s == "0") {
        a = b = 0.0;
      } else if (s != "\u00b1" && s != "+-") {
        throw ValidationError("one_sided bounds: unknown pattern symbol '" + s + "'");
      }
      lo(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a;
      hi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = b;
    }
  }
  return {lo, hi};
}

QuadConstraint build_M(const GradientBoundSet& bounds, const MultiplierSet& mult) {
  bounds.validate();
  const int na = bounds.n_a(), ns = bounds.n_s();
  if (mult.lambda.rows() != na || mult.lambda.cols() != ns) throw ValidationError("build_M: multiplier shape mismatch");
  if (!mult.lambda.allFinite() || (mult.lambda.array() < 0.0).any())
    throw ValidationError("build_M: multipliers must be finite and >= 0");
  const Matrix c = bounds.c();
  const Matrix cb = bounds.c_bar();
  QuadConstraint out;
  out.M = Matrix::Zero(ns + na * ns, ns + na * ns);
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < ns; ++j) {
      const double lam = mult.lambda(i, j);
      const int qk = ns + i * ns + j;
      out.M(j, j) += lam * (cb(i, j) * cb(i, j) - c(i, j) * c(i, j));
      out.M(j, qk) += lam * c(i, j);
      out.M(qk, j) += lam * c(i, j);
      out.M(qk, qk) = -lam;
    }
  }
  out.W = linalg::kron(Matrix::Identity(na, na), Matrix::Ones(1, ns));
  return out;
}

Matrix constraint_terms(const GradientBoundSet& bounds, const Vector& dx, const Matrix& q) {
  const int na = bounds.n_a(), ns = bounds.n_s();
  if (dx.size() != ns || q.rows() != na || q.cols() != ns) throw ValidationError("constraint_terms: shape mismatch");
  const Matrix c = bounds.c();
  const Matrix cb = bounds.c_bar();
  Matrix phi(na, ns);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < ns; ++j)
      phi(i, j) = (cb(i, j) * cb(i, j) - c(i, j) * c(i, j)) * dx(j) * dx(j) + 2.0 * c(i, j) * q(i, j) * dx(j) -
                  q(i, j) * q(i, j);
  return phi;
}

Matrix hybrid_differences(const VectorFunction& f, int n_out, const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw ValidationError("hybrid_differences: x and y differ in length");
  const Eigen::Index n = x.size();
  Matrix q(n_out, n);
  Vector h = x;
  Vector prev = f(h);
  if (prev.size() != n_out) throw ValidationError("hybrid_differences: function output has wrong length");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (x(j) == y(j)) {
      q.col(j).setZero();
      continue;
    }
    h(j) = y(j);
    Vector cur = f(h);
    q.col(j) = prev - cur;
    prev = std::move(cur);
  }
  return q;
}

bool check_pointwise(const GradientBoundSet& bounds, const VectorFunction& f, const Vector& x, const Vector& y,
                     double tol) {
  const Matrix q = hybrid_differences(f, bounds.n_a(), x, y);
  return (constraint_terms(bounds, x - y, q).array() >= -tol).all();
}

Matrix decompose_sector(const VectorFunction& pi, const GradientBoundSet& bounds, const Vector& y) {
  bounds.validate();
  if (y.size() != bounds.n_s()) throw ValidationError("decompose_sector: y has wrong length");
  return hybrid_differences(pi, bounds.n_a(), y, Vector::Zero(y.size()));
}

bool membership_S(const GradientBoundSet& bounds, const Vector& x, const Matrix& q, double tol) {
  return (constraint_terms(bounds, x, q).array() >= -tol).all();
}

}  // namespace iqccert
