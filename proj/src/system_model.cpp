#include "iqccert/system_model.hpp"

#include <cmath>
#include <numbers>

namespace iqccert {

LtiSystem::LtiSystem(Matrix a, Matrix b, Matrix c) : A(std::move(a)), B(std::move(b)), C(std::move(c)) {
  if (C.size() == 0) C = Matrix::Identity(A.rows(), A.rows());
  validate();
}

void LtiSystem::validate() const {
  linalg::require_square(A, "LtiSystem.A");
  if (A.rows() == 0) throw ValidationError("LtiSystem: empty state");
  if (B.rows() != A.rows() || B.cols() == 0) throw ValidationError("LtiSystem: B must be n_s x n_a");
  if (C.cols() != A.rows() || C.rows() == 0) throw ValidationError("LtiSystem: C must be n_o x n_s");
  linalg::require_finite(A, "LtiSystem.A");
  linalg::require_finite(B, "LtiSystem.B");
  linalg::require_finite(C, "LtiSystem.C");
}

bool is_hurwitz(const Matrix& a, double margin) { return linalg::max_real_eigenvalue(a) < -margin; }

double NonlinearChannel::phi(double a) const {
  switch (kind) {
    case NonlinearKind::SinMinusArg:
      return std::sin(a) - a;
    case NonlinearKind::ArgMinusSin:
      return a - std::sin(a);
  }
  return 0.0;
}

double NonlinearChannel::dphi(double a) const {
  switch (kind) {
    case NonlinearKind::SinMinusArg:
      return std::cos(a) - 1.0;
    case NonlinearKind::ArgMinusSin:
      return 1.0 - std::cos(a);
  }
  return 0.0;
}

std::pair<double, double> NonlinearChannel::slope_sector() const {
  // cos is even and decreasing on [0, pi]; beyond pi the full range [-1, 1] is reached.
  const double d = std::min(std::abs(domain), std::numbers::pi);
  const double cmin = std::cos(d);
  switch (kind) {
    case NonlinearKind::SinMinusArg:
      return {cmin - 1.0, 0.0};
    case NonlinearKind::ArgMinusSin:
      return {0.0, 1.0 - cmin};
  }
  return {0.0, 0.0};
}

NonlinearKind parse_nonlinear_kind(const std::string& s) {
  if (s == "sin_minus_arg") return NonlinearKind::SinMinusArg;
  if (s == "arg_minus_sin") return NonlinearKind::ArgMinusSin;
  throw ValidationError("unknown nonlinear kind '" + s + "'");
}

std::string to_string(NonlinearKind k) {
  return k == NonlinearKind::SinMinusArg ? "sin_minus_arg" : "arg_minus_sin";
}

Vector NonlinearBlock::eval(const Vector& x) const {
  Vector g = Vector::Zero(x.size());
  for (const auto& ch : channels) g += ch.input * ch.phi(ch.arg.dot(x));
  return g;
}

Matrix NonlinearBlock::arg_matrix(int n_s) const {
  Matrix m(size(), n_s);
  for (int k = 0; k < size(); ++k) {
    if (channels[k].arg.size() != n_s) throw ValidationError("nonlinear channel argument has wrong length");
    m.row(k) = channels[k].arg.transpose();
  }
  return m;
}

Matrix NonlinearBlock::input_matrix(int n_s) const {
  Matrix m(n_s, size());
  for (int k = 0; k < size(); ++k) {
    if (channels[k].input.size() != n_s) throw ValidationError("nonlinear channel input has wrong length");
    m.col(k) = channels[k].input;
  }
  return m;
}

Matrix selection_matrix(int n_a, int n_s) {
  return linalg::kron(Matrix::Identity(n_a, n_a), Matrix::Ones(1, n_s));
}

namespace {

AugmentedSystem augment_impl(const LtiSystem& plant, const Matrix& Cy, const Matrix& E, const IqcBlock& f,
                             const Matrix& W) {
  plant.validate();
  f.validate();
  const int ns = plant.n_s(), na = plant.n_a();
  if (W.rows() != na || W.cols() != na * ns || !W.isApprox(selection_matrix(na, ns), 0.0))
    throw ValidationError("augment: W must equal I_{n_a} kron 1_{1 x n_s}");
  if (Cy.cols() != ns || Cy.rows() != f.n_y())
    throw ValidationError("augment: filter y-input dimension does not match the plant");
  if (E.rows() != ns || E.cols() != f.n_v())
    throw ValidationError("augment: filter v-input dimension does not match the residual input map");
  const int np = f.n_psi();
  AugmentedSystem a;
  a.n_s = ns;
  a.n_psi = np;
  a.n_a = na;
  a.A_bar = Matrix::Zero(ns + np, ns + np);
  a.A_bar.topLeftCorner(ns, ns) = plant.A;
  a.A_bar.bottomLeftCorner(np, ns) = f.B_psi_y * Cy;
  a.A_bar.bottomRightCorner(np, np) = f.A_psi;
  a.B_bar_e = Matrix::Zero(ns + np, na);
  a.B_bar_e.topRows(ns) = plant.B;
  a.B_bar_q = Matrix::Zero(ns + np, na * ns);
  a.B_bar_q.topRows(ns) = plant.B * W;
  a.B_bar_v = Matrix::Zero(ns + np, f.n_v());
  a.B_bar_v.topRows(ns) = E;
  a.B_bar_v.bottomRows(np) = f.B_psi_v;
  a.C_bar = Matrix::Zero(f.n_z(), ns + np);
  a.C_bar.leftCols(ns) = f.D_psi_y * Cy;
  a.C_bar.rightCols(np) = f.C_psi;
  a.D_psi_v = f.D_psi_v;
  return a;
}

}  // namespace

AugmentedSystem augment(const LtiSystem& plant, const NonlinearBlock& nl, const IqcBlock& filter, const Matrix& W) {
  return augment_impl(plant, nl.arg_matrix(plant.n_s()), nl.input_matrix(plant.n_s()), filter, W);
}

AugmentedSystem augment(const LtiSystem& plant, const Matrix& E, const IqcBlock& filter, const Matrix& W) {
  return augment_impl(plant, Matrix::Identity(plant.n_s(), plant.n_s()), E, filter, W);
}

Matrix nominal_controller(const LtiSystem& plant, NominalMethod method, const Matrix& Q, const Matrix& R,
                          const Matrix& given) {
  plant.validate();
  Matrix K;
  if (method == NominalMethod::Given) {
    if (given.rows() != plant.n_a() || given.cols() != plant.n_s())
      throw ValidationError("nominal_controller: given gain must be n_a x n_s");
    K = given;
  } else {
    const Matrix X = linalg::solve_care(plant.A, plant.B, Q, R);
    K = -Eigen::LLT<Matrix>(R).solve(plant.B.transpose() * X);
  }
  if (!is_hurwitz(plant.A + plant.B * K))
    throw NumericalError("nominal_controller: A + B K is not Hurwitz; certification impossible");
  return K;
}

}  // namespace iqccert
