#pragma once

// Energy functionals over the state Z (n x d_v) for a fixed attention matrix A
// and value matrix V:
//
//   u_j(Z) = sum_m A(m,j) z_m . v_j          alignment scores
//   c_j    = u_j(AV)                         regularization coefficients
//   E(Z)   = sum_j F(u_j)
//   R(Z)   = -sum_j F'(c_j) u_j(Z)
//   E_R    = E + R,   grad E_R = A diag(F'(u) - F'(c)) V
//
// Because u(AV) = c, grad E_R vanishes at Z = AV for every differentiable F.

#include <cmath>
#include <sstream>
#include <string>

#include "eattn/dense.hpp"

namespace eattn {

/// Largest alignment score accepted by the exponential form.
inline constexpr double kExpArgumentLimit = 700.0;

class EnergyForm {
 public:
  enum class Kind { linear, quadratic, polynomial, exponential };

  static EnergyForm linear() { return EnergyForm(Kind::linear, 1); }
  static EnergyForm quadratic() { return EnergyForm(Kind::quadratic, 2); }
  static EnergyForm polynomial(int degree) {
    if (degree < 1) {
      throw ConfigError("polynomial energy degree must be >= 1, got " + std::to_string(degree));
    }
    return EnergyForm(Kind::polynomial, degree);
  }
  static EnergyForm exponential() { return EnergyForm(Kind::exponential, 0); }

  Kind kind() const { return kind_; }
  /// Polynomial degree; 1 for linear, 2 for quadratic, 0 for exponential.
  int degree() const { return degree_; }

  std::string name() const {
    switch (kind_) {
      case Kind::linear: return "linear";
      case Kind::quadratic: return "quadratic";
      case Kind::polynomial: return "polynomial(" + std::to_string(degree_) + ")";
      case Kind::exponential: return "exponential";
    }
    return "unknown";
  }

  /// F(u)
  template <typename Scalar>
  Scalar apply(Scalar u) const {
    switch (kind_) {
      case Kind::linear: return u;
      case Kind::quadratic: return u * u;
      case Kind::polynomial: return ipow(u, degree_);
      case Kind::exponential: return std::exp(checked_exp_argument(u));
    }
    return u;
  }

  /// F'(u)
  template <typename Scalar>
  Scalar derivative(Scalar u) const {
    switch (kind_) {
      case Kind::linear: return Scalar(1);
      case Kind::quadratic: return Scalar(2) * u;
      case Kind::polynomial: return Scalar(degree_) * ipow(u, degree_ - 1);
      case Kind::exponential: return std::exp(checked_exp_argument(u));
    }
    return Scalar(1);
  }

  friend bool operator==(const EnergyForm&, const EnergyForm&) = default;

 private:
  EnergyForm(Kind kind, int degree) : kind_(kind), degree_(degree) {}

  template <typename Scalar>
  static Scalar ipow(Scalar base, int exponent) {
    Scalar result(1);
    for (int i = 0; i < exponent; ++i) result *= base;
    return result;
  }

  template <typename Scalar>
  static Scalar checked_exp_argument(Scalar u) {
    if (!(u <= Scalar(kExpArgumentLimit))) {
      std::ostringstream os;
      os.precision(17);
      os << "exponential energy: argument " << u << " exceeds " << kExpArgumentLimit;
      throw OverflowError(os.str());
    }
    return u;
  }

  Kind kind_;
  int degree_;
};

template <typename Scalar>
Scalar f_apply(const EnergyForm& form, Scalar u) {
  return form.apply(u);
}

template <typename Scalar>
Scalar f_prime(const EnergyForm& form, Scalar u) {
  return form.derivative(u);
}

template <typename Scalar>
struct EnergyEval {
  Vector<Scalar> u;
  Vector<Scalar> c;
  Scalar e{};
  Scalar r{};
  Scalar e_r{};
  Matrix<Scalar> grad;
};

namespace detail {

template <typename DA, typename DZ, typename DV>
void require_energy_shapes(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DZ>& z,
                           const Eigen::MatrixBase<DV>& v, const char* op) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(op) + ": attention matrix must be square, got " +
                         shape_string(a.rows(), a.cols()));
  }
  if (v.rows() != a.rows()) {
    throw DimensionError(std::string(op) + ": value matrix " + shape_string(v.rows(), v.cols()) +
                         " does not match attention " + shape_string(a.rows(), a.cols()));
  }
  require_same_shape(z, v, op);
}

template <typename Scalar, typename DW>
Vector<Scalar> map_derivative(const EnergyForm& form, const Eigen::MatrixBase<DW>& w) {
  Vector<Scalar> out(w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) out(j) = form.derivative(w(j));
  return out;
}

}  // namespace detail

/// u_j = sum_m A(m,j) z_m . v_j, evaluated as ((A^T Z) row j) . v_j.
template <typename DA, typename DZ, typename DV>
auto alignment_scores(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DZ>& z,
                      const Eigen::MatrixBase<DV>& v) -> Vector<typename DA::Scalar> {
  detail::require_energy_shapes(a, z, v, "alignment_scores");
  using Scalar = typename DA::Scalar;
  const Matrix<Scalar> atz = a.transpose() * z;
  return atz.cwiseProduct(v).rowwise().sum();
}

/// c_j = sum_m A(m,j) sum_l A(m,l) v_l . v_j in O(n^2 d_v): G = AV, c_j = ((A^T G) row j) . v_j.
template <typename DA, typename DV>
auto reg_coeffs(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DV>& v)
    -> Vector<typename DA::Scalar> {
  using Scalar = typename DA::Scalar;
  if (a.rows() != a.cols() || v.rows() != a.rows()) {
    throw DimensionError("reg_coeffs: attention " + detail::shape_string(a.rows(), a.cols()) +
                         " incompatible with values " + detail::shape_string(v.rows(), v.cols()));
  }
  const Matrix<Scalar> g = a * v;
  return alignment_scores(a, g, v);
}

template <typename DA, typename DZ, typename DV>
auto energy(const EnergyForm& form, const Eigen::MatrixBase<DA>& a,
            const Eigen::MatrixBase<DZ>& z, const Eigen::MatrixBase<DV>& v) ->
    typename DA::Scalar {
  using Scalar = typename DA::Scalar;
  const Vector<Scalar> u = alignment_scores(a, z, v);
  Scalar total = 0;
  for (Eigen::Index j = 0; j < u.size(); ++j) total += form.apply(u(j));
  return total;
}

/// Gradient of the unregularized energy: A diag(F'(u)) V.
template <typename DA, typename DZ, typename DV>
auto energy_grad(const EnergyForm& form, const Eigen::MatrixBase<DA>& a,
                 const Eigen::MatrixBase<DZ>& z, const Eigen::MatrixBase<DV>& v)
    -> Matrix<typename DA::Scalar> {
  using Scalar = typename DA::Scalar;
  const Vector<Scalar> u = alignment_scores(a, z, v);
  return a * scale_rows(v, detail::map_derivative<Scalar>(form, u));
}

/// -<Z, AV> + 1/2 <Z, Z>; minimized exactly at Z = AV.
template <typename DZ, typename DA, typename DV>
auto linear_energy(const Eigen::MatrixBase<DZ>& z, const Eigen::MatrixBase<DA>& a,
                   const Eigen::MatrixBase<DV>& v) -> typename DZ::Scalar {
  detail::require_energy_shapes(a, z, v, "linear_energy");
  using Scalar = typename DZ::Scalar;
  const Matrix<Scalar> av = a * v;
  return -frobenius_inner(z, av) + Scalar(0.5) * frobenius_inner(z, z);
}

/// Z - AV
template <typename DZ, typename DA, typename DV>
auto linear_grad(const Eigen::MatrixBase<DZ>& z, const Eigen::MatrixBase<DA>& a,
                 const Eigen::MatrixBase<DV>& v) -> Matrix<typename DZ::Scalar> {
  detail::require_energy_shapes(a, z, v, "linear_grad");
  return z - a * v;
}

/// R(Z) = -sum_j F'(c_j) u_j(Z)
template <typename DA, typename DZ, typename DV, typename DC>
auto regularizer(const EnergyForm& form, const Eigen::MatrixBase<DA>& a,
                 const Eigen::MatrixBase<DZ>& z, const Eigen::MatrixBase<DV>& v,
                 const Eigen::MatrixBase<DC>& c) -> typename DA::Scalar {
  using Scalar = typename DA::Scalar;
  const Vector<Scalar> u = alignment_scores(a, z, v);
  if (c.size() != u.size()) {
    throw DimensionError("regularizer: expected " + std::to_string(u.size()) +
                         " coefficients, got " + std::to_string(c.size()));
  }
  return -detail::map_derivative<Scalar>(form, c).dot(u);
}

/// grad E_R = A diag(F'(u_j) - F'(c_j)) V
template <typename DA, typename DZ, typename DV, typename DC>
auto grad_regularized(const EnergyForm& form, const Eigen::MatrixBase<DA>& a,
                      const Eigen::MatrixBase<DZ>& z, const Eigen::MatrixBase<DV>& v,
                      const Eigen::MatrixBase<DC>& c) -> Matrix<typename DA::Scalar> {
  using Scalar = typename DA::Scalar;
  const Vector<Scalar> u = alignment_scores(a, z, v);
  if (c.size() != u.size()) {
    throw DimensionError("grad_regularized: expected " + std::to_string(u.size()) +
                         " coefficients, got " + std::to_string(c.size()));
  }
  const Vector<Scalar> w =
      detail::map_derivative<Scalar>(form, u) - detail::map_derivative<Scalar>(form, c);
  return a * scale_rows(v, w);
}

/// Full evaluation with precomputed coefficients c = reg_coeffs(a, v).
template <typename DA, typename DZ, typename DV, typename DC>
auto regularized_energy(const EnergyForm& form, const Eigen::MatrixBase<DA>& a,
                        const Eigen::MatrixBase<DZ>& z, const Eigen::MatrixBase<DV>& v,
                        const Eigen::MatrixBase<DC>& c) -> EnergyEval<typename DA::Scalar> {
  using Scalar = typename DA::Scalar;
  EnergyEval<Scalar> out;
  out.u = alignment_scores(a, z, v);
  if (c.size() != out.u.size()) {
    throw DimensionError("regularized_energy: expected " + std::to_string(out.u.size()) +
                         " coefficients, got " + std::to_string(c.size()));
  }
  out.c = c;
  const Vector<Scalar> fu = detail::map_derivative<Scalar>(form, out.u);
  const Vector<Scalar> fc = detail::map_derivative<Scalar>(form, out.c);
  out.e = 0;
  for (Eigen::Index j = 0; j < out.u.size(); ++j) out.e += form.apply(out.u(j));
  out.r = -fc.dot(out.u);
  out.e_r = out.e + out.r;
  out.grad = a * scale_rows(v, fu - fc);
  return out;
}

template <typename DA, typename DZ, typename DV>
auto regularized_energy(const EnergyForm& form, const Eigen::MatrixBase<DA>& a,
                        const Eigen::MatrixBase<DZ>& z, const Eigen::MatrixBase<DV>& v)
    -> EnergyEval<typename DA::Scalar> {
  return regularized_energy(form, a, z, v, reg_coeffs(a, v));
}

}  // namespace eattn
