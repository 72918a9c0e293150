#pragma once

// Independent checks for the energy module: central-difference gradients,
// literal index-sum evaluation, and the stationarity condition at Z = AV.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "eattn/attention.hpp"
#include "eattn/dense.hpp"
#include "eattn/energy.hpp"

namespace eattn {

/// Largest token count accepted by bruteforce_energy.
inline constexpr Eigen::Index kBruteForceMaxTokens = 16;

template <typename Scalar>
struct GradCheckReport {
  Scalar max_abs_err = 0;
  Scalar max_rel_err = 0;
  std::pair<Eigen::Index, Eigen::Index> worst_index{0, 0};
  Scalar h = 0;
  bool pass = false;
};

template <typename Scalar>
struct StationarityReport {
  Scalar grad_norm_at_av = 0;
  Scalar scale = 1;  // 1 + |AV|_F
  bool pass = false;
};

template <typename Scalar>
struct BruteForceEval {
  Scalar e = 0;
  Scalar r = 0;
  Scalar e_r = 0;
  Vector<Scalar> u;
  Vector<Scalar> c;
  Matrix<Scalar> grad;
};

enum class Regularization { included, omitted };

/// Central differences with per-entry step h * (1 + |z(i,k)|).
template <typename Scalar, typename EnergyFn>
Matrix<Scalar> fd_gradient(EnergyFn&& energy_fn, const Matrix<Scalar>& z, Scalar h) {
  if (!(h > 0)) throw std::invalid_argument("fd_gradient: step must be positive");
  Matrix<Scalar> probe = z;
  Matrix<Scalar> out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      const Scalar original = z(i, k);
      const Scalar step = h * (Scalar(1) + std::abs(original));
      probe(i, k) = original + step;
      const Scalar plus = energy_fn(static_cast<const Matrix<Scalar>&>(probe));
      probe(i, k) = original - step;
      const Scalar minus = energy_fn(static_cast<const Matrix<Scalar>&>(probe));
      probe(i, k) = original;
      if (!std::isfinite(static_cast<double>(plus)) || !std::isfinite(static_cast<double>(minus))) {
        std::ostringstream os;
        os << "fd_gradient: non-finite energy probing entry (" << i << ", " << k << ")";
        throw NonFiniteError(os.str());
      }
      out(i, k) = (plus - minus) / (Scalar(2) * step);
    }
  }
  return out;
}

/// Compares a claimed gradient against central differences of energy_fn.
/// Relative error per entry uses max(1, |analytic|) as denominator.
template <typename Scalar, typename EnergyFn>
GradCheckReport<Scalar> check_gradient(const Matrix<Scalar>& analytic, EnergyFn&& energy_fn,
                                       const Matrix<Scalar>& z, Scalar h, Scalar tol) {
  detail::require_same_shape(analytic, z, "check_gradient");
  const Matrix<Scalar> numeric = fd_gradient<Scalar>(energy_fn, z, h);
  GradCheckReport<Scalar> report;
  report.h = h;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      const Scalar abs_err = std::abs(analytic(i, k) - numeric(i, k));
      const Scalar rel_err = abs_err / std::max(Scalar(1), std::abs(analytic(i, k)));
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
      if (rel_err > report.max_rel_err) {
        report.max_rel_err = rel_err;
        report.worst_index = {i, k};
      }
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

/// grad_regularized against central differences of the regularized energy.
template <typename Scalar>
GradCheckReport<Scalar> gradcheck(const EnergyForm& form, const Matrix<Scalar>& a,
                                  const Matrix<Scalar>& v, const Matrix<Scalar>& z, Scalar h,
                                  Scalar tol) {
  const Vector<Scalar> c = reg_coeffs(a, v);
  auto e_r = [&](const Matrix<Scalar>& probe) {
    return energy(form, a, probe, v) + regularizer(form, a, probe, v, c);
  };
  return check_gradient<Scalar>(grad_regularized(form, a, z, v, c), e_r, z, h, tol);
}

/// linear_grad against central differences of linear_energy.
template <typename Scalar>
GradCheckReport<Scalar> linear_gradcheck(const Matrix<Scalar>& a, const Matrix<Scalar>& v,
                                         const Matrix<Scalar>& z, Scalar h, Scalar tol) {
  auto fn = [&](const Matrix<Scalar>& probe) { return linear_energy(probe, a, v); };
  return check_gradient<Scalar>(linear_grad(z, a, v), fn, z, h, tol);
}

/// Gradient norm at Z = AV against tol * (1 + |AV|_F).
template <typename Scalar>
StationarityReport<Scalar> stationarity_check(const EnergyForm& form, const Matrix<Scalar>& a,
                                              const Matrix<Scalar>& v, Scalar tol,
                                              Regularization reg = Regularization::included) {
  const Matrix<Scalar> av = attention_output(a, v);
  const Matrix<Scalar> g = reg == Regularization::included
                               ? grad_regularized(form, a, av, v, reg_coeffs(a, v))
                               : energy_grad(form, a, av, v);
  StationarityReport<Scalar> report;
  report.grad_norm_at_av = g.norm();
  report.scale = Scalar(1) + av.norm();
  report.pass = report.grad_norm_at_av <= tol * report.scale;
  return report;
}

template <typename Scalar>
StationarityReport<Scalar> linear_stationarity_check(const Matrix<Scalar>& a,
                                                     const Matrix<Scalar>& v, Scalar tol) {
  const Matrix<Scalar> av = attention_output(a, v);
  StationarityReport<Scalar> report;
  report.grad_norm_at_av = linear_grad(av, a, v).norm();
  report.scale = Scalar(1) + av.norm();
  report.pass = report.grad_norm_at_av <= tol * report.scale;
  return report;
}

/// Every quantity of the regularized energy by literal index sums. The
/// regularizer is summed over (i, j) pairs directly rather than through u.
template <typename Scalar>
BruteForceEval<Scalar> bruteforce_energy(const EnergyForm& form, const Matrix<Scalar>& a,
                                         const Matrix<Scalar>& z, const Matrix<Scalar>& v) {
  detail::require_energy_shapes(a, z, v, "bruteforce_energy");
  const Eigen::Index n = a.rows();
  const Eigen::Index dv = v.cols();
  if (n > kBruteForceMaxTokens) {
    throw std::length_error("bruteforce_energy: n = " + std::to_string(n) + " exceeds cap of " +
                            std::to_string(kBruteForceMaxTokens));
  }
  BruteForceEval<Scalar> out;
  out.u = Vector<Scalar>::Zero(n);
  out.c = Vector<Scalar>::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index m = 0; m < n; ++m) {
      Scalar zv = 0;
      for (Eigen::Index l = 0; l < dv; ++l) zv += z(m, l) * v(j, l);
      out.u(j) += a(m, j) * zv;

      Scalar inner = 0;
      for (Eigen::Index l = 0; l < n; ++l) {
        Scalar vv = 0;
        for (Eigen::Index k = 0; k < dv; ++k) vv += v(l, k) * v(j, k);
        inner += a(m, l) * vv;
      }
      out.c(j) += a(m, j) * inner;
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) out.e += form.apply(out.u(j));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Scalar zv = 0;
      for (Eigen::Index k = 0; k < dv; ++k) zv += z(i, k) * v(j, k);
      out.r -= form.derivative(out.c(j)) * a(i, j) * zv;
    }
  }
  out.e_r = out.e + out.r;
  out.grad = Matrix<Scalar>::Zero(n, dv);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < dv; ++k) {
      for (Eigen::Index j = 0; j < n; ++j) {
        out.grad(i, k) +=
            (form.derivative(out.u(j)) - form.derivative(out.c(j))) * a(i, j) * v(j, k);
      }
    }
  }
  return out;
}

}  // namespace eattn
