#pragma once

// Dense real-matrix kernel. Thin, shape-checked free functions over Eigen
// row-major dynamic matrices; every operation returns a fresh matrix.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "eattn/errors.hpp"

namespace eattn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using DenseMatrix = Matrix<double>;
using DenseVector = Vector<double>;

namespace detail {

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

template <typename DA, typename DB>
void require_same_shape(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
                        const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
  }
}

}  // namespace detail

template <typename DA, typename DB>
auto matmul(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b)
    -> Matrix<typename DA::Scalar> {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         detail::shape_string(a.rows(), a.cols()) + " * " +
                         detail::shape_string(b.rows(), b.cols()));
  }
  return a * b;
}

template <typename D>
auto transpose(const Eigen::MatrixBase<D>& a) -> Matrix<typename D::Scalar> {
  return a.transpose();
}

/// Sum of elementwise products; equals trace(a^T b).
template <typename DA, typename DB>
auto frobenius_inner(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) ->
    typename DA::Scalar {
  detail::require_same_shape(a, b, "frobenius_inner");
  return a.cwiseProduct(b).sum();
}

template <typename D>
auto frobenius_norm(const Eigen::MatrixBase<D>& a) -> typename D::Scalar {
  return a.norm();
}

/// alpha * x + y
template <typename DX, typename DY>
auto axpy(typename DX::Scalar alpha, const Eigen::MatrixBase<DX>& x,
          const Eigen::MatrixBase<DY>& y) -> Matrix<typename DX::Scalar> {
  detail::require_same_shape(x, y, "axpy");
  return alpha * x + y;
}

/// Scales row j of m by w(j).
template <typename DM, typename DW>
auto scale_rows(const Eigen::MatrixBase<DM>& m, const Eigen::MatrixBase<DW>& w)
    -> Matrix<typename DM::Scalar> {
  if (w.size() != m.rows()) {
    throw DimensionError("scale_rows: " + std::to_string(w.size()) + " weights for " +
                         std::to_string(m.rows()) + " rows");
  }
  return w.asDiagonal() * m;
}

template <typename D>
bool all_finite(const Eigen::MatrixBase<D>& m) {
  return m.allFinite();
}

}  // namespace eattn
