#pragma once

// Scaled dot-product attention: projections, scores, row softmax and the
// attention output AV.

#include <cmath>
#include <string>

#include "eattn/dense.hpp"

namespace eattn {

template <typename Scalar>
struct ProjectionWeights {
  Matrix<Scalar> w_q;  // d x d_k
  Matrix<Scalar> w_k;  // d x d_k
  Matrix<Scalar> w_v;  // d x d_v

  Eigen::Index d() const { return w_q.rows(); }
  Eigen::Index d_k() const { return w_q.cols(); }
  Eigen::Index d_v() const { return w_v.cols(); }

  void validate() const {
    if (w_k.rows() != w_q.rows() || w_v.rows() != w_q.rows()) {
      throw DimensionError("ProjectionWeights: row counts differ (" +
                           std::to_string(w_q.rows()) + ", " + std::to_string(w_k.rows()) +
                           ", " + std::to_string(w_v.rows()) + ")");
    }
    if (w_k.cols() != w_q.cols()) {
      throw DimensionError("ProjectionWeights: w_q and w_k column counts differ");
    }
    if (w_q.size() == 0 || w_v.size() == 0) {
      throw DimensionError("ProjectionWeights: empty weight matrix");
    }
  }
};

/// Per-head attention quantities. Built once by build_context and read-only after.
template <typename Scalar>
struct AttentionContext {
  Matrix<Scalar> q;   // n x d_k
  Matrix<Scalar> k;   // n x d_k
  Matrix<Scalar> v;   // n x d_v
  Matrix<Scalar> a;   // n x n, row-stochastic
  Matrix<Scalar> av;  // n x d_v

  Eigen::Index n() const { return a.rows(); }
  Eigen::Index d_v() const { return v.cols(); }
};

template <typename Scalar>
struct Projections {
  Matrix<Scalar> q;
  Matrix<Scalar> k;
  Matrix<Scalar> v;
};

template <typename DX, typename Scalar = typename DX::Scalar>
Projections<Scalar> project(const Eigen::MatrixBase<DX>& x, const ProjectionWeights<Scalar>& w) {
  w.validate();
  if (x.cols() != w.d()) {
    throw DimensionError("project: token width " + std::to_string(x.cols()) +
                         " does not match weight rows " + std::to_string(w.d()));
  }
  return {matmul(x, w.w_q), matmul(x, w.w_k), matmul(x, w.w_v)};
}

/// S(m, j) = q_m . k_j / sqrt(d_k)
template <typename DQ, typename DK>
auto scaled_scores(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DK>& k,
                   Eigen::Index d_k) -> Matrix<typename DQ::Scalar> {
  using Scalar = typename DQ::Scalar;
  if (d_k <= 0) throw DimensionError("scaled_scores: d_k must be positive");
  if (q.cols() != d_k || k.cols() != d_k) {
    throw DimensionError("scaled_scores: expected " + std::to_string(d_k) +
                         " columns, got " + detail::shape_string(q.rows(), q.cols()) +
                         " and " + detail::shape_string(k.rows(), k.cols()));
  }
  return (q * k.transpose()) / std::sqrt(static_cast<Scalar>(d_k));
}

/// Softmax of each row, shifted by the row maximum before exponentiating.
template <typename DS>
auto row_softmax(const Eigen::MatrixBase<DS>& s) -> Matrix<typename DS::Scalar> {
  using Scalar = typename DS::Scalar;
  Matrix<Scalar> out(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Scalar row_max = s.row(i).maxCoeff();
    Scalar partition = 0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      out(i, j) = std::exp(s(i, j) - row_max);
      partition += out(i, j);
    }
    out.row(i) /= partition;
  }
  return out;
}

template <typename DA, typename DV>
auto attention_output(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DV>& v)
    -> Matrix<typename DA::Scalar> {
  if (a.rows() != a.cols()) {
    throw DimensionError("attention_output: attention matrix must be square, got " +
                         detail::shape_string(a.rows(), a.cols()));
  }
  return matmul(a, v);
}

template <typename DX, typename Scalar = typename DX::Scalar>
AttentionContext<Scalar> build_context(const Eigen::MatrixBase<DX>& x,
                                       const ProjectionWeights<Scalar>& w) {
  auto [q, k, v] = project(x, w);
  AttentionContext<Scalar> ctx;
  ctx.a = row_softmax(scaled_scores(q, k, w.d_k()));
  ctx.av = attention_output(ctx.a, v);
  ctx.q = std::move(q);
  ctx.k = std::move(k);
  ctx.v = std::move(v);
  return ctx;
}

/// Context for an externally supplied attention matrix and value matrix.
template <typename Scalar>
AttentionContext<Scalar> context_from(Matrix<Scalar> a, Matrix<Scalar> v) {
  AttentionContext<Scalar> ctx;
  ctx.av = attention_output(a, v);
  ctx.a = std::move(a);
  ctx.v = std::move(v);
  return ctx;
}

}  // namespace eattn
