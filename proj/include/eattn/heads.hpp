#pragma once

// Attention heads built on the energy dynamics. The linear head returns AV in
// closed form; non-linear heads start from Z0 = AV (optionally perturbed) and
// descend on the regularized energy.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eattn/attention.hpp"
#include "eattn/dynamics.hpp"
#include "eattn/energy.hpp"
#include "eattn/random.hpp"

namespace eattn {

template <typename Scalar>
struct HeadSpec {
  Eigen::Index d = 1;
  Eigen::Index d_k = 1;
  Eigen::Index d_v = 1;
  EnergyForm form = EnergyForm::linear();
  DescentConfig<Scalar> descent;
  // Z0 = AV + perturb_sigma * N with N drawn from GaussianSource(seed).
  // Zero starts exactly at the stationary point.
  Scalar perturb_sigma = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (d < 1 || d_k < 1 || d_v < 1) throw ConfigError("HeadSpec: dimensions must be >= 1");
    if (!(perturb_sigma >= 0)) throw ConfigError("HeadSpec: perturb_sigma must be >= 0");
    descent.validate();
  }
};

template <typename Scalar>
struct HeadOutput {
  Matrix<Scalar> z;
  DescentTrace<Scalar> trace;
  AttentionContext<Scalar> context;
};

template <typename Scalar>
using HeadDefinition = std::pair<ProjectionWeights<Scalar>, HeadSpec<Scalar>>;

namespace detail {

template <typename Scalar, typename DX>
AttentionContext<Scalar> head_context(const Eigen::MatrixBase<DX>& x,
                                      const ProjectionWeights<Scalar>& w,
                                      const HeadSpec<Scalar>& spec) {
  spec.validate();
  w.validate();
  if (w.d() != spec.d || w.d_k() != spec.d_k || w.d_v() != spec.d_v) {
    throw DimensionError("head: weights are " + std::to_string(w.d()) + "/" +
                         std::to_string(w.d_k()) + "/" + std::to_string(w.d_v()) +
                         " but spec expects d/d_k/d_v = " + std::to_string(spec.d) + "/" +
                         std::to_string(spec.d_k) + "/" + std::to_string(spec.d_v));
  }
  if (x.cols() != spec.d) {
    throw DimensionError("head: token width " + std::to_string(x.cols()) + " but d = " +
                         std::to_string(spec.d));
  }
  return build_context(x, w);
}

}  // namespace detail

/// Closed-form head: Z = AV, no descent.
template <typename DX, typename Scalar = typename DX::Scalar>
HeadOutput<Scalar> linear_head(const Eigen::MatrixBase<DX>& x, const ProjectionWeights<Scalar>& w,
                               const HeadSpec<Scalar>& spec) {
  if (spec.form.kind() != EnergyForm::Kind::linear) {
    throw ConfigError("linear_head: form is " + spec.form.name());
  }
  HeadOutput<Scalar> out;
  out.context = detail::head_context(x, w, spec);
  out.z = out.context.av;
  const auto& ctx = out.context;
  out.trace.energies.push_back(linear_energy(out.z, ctx.a, ctx.v));
  out.trace.grad_norms.push_back(linear_grad(out.z, ctx.a, ctx.v).norm());
  out.trace.converged = true;
  return out;
}

template <typename DX, typename Scalar = typename DX::Scalar>
HeadOutput<Scalar> nonlinear_head(const Eigen::MatrixBase<DX>& x,
                                  const ProjectionWeights<Scalar>& w,
                                  const HeadSpec<Scalar>& spec) {
  if (spec.form.kind() == EnergyForm::Kind::linear) return linear_head(x, w, spec);

  HeadOutput<Scalar> out;
  out.context = detail::head_context(x, w, spec);
  const auto& ctx = out.context;
  Matrix<Scalar> z0 = ctx.av;
  if (spec.perturb_sigma > 0) {
    GaussianSource noise(spec.seed);
    z0 += spec.perturb_sigma * noise.matrix(ctx.n(), ctx.d_v(), 1.0).template cast<Scalar>();
  }
  auto result = descend(spec.form, ctx, z0, spec.descent);
  out.z = std::move(result.z);
  out.trace = std::move(result.trace);
  return out;
}

/// Runs every head on the same tokens, in order.
template <typename DX, typename Scalar = typename DX::Scalar>
std::vector<HeadOutput<Scalar>> run_heads(const Eigen::MatrixBase<DX>& x,
                                          const std::vector<HeadDefinition<Scalar>>& heads) {
  if (heads.empty()) throw ConfigError("multi_head: no heads given");
  const Eigen::Index d = heads.front().second.d;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    if (heads[h].second.d != d || heads[h].first.d() != d) {
      throw DimensionError("multi_head: head " + std::to_string(h) +
                           " has embedding width inconsistent with head 0 (d = " +
                           std::to_string(d) + ")");
    }
  }
  std::vector<HeadOutput<Scalar>> outputs;
  outputs.reserve(heads.size());
  for (const auto& [w, spec] : heads) outputs.push_back(nonlinear_head(x, w, spec));
  return outputs;
}

/// Head outputs concatenated along the feature axis, n x (sum of d_v).
template <typename Scalar>
Matrix<Scalar> concat_heads(const std::vector<HeadOutput<Scalar>>& outputs) {
  Eigen::Index cols = 0;
  for (const auto& o : outputs) cols += o.z.cols();
  const Eigen::Index rows = outputs.empty() ? 0 : outputs.front().z.rows();
  Matrix<Scalar> out(rows, cols);
  Eigen::Index offset = 0;
  for (const auto& o : outputs) {
    out.middleCols(offset, o.z.cols()) = o.z;
    offset += o.z.cols();
  }
  return out;
}

template <typename DX, typename Scalar = typename DX::Scalar>
Matrix<Scalar> multi_head(const Eigen::MatrixBase<DX>& x,
                          const std::vector<HeadDefinition<Scalar>>& heads) {
  return concat_heads(run_heads(x, heads));
}

}  // namespace eattn
