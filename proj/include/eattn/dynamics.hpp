#pragma once

// Gradient-descent dynamics on the regularized energy, plus the linear
// (trace) energy flow and the verbatim Hebbian drift update.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eattn/attention.hpp"
#include "eattn/energy.hpp"

namespace eattn {

/// Consecutive energy increases tolerated before a run is flagged divergent.
inline constexpr int kDivergenceWindow = 10;
/// Step halvings attempted per iteration when backtracking.
inline constexpr int kMaxHalvings = 60;
/// Sufficient-decrease constant for the backtracking acceptance test.
inline constexpr double kArmijoConstant = 1e-4;

template <typename Scalar>
struct DescentConfig {
  Scalar eta = Scalar(0.01);
  int max_iters = 100;
  Scalar grad_tol = Scalar(1e-8);
  std::optional<Scalar> clip_norm;
  // Each iteration starts from eta and halves it until the step gives
  // sufficient decrease. When false, eta is used verbatim.
  bool backtracking = true;

  void validate() const {
    if (!(eta > 0) || !std::isfinite(static_cast<double>(eta))) {
      throw ConfigError("descent: eta must be a positive finite number");
    }
    if (max_iters < 1) throw ConfigError("descent: max_iters must be >= 1");
    if (!(grad_tol >= 0)) throw ConfigError("descent: grad_tol must be >= 0");
    if (clip_norm && !(*clip_norm > 0)) throw ConfigError("descent: clip_norm must be > 0");
  }
};

template <typename Scalar>
struct DescentTrace {
  std::vector<Scalar> energies;    // one entry per iterate, including the start
  std::vector<Scalar> grad_norms;  // unclipped gradient norms, same length
  int iters = 0;
  bool converged = false;
  bool diverged = false;
};

template <typename Scalar>
struct DescentResult {
  Matrix<Scalar> z;
  DescentTrace<Scalar> trace;
};

template <typename Scalar>
struct StepResult {
  Matrix<Scalar> z_next;
  Scalar grad_norm;
};

/// Rescales g onto the clip_norm ball when it lies outside.
template <typename Scalar>
Matrix<Scalar> clip_gradient(Matrix<Scalar> g, const std::optional<Scalar>& clip_norm) {
  if (clip_norm) {
    const Scalar norm = g.norm();
    if (norm > *clip_norm) g *= *clip_norm / norm;
  }
  return g;
}

/// One fixed-size step z - eta * clip(grad E_R(z)).
template <typename Scalar, typename DC>
StepResult<Scalar> descend_step(const EnergyForm& form, const AttentionContext<Scalar>& ctx,
                                const Matrix<Scalar>& z, const Eigen::MatrixBase<DC>& c,
                                const DescentConfig<Scalar>& config) {
  config.validate();
  Matrix<Scalar> g = grad_regularized(form, ctx.a, z, ctx.v, c);
  if (!g.allFinite()) throw NonFiniteError("descend_step: gradient is not finite");
  const Scalar grad_norm = g.norm();
  g = clip_gradient(std::move(g), config.clip_norm);
  return {z - config.eta * g, grad_norm};
}

namespace detail {

template <typename Scalar>
struct Sample {
  Scalar energy;
  Matrix<Scalar> grad;
};

template <typename Scalar, typename Eval>
std::optional<Sample<Scalar>> try_sample(Eval& eval, const Matrix<Scalar>& z) {
  try {
    Sample<Scalar> s = eval(z);
    if (!std::isfinite(static_cast<double>(s.energy)) || !s.grad.allFinite()) return std::nullopt;
    return s;
  } catch (const OverflowError&) {
    return std::nullopt;
  }
}

// eval(z) -> Sample{energy, grad}. The starting point must evaluate cleanly;
// later trial points that overflow count as rejected (backtracking) or
// divergence (fixed step).
template <typename Scalar, typename Eval>
DescentResult<Scalar> run_descent(Eval eval, Matrix<Scalar> z, const DescentConfig<Scalar>& config) {
  config.validate();
  DescentResult<Scalar> out;
  auto& trace = out.trace;

  Sample<Scalar> current = eval(z);
  if (!std::isfinite(static_cast<double>(current.energy)) || !current.grad.allFinite()) {
    throw NonFiniteError("descent: energy or gradient not finite at the starting point");
  }
  Scalar grad_norm = current.grad.norm();
  trace.energies.push_back(current.energy);
  trace.grad_norms.push_back(grad_norm);

  int increases = 0;
  while (true) {
    if (grad_norm <= config.grad_tol) {
      trace.converged = true;
      break;
    }
    if (trace.iters >= config.max_iters) break;

    const Matrix<Scalar> direction = clip_gradient<Scalar>(current.grad, config.clip_norm);
    const Scalar slope = current.grad.cwiseProduct(direction).sum();
    Scalar eta = config.eta;
    Matrix<Scalar> z_next;
    std::optional<Sample<Scalar>> next;
    for (int halving = 0; halving <= kMaxHalvings; ++halving, eta /= 2) {
      z_next = z - eta * direction;
      next = try_sample<Scalar>(eval, z_next);
      if (!config.backtracking) break;
      if (next && next->energy <= current.energy - Scalar(kArmijoConstant) * eta * slope) break;
      next.reset();
    }
    if (!next) {
      // Fixed step produced a non-finite value; with backtracking no step
      // could be found, so the run stalls without a divergence flag.
      trace.diverged = !config.backtracking;
      break;
    }

    increases = next->energy > current.energy ? increases + 1 : 0;
    z = std::move(z_next);
    current = std::move(*next);
    grad_norm = current.grad.norm();
    ++trace.iters;
    trace.energies.push_back(current.energy);
    trace.grad_norms.push_back(grad_norm);
    if (increases >= kDivergenceWindow) {
      trace.diverged = true;
      break;
    }
  }
  out.z = std::move(z);
  return out;
}

}  // namespace detail

/// Descent on E_R from z0 until the gradient norm reaches grad_tol or
/// max_iters steps have been taken.
template <typename Scalar>
DescentResult<Scalar> descend(const EnergyForm& form, const AttentionContext<Scalar>& ctx,
                              const Matrix<Scalar>& z0, const DescentConfig<Scalar>& config) {
  detail::require_energy_shapes(ctx.a, z0, ctx.v, "descend");
  const Vector<Scalar> c = reg_coeffs(ctx.a, ctx.v);
  auto eval = [&](const Matrix<Scalar>& z) {
    EnergyEval<Scalar> ev = regularized_energy(form, ctx.a, z, ctx.v, c);
    return detail::Sample<Scalar>{ev.e_r, std::move(ev.grad)};
  };
  return detail::run_descent<Scalar>(eval, z0, config);
}

/// Descent on -<Z, AV> + 1/2 |Z|^2: z <- z - eta (z - AV).
template <typename Scalar>
DescentResult<Scalar> linear_descent(const AttentionContext<Scalar>& ctx, const Matrix<Scalar>& z0,
                                     const DescentConfig<Scalar>& config) {
  detail::require_energy_shapes(ctx.a, z0, ctx.v, "linear_descent");
  auto eval = [&](const Matrix<Scalar>& z) {
    return detail::Sample<Scalar>{
        -frobenius_inner(z, ctx.av) + Scalar(0.5) * frobenius_inner(z, z), z - ctx.av};
  };
  return detail::run_descent<Scalar>(eval, z0, config);
}

/// z + eta * AV. Constant drift; it has no fixed point unless AV = 0.
template <typename Scalar>
Matrix<Scalar> hebbian_update(const AttentionContext<Scalar>& ctx, const Matrix<Scalar>& z,
                              Scalar eta) {
  return axpy(eta, ctx.av, z);
}

}  // namespace eattn
