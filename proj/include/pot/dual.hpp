#pragma once

// Entropic dual of the partial transport problem: the objective phi(z), its
// gradient, the primal map B(z), the feasibility error E and the divergence
// rho used by block updates.

#include <cmath>
#include <limits>

#include "pot/core.hpp"

namespace pot {

// Dual potentials z = (u, v, w) for the row, column and mass constraints.
struct DualPoint {
  Vector u;
  Vector v;
  double w = 0.0;

  static DualPoint zero(Eigen::Index n) {
    DualPoint z;
    z.u = Vector::Zero(n);
    z.v = Vector::Zero(n);
    z.w = 0.0;
    return z;
  }

  bool all_finite() const {
    return u.allFinite() && v.allFinite() && std::isfinite(w);
  }
};

inline DualPoint operator*(double a, const DualPoint& z) {
  return DualPoint{a * z.u, a * z.v, a * z.w};
}

inline DualPoint operator+(const DualPoint& a, const DualPoint& b) {
  return DualPoint{a.u + b.u, a.v + b.v, a.w + b.w};
}

inline DualPoint operator-(const DualPoint& a, const DualPoint& b) {
  return DualPoint{a.u - b.u, a.v - b.v, a.w - b.w};
}

// Exponents above this raise ErrorCode::Overflow instead of producing inf;
// the accelerated solver catches it and halves its step.
inline constexpr double kMaxExponent = 700.0;

// Regularized kernel in log domain. Entries -C_ij/gamma can reach -4e4 at
// experiment-scale gamma, so K itself is never materialized; exponentiation
// happens only after the potentials are added.
struct EntropicContext {
  double gamma = 0.0;
  Matrix logK;  // -C / gamma
  Vector r;     // marginals targeted by the dual (possibly mixed)
  Vector c;
  double s = 0.0;

  EntropicContext(const Matrix& C, double gamma_, Vector r_, Vector c_, double s_)
      : gamma(gamma_), r(std::move(r_)), c(std::move(c_)), s(s_) {
    if (!(gamma > 0) || !std::isfinite(gamma)) {
      throw PotError(ErrorCode::InvalidArgument, "gamma must be positive");
    }
    if (C.rows() != r.size() || C.cols() != c.size()) {
      throw PotError(ErrorCode::DimensionMismatch, "cost/marginal shape mismatch");
    }
    logK = -C / gamma;
  }

  static EntropicContext from_instance(const Instance& in, double gamma) {
    return EntropicContext(in.C, gamma, in.r, in.c, in.s);
  }

  Eigen::Index size() const { return r.size(); }
};

namespace detail {

inline void check_dual_shape(const EntropicContext& ctx, const DualPoint& z) {
  if (z.u.size() != ctx.size() || z.v.size() != ctx.size()) {
    throw PotError(ErrorCode::DimensionMismatch, "dual point shape mismatch");
  }
}

inline void check_exp_range(double max_exponent, const char* what) {
  if (!(max_exponent <= kMaxExponent)) {
    throw PotError(ErrorCode::Overflow,
                   std::string(what) + " exponent exceeds representable range");
  }
}

// Exponent matrix logK_ij + u_i + v_j + w, shared by B(z) and the gradient.
inline Matrix exponent_matrix(const EntropicContext& ctx, const DualPoint& z) {
  Matrix M = ctx.logK;
  M.colwise() += z.u;
  M.rowwise() += z.v.transpose();
  M.array() += z.w;
  return M;
}

}  // namespace detail

// B_ij(z) = exp(-C_ij/gamma + u_i + v_j + w).
inline Matrix b_matrix(const EntropicContext& ctx, const DualPoint& z) {
  detail::check_dual_shape(ctx, z);
  Matrix M = detail::exponent_matrix(ctx, z);
  detail::check_exp_range(M.maxCoeff(), "B(z)");
  return M.array().exp();
}

// phi(z) = |B(z)|_1 + sum exp(u) + sum exp(v) - <u,r> - <v,c> - w s.
inline double dual_objective(const EntropicContext& ctx, const DualPoint& z) {
  detail::check_dual_shape(ctx, z);
  detail::check_exp_range(z.u.maxCoeff(), "exp(u)");
  detail::check_exp_range(z.v.maxCoeff(), "exp(v)");
  const Matrix B = b_matrix(ctx, z);
  return B.sum() + z.u.array().exp().sum() + z.v.array().exp().sum() -
         z.u.dot(ctx.r) - z.v.dot(ctx.c) - z.w * ctx.s;
}

// Gradient of phi: d/du = B 1 + exp(u) - r, d/dv = B^T 1 + exp(v) - c,
// d/dw = |B|_1 - s. Returned in DualPoint shape.
inline DualPoint dual_gradient(const EntropicContext& ctx, const DualPoint& z) {
  detail::check_dual_shape(ctx, z);
  detail::check_exp_range(z.u.maxCoeff(), "exp(u)");
  detail::check_exp_range(z.v.maxCoeff(), "exp(v)");
  const Matrix B = b_matrix(ctx, z);
  DualPoint g;
  g.u = B.rowwise().sum() + z.u.array().exp().matrix() - ctx.r;
  g.v = B.colwise().sum().transpose() + z.v.array().exp().matrix() - ctx.c;
  g.w = B.sum() - ctx.s;
  return g;
}

// E(z) = |1^T B 1 - s| + |B 1 + exp(u) - r|_1 + |B^T 1 + exp(v) - c|_1.
// Evaluated through the gradient so it equals |grad_u|_1 + |grad_v|_1 +
// |grad_w| in the same floating order.
inline double feasibility_error(const EntropicContext& ctx, const DualPoint& z) {
  const DualPoint g = dual_gradient(ctx, z);
  return g.u.lpNorm<1>() + g.v.lpNorm<1>() + std::abs(g.w);
}

// rho(a, b) = b - a + a log(a/b); nonnegative, zero iff a == b.
inline double rho(double a, double b) {
  if (!(a > 0) || !(b > 0)) {
    throw PotError(ErrorCode::NonPositiveArgument, "rho requires a, b > 0");
  }
  return b - a + a * std::log(a / b);
}

namespace detail {

// rho extended by its limits, for internal block scoring only: rho(0, b) = b
// and rho(a, 0+) = +inf (an exp-underflowed block sum is maximally violated).
inline double rho_limit(double a, double b) {
  if (!(a > 0)) return b;
  if (!(b > 0)) return std::numeric_limits<double>::infinity();
  return rho(a, b);
}

}  // namespace detail

}  // namespace pot
