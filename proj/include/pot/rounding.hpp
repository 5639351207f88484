#pragma once

// Feasibility rounding: projection of approximate plans onto the exact
// transportation polytope (balanced case) and onto U(r, c, s) (partial case).

#include <cmath>

#include "pot/core.hpp"

namespace pot {

// Row scaling, column scaling, then a rank-one fill of the residual. Output
// has row sums r and column sums c. Requires |r|_1 == |c|_1.
inline Matrix round_balanced(const Matrix& X, const Vector& r, const Vector& c) {
  if (X.rows() != r.size() || X.cols() != c.size()) {
    throw PotError(ErrorCode::DimensionMismatch, "plan/marginal shape mismatch");
  }
  const double sr = r.sum();
  const double sc = c.sum();
  if (std::abs(sr - sc) > 1e-12 * std::max({1.0, sr, sc})) {
    throw PotError(ErrorCode::UnbalancedMarginals,
                   "marginal masses differ: " + std::to_string(sr) + " vs " +
                       std::to_string(sc));
  }
  Matrix out = X;
  const Vector row = out.rowwise().sum();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (row(i) > 0) out.row(i) *= std::min(1.0, r(i) / row(i));
  }
  const Vector col = out.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    if (col(j) > 0) out.col(j) *= std::min(1.0, c(j) / col(j));
  }
  const Vector err_r = r - out.rowwise().sum();
  const Vector err_c = c - out.colwise().sum().transpose();
  const double total = err_r.sum();
  if (total > 0) out += (err_r * err_c.transpose()) / total;
  return out;
}

// Projects an arbitrary nonnegative matrix onto U(r, c, s): cap the total
// mass at s, clip rows then columns to their marginals, and fill the mass
// deficit with the rank-one product of the remaining slacks. Each stage
// preserves nonnegativity and never exceeds the caps, and the deficit fill
// is admissible because |r - X 1|_1 = |r|_1 - |X|_1 >= s - |X|_1.
inline TransportPlan round_pot(const Matrix& X, const Instance& in) {
  validate(in);
  if (X.rows() != in.size() || X.cols() != in.size()) {
    throw PotError(ErrorCode::DimensionMismatch,
                   "plan shape does not match the instance");
  }
  Matrix out = X;
  const double mass = out.sum();
  if (mass > 0) out *= std::min(1.0, in.s / mass);
  const Vector row = out.rowwise().sum();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (row(i) > 0) out.row(i) *= std::min(1.0, in.r(i) / row(i));
  }
  const Vector col = out.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    if (col(j) > 0) out.col(j) *= std::min(1.0, in.c(j) / col(j));
  }
  const double deficit = in.s - out.sum();
  if (deficit > 0) {
    const Vector a = (in.r - out.rowwise().sum()).cwiseMax(0.0);
    const Vector b = (in.c - out.colwise().sum().transpose()).cwiseMax(0.0);
    const double na = a.sum();
    const double nb = b.sum();
    if (na <= 0 || nb <= 0) {
      // Unreachable for validated instances: the slacks always carry at
      // least the deficit.
      throw PotError(ErrorCode::Infeasible, "deficit fill has no slack mass");
    }
    out += (deficit / (na * nb)) * (a * b.transpose());
  }
  return TransportPlan::from(std::move(out), in);
}

}  // namespace pot
