#pragma once

// Dummy-node reduction from partial transport to balanced transport on an
// (n+1)-point support, and extraction of the original block from extended
// plans.

#include "pot/core.hpp"

namespace pot {

struct ExtendedOtInstance {
  Matrix C_ext;      // (n+1) x (n+1); top-left block is C, corner is the penalty
  Vector r_ext;      // (r; |c|_1 - s)
  Vector c_ext;      // (c; |r|_1 - s)
  double penalty_A = 0.0;

  Eigen::Index original_size() const { return r_ext.size() - 1; }
};

// Builds the balanced extension. The penalty must exceed every cost entry so
// that routing mass through the dummy node is never free.
inline ExtendedOtInstance extend(const Instance& in, double penalty_A) {
  validate(in);
  if (!(penalty_A > in.max_cost())) {
    throw PotError(ErrorCode::PenaltyTooSmall,
                   "penalty must exceed max cost " + std::to_string(in.max_cost()));
  }
  const Eigen::Index n = in.size();
  ExtendedOtInstance ext;
  ext.penalty_A = penalty_A;
  ext.C_ext = Matrix::Zero(n + 1, n + 1);
  ext.C_ext.topLeftCorner(n, n) = in.C;
  ext.C_ext(n, n) = penalty_A;
  ext.r_ext = Vector(n + 1);
  ext.r_ext << in.r, std::max(in.c.sum() - in.s, 0.0);
  ext.c_ext = Vector(n + 1);
  ext.c_ext << in.c, std::max(in.r.sum() - in.s, 0.0);
  return ext;
}

struct BlockDecomposition {
  Matrix block;        // top-left n x n plan
  Vector dummy_col;    // flows into the dummy column (the extended p)
  Vector dummy_row;    // flows out of the dummy row (the extended q)
  double corner = 0.0; // dummy-to-dummy flow
};

inline BlockDecomposition extract_block(const Matrix& X_ext) {
  if (X_ext.rows() != X_ext.cols() || X_ext.rows() < 2) {
    throw PotError(ErrorCode::DimensionMismatch,
                   "extended plan must be square with side >= 2");
  }
  const Eigen::Index n = X_ext.rows() - 1;
  BlockDecomposition out;
  out.block = X_ext.topLeftCorner(n, n);
  out.dummy_col = X_ext.topRightCorner(n, 1);
  out.dummy_row = X_ext.bottomLeftCorner(1, n).transpose();
  out.corner = X_ext(n, n);
  return out;
}

}  // namespace pot
