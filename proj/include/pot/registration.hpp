#pragma once

// Rigid point-cloud registration driven by partial transport: alternating
// solves on an annealed regularization with weighted-Procrustes transform
// fits.

#include <vector>

#include "pot/solvers.hpp"

namespace pot {

// Proper rigid motion y -> R y + t.
struct RigidTransform {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& y) const { return R * y + t; }

  Matrix apply_all(const Matrix& pts) const {
    if (pts.cols() != 3) {
      throw PotError(ErrorCode::DimensionMismatch, "point cloud must be N x 3");
    }
    return (pts * R.transpose()).rowwise() + t.transpose();
  }

  // (a compose b)(y) = a(b(y)).
  static RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.R = a.R * b.R;
    out.t = a.R * b.t + a.t;
    return out;
  }
};

// Weighted Procrustes fit: returns the rigid motion aligning the second
// cloud onto the first under the coupling pi. Barycenters are plan-weighted;
// the rotation is the determinant-corrected polar factor of the centered
// cross-covariance, so the output is always a proper rotation.
inline RigidTransform fit_rigid(const Matrix& pi, const Matrix& x_pts,
                                const Matrix& y_pts) {
  if (x_pts.cols() != 3 || y_pts.cols() != 3) {
    throw PotError(ErrorCode::DimensionMismatch, "point clouds must be N x 3");
  }
  if (pi.rows() != x_pts.rows() || pi.cols() != y_pts.rows()) {
    throw PotError(ErrorCode::DimensionMismatch,
                   "coupling shape does not match the clouds");
  }
  const double mass = pi.sum();
  if (!(mass > 0)) {
    throw PotError(ErrorCode::ZeroMassPlan, "coupling carries no mass");
  }
  const Eigen::Vector3d mean_x = (x_pts.transpose() * pi.rowwise().sum()) / mass;
  const Eigen::Vector3d mean_y =
      (y_pts.transpose() * pi.colwise().sum().transpose()) / mass;
  const Matrix x_hat = x_pts.rowwise() - mean_x.transpose();
  const Matrix y_hat = y_pts.rowwise() - mean_y.transpose();
  const Eigen::Matrix3d cov = x_hat.transpose() * pi * y_hat;

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sigma = svd.singularValues();
  if (!(sigma(1) > 1e-12 * std::max(sigma(0), 1e-300))) {
    throw PotError(ErrorCode::DegenerateSvd,
                   "cross-covariance has rank < 2; rotation is not determined");
  }
  const Eigen::Matrix3d U = svd.matrixU();
  const Eigen::Matrix3d V = svd.matrixV();
  const double orient = (U * V.transpose()).determinant() > 0 ? 1.0 : -1.0;
  RigidTransform out;
  out.R = U * Eigen::Vector3d(1.0, 1.0, orient).asDiagonal() * V.transpose();
  out.t = mean_x - out.R * mean_y;
  return out;
}

struct RegistrationConfig {
  double alpha = 0.4;                // transported fraction of the smaller mass
  double gamma0 = 4.4e-3;            // initial regularization
  double anneal_rate = 0.83;         // gamma multiplier per registration
  double transform_threshold = 1e-5; // stop when the increment falls below
  int max_registrations = 60;
  SolverConfig solve;

  void check() const {
    if (!(alpha > 0) || !(alpha <= 1)) {
      throw PotError(ErrorCode::InvalidArgument, "alpha must lie in (0, 1]");
    }
    if (!(gamma0 > 0)) {
      throw PotError(ErrorCode::InvalidArgument, "gamma0 must be positive");
    }
    if (!(anneal_rate > 0) || !(anneal_rate < 1)) {
      throw PotError(ErrorCode::InvalidArgument, "anneal rate must lie in (0, 1)");
    }
    if (!(transform_threshold > 0)) {
      throw PotError(ErrorCode::InvalidArgument, "threshold must be positive");
    }
    if (max_registrations < 1) {
      throw PotError(ErrorCode::InvalidArgument, "max_registrations must be >= 1");
    }
    solve.check();
  }
};

struct RegistrationRecord {
  int round = 0;
  long inner_iterations = 0;
  long accumulated_iterations = 0;
  double cost = 0.0;
  double increment = 0.0;
  double gamma = 0.0;
};

struct RegistrationResult {
  RigidTransform transform;  // maps the moving cloud onto the reference
  bool converged = false;
  std::vector<RegistrationRecord> rounds;
};

// Outer loop: squared-distance cost between the reference cloud and the
// transformed moving cloud (scaled to unit max), uniform 1/max(m,n) weights
// on both sides, budget alpha * min(m,n)/max(m,n), transform fit from the
// plan, then geometric annealing of gamma. Stops when the composed transform
// moves less than the threshold between rounds.
//
// Unequal cloud sizes are padded to a square problem with zero-mass support
// points at unit cost; rounding against the zero marginals forces the padded
// rows or columns to zero exactly.
inline RegistrationResult register_point_clouds(const Matrix& reference,
                                                const Matrix& moving,
                                                const RegistrationConfig& config,
                                                SolverKind kind) {
  if (reference.cols() != 3 || moving.cols() != 3) {
    throw PotError(ErrorCode::DimensionMismatch, "point clouds must be N x 3");
  }
  if (reference.rows() < 3 || moving.rows() < 3) {
    throw PotError(ErrorCode::EmptyInput, "need at least 3 points per cloud");
  }
  config.check();
  const Eigen::Index m = reference.rows();
  const Eigen::Index n = moving.rows();
  const Eigen::Index side = std::max(m, n);
  const double denom = static_cast<double>(side);

  Instance in;
  in.r = Vector::Zero(side);
  in.r.head(m).setConstant(1.0 / denom);
  in.c = Vector::Zero(side);
  in.c.head(n).setConstant(1.0 / denom);
  in.s = config.alpha * static_cast<double>(std::min(m, n)) / denom;
  in.C = Matrix::Ones(side, side);

  RegistrationResult result;
  double gamma = config.gamma0;
  long accumulated = 0;
  for (int round = 1; round <= config.max_registrations; ++round) {
    const Matrix current = result.transform.apply_all(moving);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        in.C(i, j) = (reference.row(i) - current.row(j)).squaredNorm();
      }
    }
    const double cmax = in.C.topLeftCorner(m, n).maxCoeff();
    if (cmax > 0) {
      in.C.topLeftCorner(m, n) /= cmax;
      in.C.rightCols(side - n).setOnes();
      in.C.bottomRows(side - m).setOnes();
    } else {
      result.converged = true;  // clouds coincide
      break;
    }

    SolverConfig solver_config = config.solve;
    solver_config.gamma_override = gamma;
    const SolveResult solved = solve(in, kind, solver_config);

    const RigidTransform increment =
        fit_rigid(solved.plan.X.topLeftCorner(m, n), reference, current);
    const RigidTransform next = RigidTransform::compose(increment, result.transform);
    const double delta = (next.R - result.transform.R).norm() +
                         (next.t - result.transform.t).norm();
    result.transform = next;
    accumulated += solved.iterations;

    RegistrationRecord rec;
    rec.round = round;
    rec.inner_iterations = solved.iterations;
    rec.accumulated_iterations = accumulated;
    rec.cost = transport_cost(in.C, solved.plan.X);
    rec.increment = delta;
    rec.gamma = gamma;
    result.rounds.push_back(rec);

    gamma *= config.anneal_rate;
    if (delta < config.transform_threshold) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace pot
