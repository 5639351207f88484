#pragma once

// Exact partial-transport solutions on tiny instances via the slack-variable
// linear program and a dense two-phase simplex with Bland's rule. Ground
// truth for approximation tests; not a production LP solver.

#include <numeric>
#include <vector>

#include "pot/core.hpp"

namespace pot {

// min <d, x> s.t. A x = b, x >= 0 with x = (vec(X) row-major; p; q),
// b = (r; c; s). Plan columns carry three unit entries (row, column, mass),
// slack columns one.
struct LpForm {
  Matrix A;  // (2n+1) x (n^2 + 2n)
  Vector b;
  Vector d;
};

inline LpForm lp_form(const Instance& in) {
  validate(in);
  const Eigen::Index n = in.size();
  const Eigen::Index cols = n * n + 2 * n;
  LpForm lp;
  lp.A = Matrix::Zero(2 * n + 1, cols);
  lp.b = Vector(2 * n + 1);
  lp.d = Vector::Zero(cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index col = i * n + j;
      lp.A(i, col) = 1.0;          // row-sum constraint
      lp.A(n + j, col) = 1.0;      // column-sum constraint
      lp.A(2 * n, col) = 1.0;      // total-mass constraint
      lp.d(col) = in.C(i, j);
    }
    lp.A(i, n * n + i) = 1.0;          // source slack p_i
    lp.A(n + i, n * n + n + i) = 1.0;  // target slack q_i
  }
  lp.b << in.r, in.c, in.s;
  return lp;
}

namespace detail {

inline constexpr double kPivotTol = 1e-10;

// Dense tableau simplex, min cost (Ax = b, x >= 0, b >= 0). Entering and
// leaving variables follow Bland's least-index rule; degeneracy is common on
// transportation polytopes.
class SimplexTableau {
 public:
  SimplexTableau(const Matrix& A, const Vector& b)
      : m_(A.rows()), n_(A.cols()), T_(A.rows(), A.cols() + A.rows() + 1) {
    T_ << A, Matrix::Identity(m_, m_), b;
    basis_.resize(m_);
    std::iota(basis_.begin(), basis_.end(), static_cast<int>(n_));
  }

  // Minimizes cost over the first `limit` columns, starting from the current
  // basis. The cost vector must cover every tableau column.
  void run(const Vector& cost, Eigen::Index limit) {
    while (true) {
      Vector cb(m_);
      for (Eigen::Index r = 0; r < m_; ++r) cb(r) = cost(basis_[r]);
      const Vector reduced =
          cost.head(limit) - T_.leftCols(limit).transpose() * cb;
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < limit; ++j) {
        if (reduced(j) < -kPivotTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return;  // optimal
      Eigen::Index leave = -1;
      double best_ratio = 0.0;
      for (Eigen::Index r = 0; r < m_; ++r) {
        const double a = T_(r, enter);
        if (a <= kPivotTol) continue;
        const double ratio = rhs(r) / a;
        if (leave < 0 || ratio < best_ratio - kPivotTol ||
            (ratio < best_ratio + kPivotTol && basis_[r] < basis_[leave])) {
          leave = r;
          best_ratio = ratio;
        }
      }
      if (leave < 0) {
        throw PotError(ErrorCode::Infeasible, "unbounded linear program");
      }
      pivot(leave, enter);
    }
  }

  double phase1_value() const {
    double total = 0.0;
    for (Eigen::Index r = 0; r < m_; ++r) {
      if (basis_[r] >= n_) total += rhs(r);
    }
    return total;
  }

  // Pivots artificial variables out of the basis where possible; rows that
  // cannot pivot are redundant constraints and stay parked at zero.
  void drive_out_artificials() {
    for (Eigen::Index r = 0; r < m_; ++r) {
      if (basis_[r] < n_) continue;
      for (Eigen::Index j = 0; j < n_; ++j) {
        if (std::abs(T_(r, j)) > kPivotTol) {
          pivot(r, j);
          break;
        }
      }
    }
  }

  Vector solution() const {
    Vector x = Vector::Zero(n_);
    for (Eigen::Index r = 0; r < m_; ++r) {
      if (basis_[r] < n_) x(basis_[r]) = rhs(r);
    }
    return x;
  }

  Eigen::Index num_structural() const { return n_; }
  Eigen::Index num_rows() const { return m_; }

 private:
  double rhs(Eigen::Index r) const { return T_(r, T_.cols() - 1); }

  void pivot(Eigen::Index row, Eigen::Index col) {
    T_.row(row) /= T_(row, col);
    for (Eigen::Index r = 0; r < m_; ++r) {
      if (r == row) continue;
      const double factor = T_(r, col);
      if (factor != 0.0) T_.row(r) -= factor * T_.row(row);
    }
    basis_[row] = static_cast<int>(col);
  }

  Eigen::Index m_;
  Eigen::Index n_;
  Matrix T_;
  std::vector<int> basis_;
};

inline Vector simplex_solve(const Matrix& A, const Vector& b, const Vector& cost) {
  SimplexTableau tab(A, b);
  const Eigen::Index n = A.cols();
  const Eigen::Index m = A.rows();
  Vector phase1 = Vector::Zero(n + m);
  phase1.tail(m).setOnes();
  tab.run(phase1, n + m);
  if (tab.phase1_value() > 1e-8 * std::max(1.0, b.lpNorm<1>())) {
    throw PotError(ErrorCode::Infeasible, "phase 1 left positive artificials");
  }
  tab.drive_out_artificials();
  Vector phase2 = Vector::Zero(n + m);
  phase2.head(n) = cost;
  tab.run(phase2, n);  // artificials may not re-enter
  Vector x = tab.solution();
  if ((A * x - b).lpNorm<Eigen::Infinity>() > 1e-7 * std::max(1.0, b.lpNorm<1>())) {
    throw PotError(ErrorCode::Infeasible, "simplex result violates constraints");
  }
  return x;
}

}  // namespace detail

struct OracleSolution {
  double value = 0.0;
  Matrix plan;
};

inline constexpr Eigen::Index kOracleMaxSize = 15;

// Vertex-optimal solution of the slack-variable program. Dense tableau scale
// only; callers should normalize costs to unit max first.
inline OracleSolution solve_exact(const Instance& in) {
  validate(in);
  const Eigen::Index n = in.size();
  if (n > kOracleMaxSize) {
    throw PotError(ErrorCode::SizeLimitExceeded,
                   "oracle supports n <= " + std::to_string(kOracleMaxSize));
  }
  const LpForm lp = lp_form(in);
  const Vector x = detail::simplex_solve(lp.A, lp.b, lp.d);
  OracleSolution out;
  out.plan = Matrix(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out.plan(i, j) = std::max(x(i * n + j), 0.0);
    }
  }
  out.value = lp.d.dot(x);
  return out;
}

}  // namespace pot
