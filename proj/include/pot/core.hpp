#pragma once

// Problem instances, transport plans, solver configuration and run traces
// shared by every solver in the library.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pot {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorCode {
  DimensionMismatch,
  NegativeEntry,
  NonFiniteEntry,
  BudgetExceedsMass,
  Overflow,
  NonPositiveArgument,
  DegenerateInstance,
  PenaltyTooSmall,
  UnbalancedMarginals,
  ZeroEntropy,
  Infeasible,
  SizeLimitExceeded,
  ZeroMassPlan,
  DegenerateSvd,
  EmptyInput,
  InvalidArgument,
  IoFailure,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::BudgetExceedsMass: return "BudgetExceedsMass";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::NonPositiveArgument: return "NonPositiveArgument";
    case ErrorCode::DegenerateInstance: return "DegenerateInstance";
    case ErrorCode::PenaltyTooSmall: return "PenaltyTooSmall";
    case ErrorCode::UnbalancedMarginals: return "UnbalancedMarginals";
    case ErrorCode::ZeroEntropy: return "ZeroEntropy";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::SizeLimitExceeded: return "SizeLimitExceeded";
    case ErrorCode::ZeroMassPlan: return "ZeroMassPlan";
    case ErrorCode::DegenerateSvd: return "DegenerateSvd";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

class PotError : public std::runtime_error {
 public:
  PotError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct Violation {
  ErrorCode code;
  std::string detail;
};

// Thrown by validate(); carries every violated invariant, not just the first.
class ValidationError : public PotError {
 public:
  explicit ValidationError(std::vector<Violation> violations)
      : PotError(violations.empty() ? ErrorCode::InvalidArgument
                                    : violations.front().code,
                 describe(violations)),
        violations_(std::move(violations)) {}

  const std::vector<Violation>& violations() const { return violations_; }

 private:
  static std::string describe(const std::vector<Violation>& vs) {
    std::string msg = "invalid instance";
    for (const auto& v : vs) {
      msg += "; ";
      msg += error_code_name(v.code);
      msg += " (" + v.detail + ")";
    }
    return msg;
  }

  std::vector<Violation> violations_;
};

// A partial transport problem: marginals r, c, ground cost C and budget s.
// Feasible plans satisfy X 1 <= r, X^T 1 <= c, 1^T X 1 = s.
struct Instance {
  Vector r;
  Vector c;
  Matrix C;
  double s = 0.0;

  Eigen::Index size() const { return r.size(); }
  double source_mass() const { return r.sum(); }
  double target_mass() const { return c.sum(); }
  double max_cost() const { return C.size() > 0 ? C.maxCoeff() : 0.0; }
};

namespace detail {

inline bool all_finite(const Vector& x) { return x.allFinite(); }
inline bool all_finite(const Matrix& x) { return x.allFinite(); }

}  // namespace detail

// Budget slack: experiment pipelines compute s as a product, so an instance
// with s == min mass up to rounding must still validate.
inline constexpr double kBudgetSlack = 1e-12;

inline std::vector<Violation> validation_report(const Instance& in) {
  std::vector<Violation> out;
  const Eigen::Index n = in.r.size();
  if (n == 0) {
    out.push_back({ErrorCode::EmptyInput, "marginals are empty"});
    return out;
  }
  if (in.c.size() != n) {
    out.push_back({ErrorCode::DimensionMismatch,
                   "r has " + std::to_string(n) + " entries, c has " +
                       std::to_string(in.c.size())});
  }
  if (in.C.rows() != n || in.C.cols() != n) {
    out.push_back({ErrorCode::DimensionMismatch,
                   "cost matrix is " + std::to_string(in.C.rows()) + "x" +
                       std::to_string(in.C.cols()) + ", expected " +
                       std::to_string(n) + "x" + std::to_string(n)});
  }
  if (!detail::all_finite(in.r) || !detail::all_finite(in.c) ||
      !detail::all_finite(in.C) || !std::isfinite(in.s)) {
    out.push_back({ErrorCode::NonFiniteEntry, "non-finite entry in r, c, C or s"});
  } else {
    if ((in.r.array() < 0).any() || (in.c.array() < 0).any()) {
      out.push_back({ErrorCode::NegativeEntry, "negative marginal entry"});
    }
    if (in.C.size() > 0 && (in.C.array() < 0).any()) {
      out.push_back({ErrorCode::NegativeEntry, "negative cost entry"});
    }
    if (in.s < 0) {
      out.push_back({ErrorCode::NegativeEntry, "negative budget"});
    }
    if (in.c.size() == n && in.s > std::min(in.r.sum(), in.c.sum()) + kBudgetSlack) {
      out.push_back({ErrorCode::BudgetExceedsMass,
                     "budget " + std::to_string(in.s) + " exceeds min marginal mass " +
                         std::to_string(std::min(in.r.sum(), in.c.sum()))});
    }
  }
  return out;
}

// Returns the instance unchanged when every invariant holds; idempotent.
inline const Instance& validate(const Instance& in) {
  auto violations = validation_report(in);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return in;
}

// A nonnegative plan together with its feasibility diagnostics.
struct TransportPlan {
  Matrix X;
  Vector row_slack;  // r - X 1
  Vector col_slack;  // c - X^T 1
  double mass = 0.0;

  static TransportPlan from(Matrix X, const Instance& in) {
    if (X.rows() != in.size() || X.cols() != in.size()) {
      throw PotError(ErrorCode::DimensionMismatch,
                     "plan shape does not match the instance");
    }
    TransportPlan plan;
    plan.row_slack = in.r - X.rowwise().sum();
    plan.col_slack = in.c - X.colwise().sum().transpose();
    plan.mass = X.sum();
    plan.X = std::move(X);
    return plan;
  }
};

inline double transport_cost(const Matrix& C, const Matrix& X) {
  if (C.rows() != X.rows() || C.cols() != X.cols()) {
    throw PotError(ErrorCode::DimensionMismatch, "cost/plan shape mismatch");
  }
  return (C.array() * X.array()).sum();
}

// Largest violation across the three constraint groups; zero iff feasible.
inline double plan_feasibility_gap(const TransportPlan& plan, const Instance& in) {
  if (plan.X.rows() != in.size() || plan.X.cols() != in.size()) {
    throw PotError(ErrorCode::DimensionMismatch,
                   "plan shape does not match the instance");
  }
  const Vector row_excess = (plan.X.rowwise().sum() - in.r).cwiseMax(0.0);
  const Vector col_excess =
      (plan.X.colwise().sum().transpose() - in.c).cwiseMax(0.0);
  const double row_gap = row_excess.size() > 0 ? row_excess.maxCoeff() : 0.0;
  const double col_gap = col_excess.size() > 0 ? col_excess.maxCoeff() : 0.0;
  const double mass_gap = std::abs(plan.X.sum() - in.s);
  return std::max({row_gap, col_gap, mass_gap});
}

enum class BlockRule { Greedy, RoundRobin };

enum class SolverKind { Aspot, FeasibleSinkhorn, TunedSinkhorn };

inline const char* solver_kind_name(SolverKind kind) {
  switch (kind) {
    case SolverKind::Aspot: return "aspot";
    case SolverKind::FeasibleSinkhorn: return "sinkhorn";
    case SolverKind::TunedSinkhorn: return "tuned-sinkhorn";
  }
  return "unknown";
}

inline std::optional<SolverKind> solver_kind_from_name(const std::string& name) {
  if (name == "aspot") return SolverKind::Aspot;
  if (name == "sinkhorn") return SolverKind::FeasibleSinkhorn;
  if (name == "tuned-sinkhorn") return SolverKind::TunedSinkhorn;
  return std::nullopt;
}

struct SolverConfig {
  double epsilon = 0.1;                  // target accuracy of the approximation
  std::optional<double> gamma_override;  // replaces the derived regularization
  long max_iterations = 50000;
  BlockRule block_rule = BlockRule::Greedy;
  double tuning_exponent_p = 1.0;
  bool deterministic = true;
  long log_every = 1;

  void check() const {
    if (!(epsilon > 0) || !std::isfinite(epsilon)) {
      throw PotError(ErrorCode::InvalidArgument, "epsilon must be positive");
    }
    if (max_iterations < 1) {
      throw PotError(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
    }
    if (!(tuning_exponent_p >= 1)) {
      throw PotError(ErrorCode::InvalidArgument, "tuning exponent p must be >= 1");
    }
    if (log_every < 1) {
      throw PotError(ErrorCode::InvalidArgument, "log_every must be >= 1");
    }
    if (gamma_override && !(*gamma_override > 0)) {
      throw PotError(ErrorCode::InvalidArgument, "gamma override must be positive");
    }
  }
};

struct TraceRecord {
  long t = 0;
  double error = 0.0;  // the solver's stopping quantity at iteration t
  double phi = 0.0;    // dual objective at the monitored iterate
  std::optional<double> rounded_cost;
  double elapsed_s = 0.0;
};

struct ConvergenceTrace {
  std::vector<TraceRecord> records;
  // Which iterate the stopping error is evaluated at ("z_check" for the
  // accelerated solver, "extended" for the Sinkhorn variants).
  std::string stopping_iterate;
};

enum class SolveStatus { Converged, MaxIterationsExceeded, StepSizeUnderflow };

inline const char* solve_status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterationsExceeded: return "max-iterations-exceeded";
    case SolveStatus::StepSizeUnderflow: return "step-size-underflow";
  }
  return "unknown";
}

}  // namespace pot
