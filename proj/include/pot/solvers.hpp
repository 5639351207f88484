#pragma once

// Partial-transport solvers: the greedy/round-robin block step, the
// accelerated solver (aspot) with its momentum schedule, the feasible
// Sinkhorn baseline on the dummy-node extension, the tuned-gamma Sinkhorn
// variant, and iteration-bound diagnostics.

#include <chrono>
#include <functional>
#include <limits>

#include "pot/dual.hpp"
#include "pot/extend.hpp"
#include "pot/rounding.hpp"

namespace pot {

// H(x) = -<x, log x> with 0 log 0 = 0.
inline double entropy(const Vector& x) {
  if ((x.array() < 0).any()) {
    throw PotError(ErrorCode::NegativeEntry, "entropy requires x >= 0");
  }
  double h = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) > 0) h -= x(i) * std::log(x(i));
  }
  return h;
}

// Momentum schedule: theta' = theta (sqrt(theta^2 + 4) - theta) / 2.
// Satisfies theta'/theta = sqrt(1 - theta') and theta_t <= 2/(t+2).
inline double theta_next(double theta) {
  if (!(theta > 0) || !(theta <= 1)) {
    throw PotError(ErrorCode::InvalidArgument, "theta must lie in (0, 1]");
  }
  return theta * (std::sqrt(theta * theta + 4.0) - theta) / 2.0;
}

// One exact block minimization of the dual: the chosen block of (u, v, w) is
// updated so its stationarity condition holds exactly, hence phi never
// increases. Greedy picks the block with the largest divergence violation;
// RoundRobin rotates on the call counter t.
inline DualPoint greenkhorn_step(const EntropicContext& ctx, const DualPoint& z,
                                 BlockRule rule, long t) {
  detail::check_dual_shape(ctx, z);
  const Matrix B = b_matrix(ctx, z);
  detail::check_exp_range(z.u.maxCoeff(), "exp(u)");
  detail::check_exp_range(z.v.maxCoeff(), "exp(v)");
  const Vector row = B.rowwise().sum() + z.u.array().exp().matrix();
  const Vector col =
      B.colwise().sum().transpose() + z.v.array().exp().matrix();
  const double total = B.sum();

  int block = 0;
  if (rule == BlockRule::RoundRobin) {
    block = static_cast<int>(t % 3);
  } else {
    double score_u = 0.0;
    double score_v = 0.0;
    for (Eigen::Index i = 0; i < ctx.size(); ++i) {
      score_u += detail::rho_limit(ctx.r(i), row(i));
      score_v += detail::rho_limit(ctx.c(i), col(i));
    }
    const double score_w = detail::rho_limit(ctx.s, total);
    block = 0;
    double best = score_u;
    if (score_v > best) { block = 1; best = score_v; }
    if (score_w > best) { block = 2; }
  }

  DualPoint out = z;
  switch (block) {
    case 0:
      out.u += (ctx.r.array().log() - row.array().log()).matrix();
      break;
    case 1:
      out.v += (ctx.c.array().log() - col.array().log()).matrix();
      break;
    default:
      out.w += std::log(ctx.s) - std::log(total);
      break;
  }
  if (!out.all_finite()) {
    // a block sum underflowed to zero; the caller treats this like any other
    // range failure and shrinks its step
    throw PotError(ErrorCode::Overflow, "block update left the exp range");
  }
  return out;
}

// Derived accelerated-solver parameters: regularization, stopping tolerance
// and the mixed (strictly positive) marginals used throughout the solve.
struct AspotSetup {
  double gamma = 0.0;
  double eps_tilde = 0.0;
  Vector mixed_r;
  Vector mixed_c;
};

inline AspotSetup aspot_setup(const Instance& in, double epsilon) {
  validate(in);
  if (!(epsilon > 0) || !std::isfinite(epsilon)) {
    throw PotError(ErrorCode::InvalidArgument, "epsilon must be positive");
  }
  const Eigen::Index n = in.size();
  if (n < 2) {
    throw PotError(ErrorCode::DegenerateInstance,
                   "accelerated setup needs n >= 2 (log n vanishes)");
  }
  AspotSetup setup;
  setup.gamma = epsilon / (4.0 * std::log(static_cast<double>(n)));
  const double cmax = in.max_cost();
  setup.eps_tilde = cmax > 0 ? epsilon / (8.0 * cmax)
                             : std::numeric_limits<double>::infinity();
  const double sr = in.source_mass();
  const double sc = in.target_mass();
  if (sr > 1) setup.eps_tilde = std::min(setup.eps_tilde, 8.0 * (sr - in.s) / (sr - 1.0));
  if (sc > 1) setup.eps_tilde = std::min(setup.eps_tilde, 8.0 * (sc - in.s) / (sc - 1.0));
  if (!(setup.gamma > 0) || !std::isfinite(setup.gamma)) {
    throw PotError(ErrorCode::DegenerateInstance, "derived gamma is not positive");
  }
  if (!(setup.eps_tilde > 0)) {
    throw PotError(ErrorCode::DegenerateInstance,
                   "stopping tolerance collapsed to zero (budget equals mass)");
  }
  // Mixing keeps the marginals strictly positive; the weight is capped below
  // one so the mixture stays a valid marginal even for lax tolerances.
  const double lambda = std::min(setup.eps_tilde / 8.0, 0.5);
  const double nd = static_cast<double>(n);
  setup.mixed_r = (1.0 - lambda) * in.r + Vector::Constant(n, lambda / nd);
  setup.mixed_c = (1.0 - lambda) * in.c + Vector::Constant(n, lambda / nd);
  return setup;
}

// Constants of the iteration bound: the dual-radius R, the step constants
// mu_f and L (with the constraint-matrix norm bound 3), and the bound itself
// 1 + (12 sqrt(14 n L) R / eps')^(2/3). Pass the marginals actually used by
// the solve (the mixed ones); they must be strictly positive.
struct TheoryBounds {
  double R = 0.0;
  double L = 0.0;
  double mu_f = 0.0;
  double iteration_bound = 0.0;
};

inline TheoryBounds theory_bounds(const Instance& in, double gamma,
                                  double eps_prime) {
  if (!(gamma > 0) || !std::isfinite(gamma)) {
    throw PotError(ErrorCode::InvalidArgument, "gamma must be positive");
  }
  if (!(eps_prime > 0) || !std::isfinite(eps_prime)) {
    throw PotError(ErrorCode::InvalidArgument, "eps_prime must be positive");
  }
  const double sr = in.source_mass();
  const double sc = in.target_mass();
  const double max_mass = std::max(sr, sc);
  if (!(max_mass > in.s)) {
    throw PotError(ErrorCode::DegenerateInstance,
                   "dual radius is infinite when budget equals max mass");
  }
  const double min_entry = std::min(in.r.minCoeff(), in.c.minCoeff());
  if (!(min_entry > 0)) {
    throw PotError(ErrorCode::DegenerateInstance,
                   "dual radius needs strictly positive marginals");
  }
  TheoryBounds tb;
  tb.R = in.max_cost() * max_mass / (gamma * (max_mass - in.s)) - std::log(min_entry);
  tb.mu_f = gamma / (sr + sc - in.s);
  tb.L = 3.0 / tb.mu_f;
  const double n = static_cast<double>(in.size());
  tb.iteration_bound =
      1.0 + std::pow(12.0 * std::sqrt(14.0 * n * tb.L) * tb.R / eps_prime, 2.0 / 3.0);
  return tb;
}

struct SolveResult {
  TransportPlan plan;
  ConvergenceTrace trace;
  SolveStatus status = SolveStatus::Converged;
  long iterations = 0;
  double gamma = 0.0;
  double tolerance = 0.0;  // stopping threshold the solver ran against
  double final_error = 0.0;
  double wall_seconds = 0.0;
  std::optional<TheoryBounds> bounds;
};

// Per-iteration snapshot of the accelerated solver, for diagnostics and the
// descent-chain checks. References are only valid inside the callback.
struct AspotIterate {
  long t = 0;
  double theta = 0.0;
  double error = 0.0;
  const EntropicContext& ctx;
  const DualPoint& z_grave;
  const DualPoint& z_hat;
  const DualPoint& z_best;
  const DualPoint& z_check;
  double phi_hat = 0.0;
  double phi_best = 0.0;
  double phi_check = 0.0;
};

using AspotObserver = std::function<void(const AspotIterate&)>;

namespace detail {

using SolveClock = std::chrono::steady_clock;

inline double seconds_since(SolveClock::time_point start) {
  return std::chrono::duration<double>(SolveClock::now() - start).count();
}

struct PhiGrad {
  double phi = 0.0;
  DualPoint grad;
};

// phi and its gradient off a single kernel evaluation.
inline PhiGrad phi_and_gradient(const EntropicContext& ctx, const DualPoint& z) {
  check_dual_shape(ctx, z);
  check_exp_range(z.u.maxCoeff(), "exp(u)");
  check_exp_range(z.v.maxCoeff(), "exp(v)");
  const Matrix B = b_matrix(ctx, z);
  const Vector eu = z.u.array().exp();
  const Vector ev = z.v.array().exp();
  PhiGrad out;
  out.phi = B.sum() + eu.sum() + ev.sum() - z.u.dot(ctx.r) - z.v.dot(ctx.c) -
            z.w * ctx.s;
  out.grad.u = B.rowwise().sum() + eu - ctx.r;
  out.grad.v = B.colwise().sum().transpose() + ev - ctx.c;
  out.grad.w = B.sum() - ctx.s;
  return out;
}

inline double gradient_error(const PhiGrad& pg) {
  return pg.grad.u.lpNorm<1>() + pg.grad.v.lpNorm<1>() + std::abs(pg.grad.w);
}

inline SolveResult trivial_result(const Instance& in, Matrix X, double gamma,
                                  double tolerance) {
  SolveResult out;
  out.plan = TransportPlan::from(std::move(X), in);
  out.status = SolveStatus::Converged;
  out.iterations = 0;
  out.gamma = gamma;
  out.tolerance = tolerance;
  out.final_error = 0.0;
  out.wall_seconds = 0.0;
  TraceRecord rec;
  rec.rounded_cost = transport_cost(in.C, out.plan.X);
  out.trace.records.push_back(rec);
  out.trace.stopping_iterate = "trivial";
  return out;
}

}  // namespace detail

// Accelerated solve: momentum extrapolation with a gradient step, a greedy
// block correction of the extrapolated point, re-anchoring on the better of
// the monotone and corrected iterates, and a second block correction that
// keeps the monotone sequence descending. Stops on the feasibility error of
// the monotone iterate; the final kernel is rounded against the original
// instance. Overflowing gradient steps are halved up to 60 times.
inline SolveResult aspot_solve(const Instance& in, const SolverConfig& config,
                               const AspotObserver& observer = {}) {
  validate(in);
  config.check();
  if (in.size() < 2) {
    throw PotError(ErrorCode::DegenerateInstance,
                   "accelerated solver needs n >= 2");
  }
  const auto start = detail::SolveClock::now();
  if (in.s == 0) {
    return detail::trivial_result(in, Matrix::Zero(in.size(), in.size()), 0.0, 0.0);
  }

  const AspotSetup setup = aspot_setup(in, config.epsilon);
  const double gamma = config.gamma_override.value_or(setup.gamma);
  if (!(gamma > 0) || !std::isfinite(gamma)) {
    throw PotError(ErrorCode::InvalidArgument, "gamma must be positive");
  }
  const EntropicContext ctx(in.C, gamma, setup.mixed_r, setup.mixed_c, in.s);

  SolveResult result;
  result.gamma = gamma;
  result.tolerance = setup.eps_tilde;
  result.trace.stopping_iterate = "z_check";
  try {
    Instance mixed{setup.mixed_r, setup.mixed_c, in.C, in.s};
    result.bounds = theory_bounds(mixed, gamma, setup.eps_tilde);
  } catch (const PotError&) {
    result.bounds.reset();  // bound undefined (e.g. budget equals max mass)
  }

  const Eigen::Index n = in.size();
  const double step_denom = 3.0 * (setup.mixed_r.sum() + setup.mixed_c.sum() - in.s);

  DualPoint z = DualPoint::zero(n);        // re-anchored momentum iterate
  DualPoint z_check = DualPoint::zero(n);  // monotone iterate
  double theta = 1.0;
  long t = 0;
  long gk_calls = 0;

  detail::PhiGrad check_eval = detail::phi_and_gradient(ctx, z_check);
  double error = detail::gradient_error(check_eval);

  const auto record = [&](long iter, double err, double phi) {
    if (iter % config.log_every != 0 && err > setup.eps_tilde) return;
    TraceRecord rec;
    rec.t = iter;
    rec.error = err;
    rec.phi = phi;
    rec.rounded_cost =
        transport_cost(in.C, round_pot(b_matrix(ctx, z_check), in).X);
    rec.elapsed_s = detail::seconds_since(start);
    result.trace.records.push_back(rec);
  };

  record(0, error, check_eval.phi);
  result.status = SolveStatus::Converged;

  while (error > setup.eps_tilde) {
    if (t >= config.max_iterations) {
      result.status = SolveStatus::MaxIterationsExceeded;
      break;
    }
    double step = gamma / (step_denom * theta);
    DualPoint z_grave, z_hat, z_best, next_check;
    detail::PhiGrad next_eval;
    double phi_hat = 0.0;
    double phi_best = 0.0;
    bool stepped = false;
    for (int halvings = 0; halvings <= 60; ++halvings) {
      try {
        const DualPoint z_bar = (1.0 - theta) * z_check + theta * z;
        const DualPoint grad = dual_gradient(ctx, z_bar);
        const DualPoint z_next = z_bar - step * grad;
        z_grave = z_bar + theta * (z_next - z);
        z_hat = greenkhorn_step(ctx, z_grave, config.block_rule, gk_calls);
        phi_hat = dual_objective(ctx, z_hat);
        z_best = (check_eval.phi <= phi_hat) ? z_check : z_hat;
        phi_best = std::min(check_eval.phi, phi_hat);
        next_check = greenkhorn_step(ctx, z_best, config.block_rule, gk_calls + 1);
        next_eval = detail::phi_and_gradient(ctx, next_check);
        stepped = true;
        break;
      } catch (const PotError& e) {
        if (e.code() != ErrorCode::Overflow) throw;
        step *= 0.5;
      }
    }
    if (!stepped) {
      result.status = SolveStatus::StepSizeUnderflow;
      break;
    }
    gk_calls += 2;
    z = std::move(z_best);
    z_check = std::move(next_check);
    check_eval = std::move(next_eval);
    error = detail::gradient_error(check_eval);
    theta = theta_next(theta);
    ++t;
    if (observer) {
      observer(AspotIterate{t, theta, error, ctx, z_grave, z_hat, z, z_check,
                            phi_hat, phi_best, check_eval.phi});
    }
    record(t, error, check_eval.phi);
  }

  result.plan = round_pot(b_matrix(ctx, z_check), in);
  result.iterations = t;
  result.final_error = error;
  result.wall_seconds = detail::seconds_since(start);
  if (result.trace.records.empty() || result.trace.records.back().t != t) {
    TraceRecord rec;
    rec.t = t;
    rec.error = error;
    rec.phi = check_eval.phi;
    rec.rounded_cost = transport_cost(in.C, result.plan.X);
    rec.elapsed_s = result.wall_seconds;
    result.trace.records.push_back(rec);
  }
  return result;
}

namespace detail {

inline double masked_dot(const Vector& potentials, const Vector& weights) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights(i) > 0) total += potentials(i) * weights(i);
  }
  return total;
}

inline Vector lse_rows(Matrix M) {
  const Vector row_max = M.rowwise().maxCoeff();
  M.colwise() -= row_max;
  return row_max + M.array().exp().rowwise().sum().log().matrix();
}

struct ExtendedSinkhornRun {
  Matrix B;  // kernel with the final potentials applied
  Vector u;
  Vector v;
  long iterations = 0;
  SolveStatus status = SolveStatus::Converged;
  double final_error = 0.0;
};

// Log-domain alternating scaling on the extended problem. Zero marginal
// entries drive their potential to -inf, which zeroes the matching rows or
// columns without special cases.
inline ExtendedSinkhornRun extended_sinkhorn(
    const ExtendedOtInstance& ext, double gamma, double tol,
    const SolverConfig& config, const Instance& original,
    ConvergenceTrace& trace, SolveClock::time_point start) {
  const Eigen::Index m = ext.r_ext.size();
  const Matrix logK = -ext.C_ext / gamma;
  const Vector log_r = ext.r_ext.array().log();
  const Vector log_c = ext.c_ext.array().log();
  Vector u = Vector::Zero(m);
  Vector v = Vector::Zero(m);

  const auto kernel = [&]() {
    Matrix B = logK;
    B.colwise() += u;
    B.rowwise() += v.transpose();
    return Matrix(B.array().exp());
  };
  const auto marginal_error = [&](const Matrix& B) {
    return (B.rowwise().sum() - ext.r_ext).lpNorm<1>() +
           (B.colwise().sum().transpose() - ext.c_ext).lpNorm<1>();
  };
  const auto dual_value = [&](const Matrix& B) {
    return B.sum() - masked_dot(u, ext.r_ext) - masked_dot(v, ext.c_ext);
  };

  ExtendedSinkhornRun run;
  run.B = kernel();
  run.final_error = marginal_error(run.B);

  const auto record = [&](long iter, double err) {
    if (iter % config.log_every != 0 && err > tol) return;
    TraceRecord rec;
    rec.t = iter;
    rec.error = err;
    rec.phi = dual_value(run.B);
    const Matrix balanced = round_balanced(run.B, ext.r_ext, ext.c_ext);
    rec.rounded_cost =
        transport_cost(original.C, round_pot(extract_block(balanced).block, original).X);
    rec.elapsed_s = seconds_since(start);
    trace.records.push_back(rec);
  };

  record(0, run.final_error);
  while (run.final_error > tol) {
    if (run.iterations >= config.max_iterations) {
      run.status = SolveStatus::MaxIterationsExceeded;
      break;
    }
    {
      Matrix M = logK;
      M.rowwise() += v.transpose();
      u = log_r - lse_rows(std::move(M));
    }
    {
      Matrix M = logK.transpose();
      M.rowwise() += u.transpose();
      v = log_c - lse_rows(std::move(M));
    }
    run.B = kernel();
    run.final_error = marginal_error(run.B);
    ++run.iterations;
    record(run.iterations, run.final_error);
  }
  run.u = u;
  run.v = v;
  return run;
}

// Penalty for the dummy node; falls back to a valid value when the derived
// one does not dominate the costs.
inline double dummy_penalty(const Instance& in, double epsilon) {
  const double cmax = in.max_cost();
  double A = cmax > 0 ? 8.0 * cmax / epsilon : 0.0;
  if (!(A > cmax) || !std::isfinite(A)) A = cmax > 0 ? 2.0 * cmax : 1.0;
  return A;
}

inline SolveResult finish_extended_solve(const Instance& in,
                                         const ExtendedOtInstance& ext,
                                         ExtendedSinkhornRun run, double gamma,
                                         double tol, ConvergenceTrace trace,
                                         SolveClock::time_point start) {
  const Matrix balanced = round_balanced(run.B, ext.r_ext, ext.c_ext);
  SolveResult result;
  result.plan = round_pot(extract_block(balanced).block, in);
  result.trace = std::move(trace);
  result.trace.stopping_iterate = "extended-marginals";
  result.status = run.status;
  result.iterations = run.iterations;
  result.gamma = gamma;
  result.tolerance = tol;
  result.final_error = run.final_error;
  result.wall_seconds = seconds_since(start);
  return result;
}

}  // namespace detail

// Classical feasible Sinkhorn: derived gamma/tolerance and marginal mixing,
// then alternating scaling on the dummy-node extension, balanced rounding,
// block extraction and exact partial-transport rounding.
inline SolveResult feasible_sinkhorn_solve(const Instance& in,
                                           const SolverConfig& config) {
  validate(in);
  config.check();
  const auto start = detail::SolveClock::now();
  if (in.s == 0) {
    return detail::trivial_result(in, Matrix::Zero(in.size(), in.size()), 0.0, 0.0);
  }
  if (in.size() == 1) {
    // One support point: the budget pins the only plan entry.
    return detail::trivial_result(in, Matrix::Constant(1, 1, in.s),
                                  config.gamma_override.value_or(0.0), 0.0);
  }
  const AspotSetup setup = aspot_setup(in, config.epsilon);
  const double gamma = config.gamma_override.value_or(setup.gamma);
  if (!(gamma > 0) || !std::isfinite(gamma)) {
    throw PotError(ErrorCode::InvalidArgument, "gamma must be positive");
  }
  const double penalty = detail::dummy_penalty(in, config.epsilon);
  const Instance mixed{setup.mixed_r, setup.mixed_c, in.C, in.s};
  const ExtendedOtInstance ext = extend(mixed, penalty);
  ConvergenceTrace trace;
  auto run = detail::extended_sinkhorn(ext, gamma, setup.eps_tilde, config, in,
                                       trace, start);
  return detail::finish_extended_solve(in, ext, std::move(run), gamma,
                                       setup.eps_tilde, std::move(trace), start);
}

// Sinkhorn with the tuned regularization gamma = (2 eps / (49 H_min))^(1/p)
// and stopping tolerance eps' = H_min gamma^p on the dummy-node extension of
// the original (unmixed) marginals.
inline SolveResult tuned_sinkhorn_solve(const Instance& in, double epsilon,
                                        double p,
                                        const SolverConfig& config = {}) {
  validate(in);
  config.check();
  if (!(epsilon > 0) || !std::isfinite(epsilon)) {
    throw PotError(ErrorCode::InvalidArgument, "epsilon must be positive");
  }
  if (!(p >= 1)) {
    throw PotError(ErrorCode::InvalidArgument, "tuning exponent p must be >= 1");
  }
  const auto start = detail::SolveClock::now();
  if (in.s == 0) {
    return detail::trivial_result(in, Matrix::Zero(in.size(), in.size()), 0.0, 0.0);
  }
  const double h_min = std::min(entropy(in.r), entropy(in.c));
  if (!(h_min > 0)) {
    throw PotError(ErrorCode::ZeroEntropy,
                   "tuned gamma needs positive marginal entropy");
  }
  if (in.size() == 1) {
    return detail::trivial_result(in, Matrix::Constant(1, 1, in.s),
                                  config.gamma_override.value_or(0.0), 0.0);
  }
  const double gamma =
      config.gamma_override.value_or(std::pow(2.0 * epsilon / (49.0 * h_min), 1.0 / p));
  if (!(gamma > 0) || !std::isfinite(gamma)) {
    throw PotError(ErrorCode::InvalidArgument, "gamma must be positive");
  }
  const double eps_prime = h_min * std::pow(gamma, p);
  const double penalty = detail::dummy_penalty(in, epsilon);
  const ExtendedOtInstance ext = extend(in, penalty);
  ConvergenceTrace trace;
  auto run =
      detail::extended_sinkhorn(ext, gamma, eps_prime, config, in, trace, start);
  return detail::finish_extended_solve(in, ext, std::move(run), gamma, eps_prime,
                                       std::move(trace), start);
}

inline SolveResult tuned_sinkhorn_solve(const Instance& in,
                                        const SolverConfig& config) {
  return tuned_sinkhorn_solve(in, config.epsilon, config.tuning_exponent_p, config);
}

inline SolveResult solve(const Instance& in, SolverKind kind,
                         const SolverConfig& config) {
  switch (kind) {
    case SolverKind::Aspot: return aspot_solve(in, config);
    case SolverKind::FeasibleSinkhorn: return feasible_sinkhorn_solve(in, config);
    case SolverKind::TunedSinkhorn: return tuned_sinkhorn_solve(in, config);
  }
  throw PotError(ErrorCode::InvalidArgument, "unknown solver kind");
}

}  // namespace pot
