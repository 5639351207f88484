#include <gtest/gtest.h>

#include <random>

#include "pot/extend.hpp"
#include "pot/oracle.hpp"
#include "pot/rounding.hpp"
#include "test_util.hpp"

using namespace pot;

namespace {

Instance two_point_instance() {
  Instance in;
  in.r = Vector(2);
  in.r << 0.3, 0.2;
  in.c = Vector(2);
  in.c << 0.4, 0.1;
  in.C = Matrix(2, 2);
  in.C << 0.2, 0.9, 0.7, 0.1;
  in.s = 0.1;
  return in;
}

}  // namespace

TEST(Extend, HandComputedMarginals) {
  const ExtendedOtInstance ext = extend(two_point_instance(), 2.0);
  Vector expected_r(3);
  expected_r << 0.3, 0.2, 0.4;  // (r; |c|_1 - s)
  Vector expected_c(3);
  expected_c << 0.4, 0.1, 0.4;  // (c; |r|_1 - s)
  EXPECT_NEAR((ext.r_ext - expected_r).lpNorm<Eigen::Infinity>(), 0.0, 1e-15);
  EXPECT_NEAR((ext.c_ext - expected_c).lpNorm<Eigen::Infinity>(), 0.0, 1e-15);
  EXPECT_NEAR(ext.r_ext.sum(), 0.9, 1e-15);
  EXPECT_NEAR(ext.c_ext.sum(), 0.9, 1e-15);
}

TEST(Extend, FullBudgetGivesZeroDummyMass) {
  Instance in;
  in.r = Vector::Constant(2, 0.5);
  in.c = Vector::Constant(2, 0.5);
  in.C = Matrix::Ones(2, 2);
  in.s = 1.0;
  const ExtendedOtInstance ext = extend(in, 2.0);
  EXPECT_DOUBLE_EQ(ext.r_ext(2), 0.0);
  EXPECT_DOUBLE_EQ(ext.c_ext(2), 0.0);
}

TEST(Extend, BlockStructure) {
  const Instance in = two_point_instance();
  const ExtendedOtInstance ext = extend(in, 5.0);
  EXPECT_NEAR((ext.C_ext.topLeftCorner(2, 2) - in.C).lpNorm<Eigen::Infinity>(),
              0.0, 0.0);
  EXPECT_DOUBLE_EQ(ext.C_ext(2, 2), 5.0);
  EXPECT_DOUBLE_EQ(ext.C_ext(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(ext.C_ext(2, 1), 0.0);
}

TEST(Extend, MassConservation) {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 100; ++rep) {
    const Instance in = pot_test::random_instance(rng, 3 + (rep % 4));
    const ExtendedOtInstance ext = extend(in, in.max_cost() + 1.0);
    EXPECT_LE(std::abs(ext.r_ext.sum() - ext.c_ext.sum()), 1e-12);
  }
}

TEST(Extend, RejectsSmallPenalty) {
  try {
    extend(two_point_instance(), 0.5);  // max cost is 0.9
    FAIL() << "expected PenaltyTooSmall";
  } catch (const PotError& e) {
    EXPECT_EQ(e.code(), ErrorCode::PenaltyTooSmall);
  }
}

TEST(ExtractBlock, CornerOnlyPlanGivesZeroBlock) {
  Matrix X = Matrix::Zero(3, 3);
  X(2, 2) = 0.7;
  const BlockDecomposition dec = extract_block(X);
  EXPECT_EQ(dec.block.lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_DOUBLE_EQ(dec.corner, 0.7);
}

TEST(ExtractBlock, IdentityBlockPassesThrough) {
  Matrix X = Matrix::Zero(3, 3);
  X(0, 0) = 0.25;
  X(1, 1) = 0.25;
  const BlockDecomposition dec = extract_block(X);
  EXPECT_DOUBLE_EQ(dec.block(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(dec.block(1, 1), 0.25);
  EXPECT_EQ(dec.dummy_col.lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(dec.dummy_row.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(ExtractBlock, FeasibleExtendedPlansDecompose) {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 50; ++rep) {
    const Instance in = pot_test::random_instance(rng, 4);
    const ExtendedOtInstance ext = extend(in, in.max_cost() + 0.5);
    const Matrix raw = pot_test::random_nonneg_matrix(rng, 5, 5);
    const Matrix feasible = round_balanced(raw, ext.r_ext, ext.c_ext);
    const BlockDecomposition dec = extract_block(feasible);
    // rows/columns never exceed the original marginals, and the block mass
    // is the budget plus whatever flows dummy-to-dummy
    EXPECT_LE((dec.block.rowwise().sum() - in.r).maxCoeff(), 1e-9);
    EXPECT_LE((dec.block.colwise().sum().transpose() - in.c).maxCoeff(), 1e-9);
    EXPECT_NEAR(dec.block.sum(), in.s + dec.corner, 1e-9);
    // exact partial-transport feasibility after the final rounding
    const TransportPlan plan = round_pot(dec.block, in);
    EXPECT_LE(plan_feasibility_gap(plan, in), 1e-9 * std::max(1.0, in.r.sum()));
  }
}

TEST(ExtractBlock, OptimalExtendedPlanHasBudgetMass) {
  std::mt19937_64 rng(43);
  const Instance in = pot_test::random_instance(rng, 3);
  const ExtendedOtInstance ext = extend(in, in.max_cost() + 0.5);
  // solve the extension exactly as a full-mass partial problem
  Instance balanced;
  balanced.r = ext.r_ext;
  balanced.c = ext.c_ext;
  balanced.C = ext.C_ext;
  balanced.s = std::min(ext.r_ext.sum(), ext.c_ext.sum());
  const OracleSolution sol = solve_exact(balanced);
  const BlockDecomposition dec = extract_block(sol.plan);
  EXPECT_NEAR(dec.corner, 0.0, 1e-9);
  EXPECT_NEAR(dec.block.sum(), in.s, 1e-9);
}

TEST(RoundBalanced, FeasibleInputUnchanged) {
  Matrix X(2, 2);
  X << 0.25, 0.25, 0.25, 0.25;
  const Vector r = Vector::Constant(2, 0.5);
  const Vector c = Vector::Constant(2, 0.5);
  const Matrix out = round_balanced(X, r, c);
  EXPECT_EQ((out - X).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(RoundBalanced, ScalarScaling) {
  const Matrix out = round_balanced(Matrix::Constant(1, 1, 1.0),
                                    Vector::Constant(1, 0.5),
                                    Vector::Constant(1, 0.5));
  EXPECT_DOUBLE_EQ(out(0, 0), 0.5);
}

TEST(RoundBalanced, RandomMatricesGetExactMarginals) {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    Vector r(4), c(4);
    for (int i = 0; i < 4; ++i) {
      r(i) = weight(rng);
      c(i) = weight(rng);
    }
    c *= r.sum() / c.sum();
    const Matrix X = pot_test::random_nonneg_matrix(rng, 4, 4);
    const Matrix out = round_balanced(X, r, c);
    EXPECT_LE((out.rowwise().sum() - r).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LE((out.colwise().sum().transpose() - c).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_GE(out.minCoeff(), 0.0);
    // l1 perturbation bound of the scaling-plus-fill construction
    const double row_err = (X.rowwise().sum() - r).lpNorm<1>();
    const double col_err = (X.colwise().sum().transpose() - c).lpNorm<1>();
    EXPECT_LE((out - X).lpNorm<1>(), 2.0 * (row_err + col_err) + 1e-12);
  }
}

TEST(RoundBalanced, RejectsUnbalancedMarginals) {
  try {
    round_balanced(Matrix::Ones(2, 2), Vector::Constant(2, 1.0),
                   Vector::Constant(2, 0.6));
    FAIL() << "expected UnbalancedMarginals";
  } catch (const PotError& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnbalancedMarginals);
  }
}

TEST(RoundPot, FeasibleInputUnchanged) {
  Instance in;
  in.r = Vector::Constant(1, 1.0);
  in.c = Vector::Constant(1, 1.0);
  in.C = Matrix::Zero(1, 1);
  in.s = 0.5;
  const TransportPlan plan = round_pot(Matrix::Constant(1, 1, 0.5), in);
  EXPECT_EQ(plan.X(0, 0), 0.5);
}

TEST(RoundPot, MassScalingOnly) {
  Instance in;
  in.r = Vector::Constant(1, 1.0);
  in.c = Vector::Constant(1, 1.0);
  in.C = Matrix::Zero(1, 1);
  in.s = 0.5;
  const TransportPlan plan = round_pot(Matrix::Constant(1, 1, 2.0), in);
  EXPECT_DOUBLE_EQ(plan.X(0, 0), 0.5);
}

TEST(RoundPot, DeficitFillFromZero) {
  Instance in;
  in.r = Vector(2);
  in.r << 0.6, 0.4;
  in.c = Vector::Constant(2, 0.5);
  in.C = Matrix::Ones(2, 2);
  in.s = 0.5;
  const TransportPlan plan = round_pot(Matrix::Zero(2, 2), in);
  // 0.5 * r c^T / (|r|_1 |c|_1) with both masses one
  Matrix expected = 0.5 * in.r * in.c.transpose();
  EXPECT_NEAR((plan.X - expected).lpNorm<Eigen::Infinity>(), 0.0, 1e-15);
  EXPECT_NEAR(plan.mass, 0.5, 1e-15);
}

TEST(RoundPot, ExactFeasibilityAndIdempotence) {
  std::mt19937_64 rng(45);
  for (int rep = 0; rep < 2000; ++rep) {
    const Eigen::Index n = 2 + (rep % 5);
    const Instance in = pot_test::random_instance(rng, n);
    const Matrix X = pot_test::random_nonneg_matrix(rng, n, n, 2.0);
    const TransportPlan plan = round_pot(X, in);
    EXPECT_LE(plan_feasibility_gap(plan, in), 1e-9 * std::max(1.0, in.r.sum()));
    EXPECT_GE(plan.X.minCoeff(), 0.0);
    EXPECT_LE((plan.X.rowwise().sum() - in.r).maxCoeff(), 1e-12);
    EXPECT_LE((plan.X.colwise().sum().transpose() - in.c).maxCoeff(), 1e-12);
    const TransportPlan again = round_pot(plan.X, in);
    EXPECT_LE((again.X - plan.X).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(RoundPot, ExtractionNeverIncreasesExtendedCost) {
  std::mt19937_64 rng(46);
  for (int rep = 0; rep < 200; ++rep) {
    const Instance in = pot_test::random_instance(rng, 4);
    const ExtendedOtInstance ext = extend(in, in.max_cost() + 0.25);
    const Matrix raw = pot_test::random_nonneg_matrix(rng, 5, 5);
    const Matrix feasible = round_balanced(raw, ext.r_ext, ext.c_ext);
    const double extended_cost = (ext.C_ext.array() * feasible.array()).sum();
    const TransportPlan plan = round_pot(extract_block(feasible).block, in);
    EXPECT_LE(transport_cost(in.C, plan.X), extended_cost + 1e-12);
  }
}
