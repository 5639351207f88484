#pragma once

// Seeded synthetic problem families used by the benchmark commands and the
// test harnesses.

#include <cstdint>
#include <random>

#include "pot/core.hpp"

namespace pot {

// Random support points in the unit square, squared-distance ground cost
// scaled to unit max, marginal masses and budget fraction as requested.
inline Instance make_synthetic_instance(Eigen::Index n, std::uint64_t seed,
                                        double mass_r, double mass_c,
                                        double s_frac) {
  if (n < 1) throw PotError(ErrorCode::InvalidArgument, "n must be >= 1");
  if (!(mass_r > 0) || !(mass_c > 0)) {
    throw PotError(ErrorCode::InvalidArgument, "marginal masses must be positive");
  }
  if (s_frac < 0 || s_frac > 1) {
    throw PotError(ErrorCode::InvalidArgument, "s_frac must lie in [0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> weight(0.2, 1.0);

  Instance in;
  in.r = Vector(n);
  in.c = Vector(n);
  Matrix src(n, 2);
  Matrix tgt(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    in.r(i) = weight(rng);
    in.c(i) = weight(rng);
    src(i, 0) = unit(rng);
    src(i, 1) = unit(rng);
    tgt(i, 0) = unit(rng);
    tgt(i, 1) = unit(rng);
  }
  in.r *= mass_r / in.r.sum();
  in.c *= mass_c / in.c.sum();
  in.C = Matrix(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      in.C(i, j) = (src.row(i) - tgt.row(j)).squaredNorm();
    }
  }
  const double cmax = in.C.maxCoeff();
  if (cmax > 0) in.C /= cmax;
  in.s = s_frac * std::min(in.r.sum(), in.c.sum());
  return in;
}

// The scaling-benchmark family: source mass 5, target mass 3, budget 20% of
// the smaller mass.
inline Instance make_scaling_instance(Eigen::Index n, std::uint64_t seed) {
  return make_synthetic_instance(n, seed, 5.0, 3.0, 0.2);
}

}  // namespace pot
