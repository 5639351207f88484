#pragma once

// Color transfer: k-means quantization of RGB pixels, a partial transport
// solve between the two color histograms, and barycentric recoloring.

#include <cstdint>
#include <random>
#include <vector>

#include "pot/io.hpp"
#include "pot/solvers.hpp"

namespace pot {

struct ColorHistogram {
  Matrix centroids;             // k x 3, values in [0, 1]
  Vector weights;               // cluster mass, sums to one before normalization
  std::vector<int> assignments; // pixel -> centroid
};

inline Matrix image_to_points(const Image& img) {
  const Eigen::Index n = img.pixel_count();
  Matrix pts(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    pts(i, 0) = img.rgb[static_cast<std::size_t>(3 * i)] / 255.0;
    pts(i, 1) = img.rgb[static_cast<std::size_t>(3 * i + 1)] / 255.0;
    pts(i, 2) = img.rgb[static_cast<std::size_t>(3 * i + 2)] / 255.0;
  }
  return pts;
}

// Lloyd iterations from a seeded k-means++ start, until the largest centroid
// move drops below 1e-6 or 100 rounds pass. Weights are cluster sizes / N.
inline ColorHistogram kmeans_quantize(const Matrix& points, int k,
                                      std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (n == 0) throw PotError(ErrorCode::EmptyInput, "no points to quantize");
  if (k < 1 || k > n) {
    throw PotError(ErrorCode::InvalidArgument,
                   "k must lie in [1, N] (k=" + std::to_string(k) + ", N=" +
                       std::to_string(n) + ")");
  }
  std::mt19937_64 rng(seed);

  Matrix centroids(k, points.cols());
  {
    // k-means++ seeding
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centroids.row(0) = points.row(first(rng));
    Vector dist2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int j = 1; j < k; ++j) {
      const double total = dist2.sum();
      Eigen::Index pick = 0;
      if (total > 0) {
        double target = unit(rng) * total;
        for (Eigen::Index i = 0; i < n; ++i) {
          target -= dist2(i);
          if (target <= 0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = first(rng);
      }
      centroids.row(j) = points.row(pick);
      dist2 = dist2.cwiseMin(
          (points.rowwise() - centroids.row(j)).rowwise().squaredNorm());
    }
  }

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  for (int round = 0; round < 100; ++round) {
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
      for (int j = 1; j < k; ++j) {
        const double d = (points.row(i) - centroids.row(j)).squaredNorm();
        if (d < best_d) {
          best = j;
          best_d = d;
        }
      }
      assign[static_cast<std::size_t>(i)] = best;
    }
    Matrix sums = Matrix::Zero(k, points.cols());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
      counts(assign[static_cast<std::size_t>(i)]) += 1;
    }
    double moved = 0.0;
    for (int j = 0; j < k; ++j) {
      if (counts(j) == 0) continue;  // empty cluster keeps its centroid
      Eigen::RowVectorXd next = sums.row(j) / counts(j);
      moved = std::max(moved, (next - centroids.row(j)).norm());
      centroids.row(j) = next;
    }
    if (moved < 1e-6) break;
  }

  // Final assignment and weights.
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
    for (int j = 1; j < k; ++j) {
      const double d = (points.row(i) - centroids.row(j)).squaredNorm();
      if (d < best_d) {
        best = j;
        best_d = d;
      }
    }
    assign[static_cast<std::size_t>(i)] = best;
    counts(best) += 1;
  }
  ColorHistogram hist;
  hist.centroids = std::move(centroids);
  hist.weights = counts.cast<double>() / static_cast<double>(n);
  hist.assignments = std::move(assign);
  return hist;
}

struct ColorTransferResult {
  Matrix recolored;  // k x 3 recolored source centroids
  SolveResult solve;
  Instance instance;  // the solved problem, for diagnostics
};

// Plan-weighted average of target colors per source row; rows carrying no
// mass keep their source color.
inline Matrix barycentric_projection(const Matrix& plan, const Matrix& source_colors,
                                     const Matrix& target_colors) {
  if (plan.rows() != source_colors.rows() || plan.cols() != target_colors.rows()) {
    throw PotError(ErrorCode::DimensionMismatch, "plan/color shape mismatch");
  }
  Matrix out = source_colors;
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    const double row_mass = plan.row(i).sum();
    if (row_mass > 0) out.row(i) = (plan.row(i) * target_colors) / row_mass;
  }
  return out;
}

// Histograms are normalized by the larger total mass, the cost is squared
// RGB distance scaled to unit max, and the budget is s_frac of the smaller
// mass. Source centroids with no transported mass keep their color.
inline ColorTransferResult color_transfer(const ColorHistogram& source,
                                          const ColorHistogram& target,
                                          double s_frac, SolverKind kind,
                                          const SolverConfig& config) {
  if (source.centroids.rows() != source.weights.size() ||
      target.centroids.rows() != target.weights.size()) {
    throw PotError(ErrorCode::DimensionMismatch, "histogram shape mismatch");
  }
  if (source.centroids.rows() != target.centroids.rows()) {
    throw PotError(ErrorCode::DimensionMismatch,
                   "histograms must have equal color counts");
  }
  if (s_frac < 0 || s_frac > 1) {
    throw PotError(ErrorCode::InvalidArgument, "s_frac must lie in [0, 1]");
  }
  const Eigen::Index k = source.centroids.rows();
  Instance in;
  const double norm =
      std::max(source.weights.sum(), target.weights.sum());
  if (!(norm > 0)) throw PotError(ErrorCode::EmptyInput, "empty histograms");
  in.r = source.weights / norm;
  in.c = target.weights / norm;
  in.C = Matrix(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      in.C(i, j) = (source.centroids.row(i) - target.centroids.row(j)).squaredNorm();
    }
  }
  const double cmax = in.C.maxCoeff();
  if (cmax > 0) in.C /= cmax;
  in.s = s_frac * std::min(in.r.sum(), in.c.sum());

  ColorTransferResult out;
  out.solve = solve(in, kind, config);
  out.recolored =
      barycentric_projection(out.solve.plan.X, source.centroids, target.centroids);
  out.instance = std::move(in);
  return out;
}

inline Image recolor_image(const Image& img, const ColorHistogram& hist,
                           const Matrix& recolored) {
  if (static_cast<std::size_t>(img.pixel_count()) != hist.assignments.size()) {
    throw PotError(ErrorCode::DimensionMismatch,
                   "histogram does not match the image");
  }
  Image out = img;
  for (int i = 0; i < img.pixel_count(); ++i) {
    const int j = hist.assignments[static_cast<std::size_t>(i)];
    for (int ch = 0; ch < 3; ++ch) {
      const double value = std::min(std::max(recolored(j, ch), 0.0), 1.0);
      out.rgb[static_cast<std::size_t>(3 * i + ch)] =
          static_cast<unsigned char>(std::lround(value * 255.0));
    }
  }
  return out;
}

}  // namespace pot
