#pragma once

// Stage-1 estimator: nuclear-norm penalized pairwise-logistic MLE over the
// row-centered, entrywise-bounded constraint set, solved by proximal gradient
// with singular-value soft-thresholding.

#include <optional>

#include "lrcert/score_matrix.hpp"
#include "lrcert/types.hpp"

namespace lrcert {

struct ConvexConfig {
  std::optional<double> lambda;  // empty = use default_lambda()
  double lambda_scale = 2.0;     // c_lambda in the default rule
  double entry_bound = 5.0;      // B
  int rank = 5;                  // truncation rank for the initializer
  int max_iter = 2000;
  double tol = 1e-7;             // relative objective decrease
  double step_init = 0.0;        // 0 = d_t*d_m heuristic

  void validate(const TaskModelIndex& index) const {
    if (rank < 1 || rank > std::min(index.task_count, index.model_count))
      throw ConfigError("convex rank must be in [1, min(d_t,d_m)]");
    if (entry_bound <= 0.0) throw ConfigError("entry bound must be positive");
    if (lambda && *lambda < 0.0) throw ConfigError("lambda must be >= 0");
  }
};

struct ConvexFitInfo {
  int iterations = 0;
  double objective = 0.0;
  double lambda = 0.0;
  bool converged = false;
};

// lambda = c * sqrt(log(d_t + d_m) / (n * min(d_t, d_m)))
double default_lambda(const ComparisonDataset& dataset, double scale = 2.0);

// Full (pre-truncation) optimum of the penalized program.
ScoreMatrix fit_convex(const ComparisonDataset& dataset, const ConvexConfig& config,
                       ConvexFitInfo* info = nullptr);

// Best rank-r approximation, entrywise clipped to [-B, B], rows re-centered.
ScoreMatrix truncate_and_clip(const ScoreMatrix& m, int rank, double entry_bound);

// Convenience: fit_convex followed by truncate_and_clip.
ScoreMatrix fit_initializer(const ComparisonDataset& dataset, const ConvexConfig& config,
                            ConvexFitInfo* info = nullptr);

}  // namespace lrcert
