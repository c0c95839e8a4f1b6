#pragma once

// Baseline estimator: independent BTL maximum likelihood per task with a
// small ridge, plus Wald influence functions for the baseline bootstrap.

#include <cstdint>
#include <vector>

#include "lrcert/score_matrix.hpp"
#include "lrcert/types.hpp"

namespace lrcert::per_task_btl {

struct FitOptions {
  // Ridge strength per task is ridge_scale * n_task unless ridge_abs >= 0.
  double ridge_scale = 1e-6;
  double ridge_abs = -1.0;
  int max_iter = 100;
  double tol = 1e-8;  // gradient infinity-norm
};

struct PerTaskFit {
  ScoreMatrix scores;
  std::vector<bool> converged;   // per task
  std::vector<int> iterations;   // per task
};

// One contrast's estimate with its per-observation influence values.
// std_error == sqrt(mean(influence^2) / n) where n = influence.size().
struct GapInference {
  double estimate = 0.0;
  double std_error = 0.0;
  std::vector<double> influence;
};

// Damped-Newton ridged MLE, fit independently per task. Models never observed
// in a task get score 0. Output rows are centered (the ridge optimum sums to
// zero per task).
PerTaskFit fit(const ComparisonDataset& dataset, const FitOptions& options = {});

// Wald sandwich inference for theta_{task,model_a} - theta_{task,model_b}.
// Influence values are zero for comparisons outside the task and scaled so
// that sqrt(mean(influence^2)/n) over all n records is the standard error.
GapInference wald_gap_inference(const PerTaskFit& fit, const ComparisonDataset& dataset,
                                int task, int model_a, int model_b,
                                const FitOptions& options = {});

}  // namespace lrcert::per_task_btl
