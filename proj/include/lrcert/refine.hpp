#pragma once

// Stage-2 three-split refinement. Stage A builds a capped right factor from
// the initializer's SVD; Stage B solves per-task pairwise-logistic score
// equations for the left factor; Stage C re-centers the left factor and
// solves per-model score equations for the right factor. The reconstruction
// is clipped and row-recentered into a ScoreMatrix.

#include <cstdint>
#include <vector>

#include "lrcert/score_matrix.hpp"
#include "lrcert/types.hpp"

namespace lrcert {

struct RefineConfig {
  int rank = 5;
  // Disjoint record-index splits. Stage A consumes only the initializer (fit
  // on split 1 by the caller); splits[1] drives Stage B, splits[2] Stage C.
  std::vector<std::vector<std::size_t>> splits;
  double incoherence_cap = 4.0;  // C_R: right-factor row norms <= C_R/sqrt(d_m)
  int newton_max_iter = 50;
  double newton_tol = 1e-8;  // converged when ||S|| < newton_tol * M
  double entry_bound = 5.0;  // B
  int passes = 1;            // B->C passes; offsets refresh between passes

  void validate(const ComparisonDataset& dataset) const;
};

struct RefineDiagnostics {
  int stage_b_nonconverged = 0;
  int stage_c_nonconverged = 0;
  int stage_b_skipped = 0;  // tasks with no split-2 records
  int stage_c_skipped = 0;  // models with no split-3 records
};

struct RefineResult {
  ScoreMatrix scores;
  FactoredScores factors;
  RefineDiagnostics diagnostics;
};

// Equal-thirds split of [0, n), in order. Matches the three-way sample split
// with n_1 = n_2 = n_3 up to remainder.
std::vector<std::vector<std::size_t>> equal_thirds(std::size_t n);

// Rank-r SVD of the re-centered initializer. Right factor rows are rescaled
// onto the incoherence ball; singular values are absorbed into the left
// factor. Throws if the r-th singular value is below 1e-12.
FactoredScores stage_a_right_factor(const ScoreMatrix& init, int rank, double incoherence_cap);

// Per-task damped-Newton solve of the row score equation with opponent
// offsets taken from the initializer. Tasks without split records keep their
// Stage-A rows. Returns the refined left factor.
Eigen::MatrixXd stage_b_left_update(const FactoredScores& stage_a, const ScoreMatrix& init,
                                    const ComparisonDataset& dataset,
                                    const std::vector<std::size_t>& split_records,
                                    const RefineConfig& config,
                                    RefineDiagnostics* diagnostics = nullptr);

// Column-centers the left factor (1^T left = 0), then solves per-model score
// equations with covariates given by left-factor rows and opponent offsets
// from the current reconstruction. Models without split records keep their
// Stage-A columns.
FactoredScores stage_c_column_update(const Eigen::MatrixXd& left_refined,
                                     const FactoredScores& stage_a,
                                     const ComparisonDataset& dataset,
                                     const std::vector<std::size_t>& split_records,
                                     const RefineConfig& config,
                                     RefineDiagnostics* diagnostics = nullptr);

// Full A -> B -> C pipeline.
RefineResult refine(const ScoreMatrix& init, const ComparisonDataset& dataset,
                    const RefineConfig& config);

// Alternating-minimization refinement, the estimator used by the simulation
// and arena experiments. Starting from the initializer's rank-r factors, it
// alternates per-task logistic row fits (covariates: right-factor row
// differences) with per-model logistic column fits (opponent offsets from the
// current reconstruction), re-orthonormalizing the right factor between
// passes. Row/column solves that fail to converge keep their current values.
struct AltMinConfig {
  int rank = 5;
  double entry_bound = 5.0;
  double incoherence_cap = 4.0;
  int passes = 8;
  int newton_max_iter = 30;
  double newton_tol = 1e-9;
};

RefineResult alt_min_refine(const ScoreMatrix& init, const ComparisonDataset& dataset,
                            const AltMinConfig& config);

}  // namespace lrcert
