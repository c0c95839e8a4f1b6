#pragma once

// The two-stage joint estimator behind a single fit call usable as a
// cross-fitting FitFunction.
//
// The experiment estimator (kAltMin, the default) follows the evaluation
// protocol: nuclear-norm convex initializer on the full sample, then
// alternating-minimization refinement. kThreeSplit instead runs the
// three-split refinement with the initializer fit on the first third, the
// form the entrywise theory is stated for.

#include "lrcert/convex_init.hpp"
#include "lrcert/refine.hpp"
#include "lrcert/score_matrix.hpp"
#include "lrcert/tangent.hpp"

namespace lrcert {

enum class RefineMode { kAltMin, kThreeSplit };

struct JointConfig {
  int rank = 5;
  double entry_bound = 5.0;
  RefineMode mode = RefineMode::kAltMin;
  ConvexConfig convex;     // rank/entry_bound overwritten from the fields above
  RefineConfig refine;     // three-split mode; splits filled per call
  AltMinConfig alt_min;    // alt-min mode
  CgOptions cg;
  int folds = 6;
};

inline RefineResult fit_joint(const ComparisonDataset& dataset, const JointConfig& config,
                              ConvexFitInfo* info = nullptr) {
  if (dataset.records.size() < 3) throw DataError("fit_joint: need at least 3 records");
  ConvexConfig convex = config.convex;
  convex.rank = config.rank;
  convex.entry_bound = config.entry_bound;

  if (config.mode == RefineMode::kAltMin) {
    AltMinConfig alt = config.alt_min;
    alt.rank = config.rank;
    alt.entry_bound = config.entry_bound;
    double lambda = convex.lambda ? *convex.lambda
                                  : default_lambda(dataset, convex.lambda_scale);
    // On sparse data the penalty can shrink the initializer below rank r;
    // back it off until the refinement can factor the initializer.
    for (int attempt = 0;; ++attempt) {
      convex.lambda = lambda;
      ScoreMatrix init = fit_initializer(dataset, convex, info);
      try {
        return alt_min_refine(init, dataset, alt);
      } catch (const NumericalError&) {
        if (attempt >= 6) throw;
        lambda *= 0.5;
      }
    }
  }

  RefineConfig refine_cfg = config.refine;
  refine_cfg.rank = config.rank;
  refine_cfg.entry_bound = config.entry_bound;
  refine_cfg.splits = equal_thirds(dataset.records.size());

  ComparisonDataset first_split;
  first_split.index = dataset.index;
  for (std::size_t i : refine_cfg.splits[0]) first_split.records.push_back(dataset.records[i]);

  double lambda = convex.lambda ? *convex.lambda
                                : default_lambda(first_split, convex.lambda_scale);
  for (int attempt = 0;; ++attempt) {
    convex.lambda = lambda;
    ScoreMatrix init = fit_initializer(first_split, convex, info);
    try {
      return refine(init, dataset, refine_cfg);
    } catch (const NumericalError&) {
      if (attempt >= 6) throw;
      lambda *= 0.5;
    }
  }
}

inline FitFunction make_joint_fit_fn(const JointConfig& config) {
  return [config](const ComparisonDataset& subset) {
    return fit_joint(subset, config).scores;
  };
}

}  // namespace lrcert
