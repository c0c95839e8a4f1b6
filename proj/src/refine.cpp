#include "lrcert/refine.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <unordered_set>

#include "lrcert/btl.hpp"
#include "lrcert/parallel.hpp"

namespace lrcert {

void RefineConfig::validate(const ComparisonDataset& dataset) const {
  if (rank < 1 || rank > std::min(dataset.index.task_count, dataset.index.model_count))
    throw ConfigError("refine rank must be in [1, min(d_t,d_m)]");
  if (splits.size() != 3) throw ConfigError("refine requires exactly 3 splits");
  std::unordered_set<std::size_t> seen;
  for (const auto& split : splits) {
    if (split.empty()) throw ConfigError("refine splits must be nonempty");
    for (std::size_t i : split) {
      if (i >= dataset.records.size()) throw ConfigError("split index out of range");
      if (!seen.insert(i).second) throw ConfigError("refine splits must be disjoint");
    }
  }
  if (incoherence_cap <= 0.0) throw ConfigError("incoherence_cap must be positive");
  if (entry_bound <= 0.0) throw ConfigError("entry_bound must be positive");
  if (passes < 1) throw ConfigError("passes must be >= 1");
}

std::vector<std::vector<std::size_t>> equal_thirds(std::size_t n) {
  std::vector<std::vector<std::size_t>> splits(3);
  for (std::size_t i = 0; i < n; ++i) splits[i % 3].push_back(i);
  return splits;
}

FactoredScores stage_a_right_factor(const ScoreMatrix& init, int rank, double incoherence_cap) {
  ScoreMatrix centered = recenter_rows(init);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered.values,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues()(rank - 1) < 1e-12)
    throw NumericalError("stage_a_right_factor: rank deficient initializer");

  FactoredScores out;
  out.index = init.index;
  out.rank = rank;
  out.left = svd.matrixU().leftCols(rank) *
             svd.singularValues().head(rank).asDiagonal();  // absorb singular values left
  out.right = svd.matrixV().leftCols(rank);

  double cap = incoherence_cap / std::sqrt(static_cast<double>(init.index.model_count));
  for (int m = 0; m < out.right.rows(); ++m) {
    double norm = out.right.row(m).norm();
    if (norm > cap) out.right.row(m) *= cap / norm;
  }
  return out;
}

namespace {

// One reoriented observation of a score equation: covariate row index,
// outcome, and fixed opponent offset.
struct ScoreObs {
  int covariate;  // row of the fixed factor
  double outcome;
  double offset;
};

// Damped Newton for S(v) = sum_i x_i (y_i - sigma(x_i^T v - o_i)) = 0, which
// is the stationarity condition of the offset logistic loss. Falls back to
// scaled gradient steps when the Hessian solve fails.
//
// Quasi-separated data has no interior root: the score also vanishes in the
// saturated tail, so an unconstrained solve can "converge" at an arbitrarily
// large iterate. The feasible class carries the entrywise bound, so iterates
// are only accepted while every fitted value over audit_rows stays within
// pred_cap; a solve that cannot make progress inside that region reports
// failure and the caller keeps its previous value.
bool solve_score_equation(const Eigen::MatrixXd& covariates, const std::vector<ScoreObs>& obs,
                          const Eigen::MatrixXd& audit_rows, int max_iter, double tol,
                          double pred_cap, Eigen::VectorXd& v) {
  const int r = static_cast<int>(covariates.cols());
  const double m_count = static_cast<double>(obs.size());
  if (obs.empty()) return true;

  auto loss_at = [&](const Eigen::VectorXd& value) {
    double loss = 0.0;
    for (const auto& o : obs)
      loss += btl_loss(o.outcome, covariates.row(o.covariate).dot(value) - o.offset);
    return loss;
  };
  auto fitted_in_bounds = [&](const Eigen::VectorXd& value) {
    return (audit_rows * value).cwiseAbs().maxCoeff() <= pred_cap;
  };

  Eigen::VectorXd score(r);
  Eigen::MatrixXd hess(r, r);
  double loss = loss_at(v);
  bool start_in_bounds = fitted_in_bounds(v);
  for (int it = 0; it < max_iter; ++it) {
    score.setZero();
    hess.setZero();
    for (const auto& o : obs) {
      double eta = covariates.row(o.covariate).dot(v) - o.offset;
      double resid = o.outcome - btl_prob(eta);
      double w = fisher_weight(eta);
      score.noalias() += resid * covariates.row(o.covariate).transpose();
      hess.noalias() += w * covariates.row(o.covariate).transpose() * covariates.row(o.covariate);
    }
    if (score.norm() < tol * m_count) return !start_in_bounds || fitted_in_bounds(v);

    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = ldlt.solve(score);
    } else {
      // Gradient fallback scaled by the Hessian trace.
      double scale = hess.trace();
      step = score / std::max(scale, 1e-12);
    }
    double damping = 1.0;
    bool accepted = false;
    for (int h = 0; h < 30; ++h) {
      Eigen::VectorXd candidate = v + damping * step;
      double cand_loss = loss_at(candidate);
      if (cand_loss < loss && (!start_in_bounds || fitted_in_bounds(candidate))) {
        v = candidate;
        loss = cand_loss;
        accepted = true;
        break;
      }
      damping *= 0.5;
    }
    if (!accepted) break;
  }
  score.setZero();
  for (const auto& o : obs) {
    double resid = o.outcome - btl_prob(covariates.row(o.covariate).dot(v) - o.offset);
    score.noalias() += resid * covariates.row(o.covariate).transpose();
  }
  return score.norm() < tol * m_count;
}

}  // namespace

Eigen::MatrixXd stage_b_left_update(const FactoredScores& stage_a, const ScoreMatrix& init,
                                    const ComparisonDataset& dataset,
                                    const std::vector<std::size_t>& split_records,
                                    const RefineConfig& config,
                                    RefineDiagnostics* diagnostics) {
  const int d_t = dataset.index.task_count;

  // Group split records by task. Each record enters once, oriented as stored;
  // the covariate indexes the first-listed model, the opponent enters through
  // the initializer offset.
  std::vector<std::vector<ScoreObs>> per_task(d_t);
  for (std::size_t i : split_records) {
    const auto& r = dataset.records[i];
    per_task[r.task].push_back(ScoreObs{r.model_a, static_cast<double>(r.outcome),
                                        init.values(r.task, r.model_b)});
  }

  Eigen::MatrixXd left = stage_a.left;
  const double pred_cap = 1.5 * config.entry_bound;
  std::vector<char> converged(d_t, 1);
  parallel_for(static_cast<std::size_t>(d_t), [&](std::size_t t) {
    if (per_task[t].empty()) {
      converged[t] = 2;  // skipped: keep Stage-A row
      return;
    }
    Eigen::VectorXd row = left.row(t).transpose();
    bool ok = solve_score_equation(stage_a.right, per_task[t], stage_a.right,
                                   config.newton_max_iter, config.newton_tol, pred_cap, row);
    if (ok) {
      left.row(t) = row.transpose();
      converged[t] = 1;
    } else {
      converged[t] = 0;  // keep the Stage-A row
    }
  });
  if (diagnostics) {
    for (int t = 0; t < d_t; ++t) {
      if (converged[t] == 0) ++diagnostics->stage_b_nonconverged;
      if (converged[t] == 2) ++diagnostics->stage_b_skipped;
    }
  }
  return left;
}

FactoredScores stage_c_column_update(const Eigen::MatrixXd& left_refined,
                                     const FactoredScores& stage_a,
                                     const ComparisonDataset& dataset,
                                     const std::vector<std::size_t>& split_records,
                                     const RefineConfig& config,
                                     RefineDiagnostics* diagnostics) {
  const int d_m = dataset.index.model_count;

  // Re-center the left factor columns: 1^T left = 0. Pairwise row differences
  // are unchanged.
  Eigen::MatrixXd left_bar = left_refined;
  Eigen::RowVectorXd mean_row = left_bar.colwise().mean();
  left_bar.rowwise() -= mean_row;

  // Opponent offsets come from the current reconstruction.
  Eigen::MatrixXd reconstruction = left_bar * stage_a.right.transpose();

  // Reorient so the target model is first; flip the outcome when swapping.
  std::vector<std::vector<ScoreObs>> per_model(d_m);
  for (std::size_t i : split_records) {
    const auto& r = dataset.records[i];
    per_model[r.model_a].push_back(ScoreObs{r.task, static_cast<double>(r.outcome),
                                            reconstruction(r.task, r.model_b)});
    per_model[r.model_b].push_back(ScoreObs{r.task, 1.0 - static_cast<double>(r.outcome),
                                            reconstruction(r.task, r.model_a)});
  }

  FactoredScores out;
  out.index = stage_a.index;
  out.rank = stage_a.rank;
  out.left = left_bar;
  out.right = stage_a.right;
  const double pred_cap = 1.5 * config.entry_bound;
  std::vector<char> converged(d_m, 1);
  parallel_for(static_cast<std::size_t>(d_m), [&](std::size_t m) {
    if (per_model[m].empty()) {
      converged[m] = 2;  // skipped: keep Stage-A column
      return;
    }
    Eigen::VectorXd col = out.right.row(m).transpose();
    bool ok = solve_score_equation(left_bar, per_model[m], left_bar,
                                   config.newton_max_iter, config.newton_tol, pred_cap, col);
    if (ok) {
      out.right.row(m) = col.transpose();
      converged[m] = 1;
    } else {
      converged[m] = 0;  // keep the Stage-A column
    }
  });
  if (diagnostics) {
    for (int m = 0; m < d_m; ++m) {
      if (converged[m] == 0) ++diagnostics->stage_c_nonconverged;
      if (converged[m] == 2) ++diagnostics->stage_c_skipped;
    }
  }
  return out;
}

RefineResult alt_min_refine(const ScoreMatrix& init, const ComparisonDataset& dataset,
                            const AltMinConfig& config) {
  const int d_t = dataset.index.task_count;
  const int d_m = dataset.index.model_count;
  FactoredScores factors = stage_a_right_factor(init, config.rank, config.incoherence_cap);

  std::vector<std::vector<std::size_t>> by_task(d_t);
  std::vector<std::vector<std::size_t>> by_model(d_m);
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    by_task[r.task].push_back(i);
    by_model[r.model_a].push_back(i);
    by_model[r.model_b].push_back(i);
  }

  RefineResult result;
  // Every fitted entry of the row or column being solved must respect the
  // entrywise bound of the feasible class, with slack for estimation noise.
  const double entry_cap = 1.2 * config.entry_bound;
  for (int pass = 0; pass < config.passes; ++pass) {
    // Row step: theta_t against right-row difference covariates. The
    // difference design carries both sides of each comparison, so no offsets
    // are needed.
    Eigen::MatrixXd diff_cov(dataset.records.size(), config.rank);
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
      const auto& r = dataset.records[i];
      diff_cov.row(static_cast<Eigen::Index>(i)) =
          factors.right.row(r.model_a) - factors.right.row(r.model_b);
    }
    parallel_for(static_cast<std::size_t>(d_t), [&](std::size_t t) {
      if (by_task[t].empty()) return;
      std::vector<ScoreObs> obs;
      obs.reserve(by_task[t].size());
      for (std::size_t i : by_task[t])
        obs.push_back(ScoreObs{static_cast<int>(i),
                               static_cast<double>(dataset.records[i].outcome), 0.0});
      Eigen::VectorXd row = factors.left.row(t).transpose();
      if (solve_score_equation(diff_cov, obs, factors.right, config.newton_max_iter,
                               config.newton_tol, entry_cap, row)) {
        factors.left.row(t) = row.transpose();
      } else if (pass == 0) {
        ++result.diagnostics.stage_b_nonconverged;
      }
    });

    // Column step: a_m against left-row covariates with opponent offsets from
    // the current reconstruction, Jacobi style within the pass.
    Eigen::MatrixXd reconstruction = factors.reconstruct();
    Eigen::MatrixXd right_next = factors.right;
    parallel_for(static_cast<std::size_t>(d_m), [&](std::size_t m) {
      if (by_model[m].empty()) return;
      std::vector<ScoreObs> obs;
      obs.reserve(by_model[m].size());
      for (std::size_t i : by_model[m]) {
        const auto& r = dataset.records[i];
        if (static_cast<std::size_t>(r.model_a) == m)
          obs.push_back(ScoreObs{r.task, static_cast<double>(r.outcome),
                                 reconstruction(r.task, r.model_b)});
        else
          obs.push_back(ScoreObs{r.task, 1.0 - static_cast<double>(r.outcome),
                                 reconstruction(r.task, r.model_a)});
      }
      Eigen::VectorXd col = factors.right.row(m).transpose();
      if (solve_score_equation(factors.left, obs, factors.left, config.newton_max_iter,
                               config.newton_tol, entry_cap, col)) {
        right_next.row(m) = col.transpose();
      } else if (pass == 0) {
        ++result.diagnostics.stage_c_nonconverged;
      }
    });
    factors.right = right_next;

    // Rebalance the factor scales (reconstruction-invariant QR of the right
    // factor) so later row steps stay well conditioned.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(factors.right);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d_m, config.rank);
    Eigen::MatrixXd s =
        q.transpose() * factors.right;  // right = q * s, reconstruction = left s^T q^T
    factors.left = factors.left * s.transpose();
    factors.right = q;
  }

  result.factors = factors;
  Eigen::MatrixXd reconstruction = factors.reconstruct();
  reconstruction =
      reconstruction.cwiseMax(-config.entry_bound).cwiseMin(config.entry_bound);
  result.scores = recenter_rows(dataset.index, reconstruction);
  return result;
}

RefineResult refine(const ScoreMatrix& init, const ComparisonDataset& dataset,
                    const RefineConfig& config) {
  config.validate(dataset);
  RefineResult result;

  ScoreMatrix centered_init = recenter_rows(init);
  FactoredScores current = stage_a_right_factor(centered_init, config.rank,
                                                config.incoherence_cap);
  ScoreMatrix offsets = centered_init;
  for (int pass = 0; pass < config.passes; ++pass) {
    Eigen::MatrixXd left = stage_b_left_update(current, offsets, dataset, config.splits[1],
                                               config, &result.diagnostics);
    current = stage_c_column_update(left, current, dataset, config.splits[2], config,
                                    &result.diagnostics);
    if (pass + 1 < config.passes) {
      offsets.values = current.reconstruct();  // refresh offsets between passes
    }
  }

  result.factors = current;
  Eigen::MatrixXd reconstruction = current.reconstruct();
  reconstruction = reconstruction.cwiseMax(-config.entry_bound).cwiseMin(config.entry_bound);
  result.scores = recenter_rows(dataset.index, reconstruction);
  return result;
}

}  // namespace lrcert
