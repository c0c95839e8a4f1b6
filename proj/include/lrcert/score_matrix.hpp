#pragma once

// ScoreMatrix: the dense task-by-model latent score matrix under the
// row-centered gauge (each task's scores sum to zero, since comparisons only
// identify within-task differences). FactoredScores: its rank-r factor form.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "lrcert/types.hpp"

namespace lrcert {

struct ScoreMatrix {
  TaskModelIndex index;
  Eigen::MatrixXd values;  // task_count x model_count

  // Gauge tolerance is scale-aware: float accumulation over d_m entries.
  static double gauge_tol(int d_m) { return 1e-8 * static_cast<double>(d_m); }

  void validate() const {
    index.validate();
    if (values.rows() != index.task_count || values.cols() != index.model_count)
      throw ConfigError("score matrix shape does not match index");
    if (!values.allFinite()) throw NumericalError("score matrix has non-finite entries");
    double tol = gauge_tol(index.model_count);
    for (int t = 0; t < values.rows(); ++t) {
      if (std::fabs(values.row(t).sum()) > tol)
        throw NumericalError("score matrix violates row-centering gauge at row " +
                             std::to_string(t));
    }
  }
};

// Rank-r factor pair: scores = left * right^T. The left factor carries the
// column gauge 1^T left = 0 used by the refinement stages.
struct FactoredScores {
  TaskModelIndex index;
  int rank = 0;
  Eigen::MatrixXd left;   // task_count x rank
  Eigen::MatrixXd right;  // model_count x rank

  Eigen::MatrixXd reconstruct() const { return left * right.transpose(); }
};

// Subtracts each row's mean. Within-row pairwise differences are preserved
// exactly; already-centered input is a fixed point.
inline ScoreMatrix recenter_rows(const TaskModelIndex& index, const Eigen::MatrixXd& m) {
  if (!m.allFinite()) throw NumericalError("recenter_rows: non-finite input");
  ScoreMatrix out;
  out.index = index;
  out.values = m;
  Eigen::VectorXd means = m.rowwise().mean();
  out.values.colwise() -= means;
  return out;
}

inline ScoreMatrix recenter_rows(const ScoreMatrix& m) {
  return recenter_rows(m.index, m.values);
}

// rk_t(m) = 1 + #{l != m : theta_{t,l} > theta_{t,m}} (strict counting, so
// tied models share the smaller rank).
inline int true_rank(const ScoreMatrix& scores, int task, int model) {
  const auto& v = scores.values;
  if (task < 0 || task >= v.rows() || model < 0 || model >= v.cols())
    throw std::invalid_argument("true_rank: index out of range");
  int above = 0;
  double s = v(task, model);
  for (int l = 0; l < v.cols(); ++l) {
    if (l != model && v(task, l) > s) ++above;
  }
  return 1 + above;
}

// Top-K set of exact size K for one task row. Ties broken by ascending model
// index so results are reproducible.
inline std::vector<int> topk_set(const Eigen::VectorXd& row, int k) {
  std::vector<int> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (row(a) != row(b)) return row(a) > row(b);
    return a < b;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace lrcert
