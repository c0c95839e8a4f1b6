#include "lrcert/convex_init.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "lrcert/btl.hpp"

namespace lrcert {

namespace {

double smooth_loss(const ComparisonDataset& ds, const Eigen::MatrixXd& theta) {
  double loss = 0.0;
  for (const auto& r : ds.records)
    loss += btl_loss(r.outcome, theta(r.task, r.model_a) - theta(r.task, r.model_b));
  return loss / static_cast<double>(ds.records.size());
}

// grad = (1/n) sum (sigma(eta_i) - y_i) X_i, accumulated sparsely.
void smooth_grad(const ComparisonDataset& ds, const Eigen::MatrixXd& theta,
                 Eigen::MatrixXd& grad) {
  grad.setZero();
  double inv_n = 1.0 / static_cast<double>(ds.records.size());
  for (const auto& r : ds.records) {
    double resid = (btl_prob(theta(r.task, r.model_a) - theta(r.task, r.model_b)) -
                    static_cast<double>(r.outcome)) *
                   inv_n;
    grad(r.task, r.model_a) += resid;
    grad(r.task, r.model_b) -= resid;
  }
}

double nuclear_norm(const Eigen::MatrixXd& m) {
  return m.jacobiSvd().singularValues().sum();
}

// Singular-value soft-thresholding at level tau.
Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double tau, double* nuc_after = nullptr) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd sv = svd.singularValues();
  double nuc = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    sv(i) = std::max(0.0, sv(i) - tau);
    nuc += sv(i);
  }
  if (nuc_after) *nuc_after = nuc;
  return svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
}

// Alternating projection onto {row sums 0} and {|entries| <= B}; the gauge
// hyperplane is projected last so it holds exactly on exit.
void project_constraints(Eigen::MatrixXd& m, double bound) {
  for (int round = 0; round < 5; ++round) {
    Eigen::VectorXd means = m.rowwise().mean();
    m.colwise() -= means;
    m = m.cwiseMax(-bound).cwiseMin(bound);
  }
  Eigen::VectorXd means = m.rowwise().mean();
  m.colwise() -= means;
}

}  // namespace

double default_lambda(const ComparisonDataset& dataset, double scale) {
  if (dataset.records.empty()) throw DataError("default_lambda: empty dataset");
  double d_sum = dataset.index.task_count + dataset.index.model_count;
  double d_min = std::min(dataset.index.task_count, dataset.index.model_count);
  double n = static_cast<double>(dataset.records.size());
  return scale * std::sqrt(std::log(d_sum) / (n * d_min));
}

ScoreMatrix fit_convex(const ComparisonDataset& dataset, const ConvexConfig& config,
                       ConvexFitInfo* info) {
  if (dataset.records.empty()) throw DataError("fit_convex: empty dataset");
  config.validate(dataset.index);
  const int d_t = dataset.index.task_count;
  const int d_m = dataset.index.model_count;
  const double bound = config.entry_bound;
  const double lambda = config.lambda ? *config.lambda
                                      : default_lambda(dataset, config.lambda_scale);

  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(d_t, d_m);
  Eigen::MatrixXd grad(d_t, d_m);
  double step = (config.step_init > 0.0) ? config.step_init
                                         : static_cast<double>(d_t) * d_m;
  double loss = smooth_loss(dataset, theta);
  double objective = loss + lambda * nuclear_norm(theta);

  ConvexFitInfo local;
  ConvexFitInfo& out_info = info ? *info : local;
  out_info.lambda = lambda;

  for (int it = 0; it < config.max_iter; ++it) {
    out_info.iterations = it + 1;
    smooth_grad(dataset, theta, grad);
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      double nuc_after = 0.0;
      Eigen::MatrixXd candidate = svt(theta - step * grad, step * lambda, &nuc_after);
      project_constraints(candidate, bound);
      double cand_loss = smooth_loss(dataset, candidate);
      double cand_obj = cand_loss + lambda * nuclear_norm(candidate);
      if (!std::isfinite(cand_obj))
        throw NumericalError("fit_convex: non-finite objective (diverged step)");
      Eigen::MatrixXd diff = candidate - theta;
      double quad_bound = loss + grad.cwiseProduct(diff).sum() +
                          diff.squaredNorm() / (2.0 * step);
      // Require both the majorization and the full objective to not increase.
      if (cand_loss <= quad_bound + 1e-14 && cand_obj <= objective + 1e-14) {
        double rel_drop = (objective - cand_obj) / std::max(1.0, std::fabs(objective));
        theta = std::move(candidate);
        loss = cand_loss;
        objective = cand_obj;
        accepted = true;
        if (rel_drop >= 0.0 && rel_drop < config.tol) {
          out_info.converged = true;
          out_info.objective = objective;
          ScoreMatrix result;
          result.index = dataset.index;
          result.values = std::move(theta);
          return result;
        }
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out_info.converged = true;  // step collapsed; no further progress possible
      break;
    }
    step *= 1.25;  // regrow after an accepted step
  }
  out_info.objective = objective;
  ScoreMatrix result;
  result.index = dataset.index;
  result.values = std::move(theta);
  return result;
}

ScoreMatrix truncate_and_clip(const ScoreMatrix& m, int rank, double entry_bound) {
  if (rank < 1 || rank > std::min(m.values.rows(), m.values.cols()))
    throw ConfigError("truncate_and_clip: invalid rank");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.values, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("truncate_and_clip: SVD failed");
  Eigen::VectorXd sv = svd.singularValues().head(rank);
  Eigen::MatrixXd truncated = svd.matrixU().leftCols(rank) * sv.asDiagonal() *
                              svd.matrixV().leftCols(rank).transpose();
  truncated = truncated.cwiseMax(-entry_bound).cwiseMin(entry_bound);
  return recenter_rows(m.index, truncated);
}

ScoreMatrix fit_initializer(const ComparisonDataset& dataset, const ConvexConfig& config,
                            ConvexFitInfo* info) {
  ScoreMatrix full = fit_convex(dataset, config, info);
  return truncate_and_clip(full, config.rank, config.entry_bound);
}

}  // namespace lrcert
