#include "lrcert/per_task_btl.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <queue>

#include "lrcert/btl.hpp"
#include "lrcert/parallel.hpp"

namespace lrcert::per_task_btl {

namespace {

struct TaskData {
  std::vector<ComparisonRecord> records;
};

std::vector<TaskData> group_by_task(const ComparisonDataset& dataset) {
  std::vector<TaskData> tasks(dataset.index.task_count);
  for (const auto& r : dataset.records) tasks[r.task].records.push_back(r);
  return tasks;
}

double task_loss(const std::vector<ComparisonRecord>& recs, const Eigen::VectorXd& theta,
                 double ridge) {
  double loss = 0.5 * ridge * theta.squaredNorm();
  for (const auto& r : recs)
    loss += btl_loss(r.outcome, theta(r.model_a) - theta(r.model_b));
  return loss;
}

// Damped Newton on the ridged per-task likelihood. Iterates stay in the
// centered subspace because both gradient and Newton step do.
void fit_one_task(const std::vector<ComparisonRecord>& recs, int d_m, const FitOptions& opt,
                  Eigen::VectorXd& theta, bool& converged, int& iterations) {
  theta = Eigen::VectorXd::Zero(d_m);
  converged = true;
  iterations = 0;
  if (recs.empty()) return;
  double ridge = (opt.ridge_abs >= 0.0) ? opt.ridge_abs
                                        : opt.ridge_scale * static_cast<double>(recs.size());
  if (ridge <= 0.0) ridge = 1e-12;

  Eigen::VectorXd grad(d_m);
  Eigen::MatrixXd hess(d_m, d_m);
  double loss = task_loss(recs, theta, ridge);
  converged = false;
  for (int it = 0; it < opt.max_iter; ++it) {
    iterations = it + 1;
    grad = ridge * theta;
    hess = ridge * Eigen::MatrixXd::Identity(d_m, d_m);
    for (const auto& r : recs) {
      double eta = theta(r.model_a) - theta(r.model_b);
      double resid = btl_prob(eta) - static_cast<double>(r.outcome);
      double w = fisher_weight(eta);
      grad(r.model_a) += resid;
      grad(r.model_b) -= resid;
      hess(r.model_a, r.model_a) += w;
      hess(r.model_b, r.model_b) += w;
      hess(r.model_a, r.model_b) -= w;
      hess(r.model_b, r.model_a) -= w;
    }
    if (grad.lpNorm<Eigen::Infinity>() < opt.tol) {
      converged = true;
      return;
    }
    Eigen::VectorXd step = hess.llt().solve(grad);
    // Halve the step until the loss decreases.
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h < 30; ++h) {
      Eigen::VectorXd candidate = theta - scale * step;
      double cand_loss = task_loss(recs, candidate, ridge);
      if (cand_loss < loss) {
        theta = candidate;
        loss = cand_loss;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) return;  // stalled; flagged as non-converged
  }
  // Final gradient check after max_iter.
  grad = ridge * theta;
  for (const auto& r : recs) {
    double resid = btl_prob(theta(r.model_a) - theta(r.model_b)) - static_cast<double>(r.outcome);
    grad(r.model_a) += resid;
    grad(r.model_b) -= resid;
  }
  converged = grad.lpNorm<Eigen::Infinity>() < opt.tol;
}

}  // namespace

PerTaskFit fit(const ComparisonDataset& dataset, const FitOptions& options) {
  if (dataset.records.empty()) throw DataError("per_task_btl::fit: empty dataset");
  const int d_t = dataset.index.task_count;
  const int d_m = dataset.index.model_count;
  auto tasks = group_by_task(dataset);

  PerTaskFit out;
  out.scores.index = dataset.index;
  out.scores.values.resize(d_t, d_m);
  out.converged.assign(d_t, true);
  out.iterations.assign(d_t, 0);

  std::vector<Eigen::VectorXd> thetas(d_t);
  std::vector<char> conv(d_t, 1);
  parallel_for(static_cast<std::size_t>(d_t), [&](std::size_t t) {
    bool c = true;
    int iters = 0;
    fit_one_task(tasks[t].records, d_m, options, thetas[t], c, iters);
    conv[t] = c ? 1 : 0;
    out.iterations[t] = iters;
    // The ridge optimum is centered up to solver tolerance. Remove the
    // round-off over the observed models only, so unobserved models keep
    // score exactly 0 and the row still sums to zero.
    std::vector<char> observed(d_m, 0);
    int observed_count = 0;
    for (const auto& r : tasks[t].records) {
      if (!observed[r.model_a]) ++observed_count;
      if (!observed[r.model_b] && r.model_b != r.model_a) ++observed_count;
      observed[r.model_a] = observed[r.model_b] = 1;
    }
    if (observed_count > 0) {
      double mean = 0.0;
      for (int m = 0; m < d_m; ++m)
        if (observed[m]) mean += thetas[t](m);
      mean /= observed_count;
      for (int m = 0; m < d_m; ++m)
        if (observed[m]) thetas[t](m) -= mean;
    }
  });
  for (int t = 0; t < d_t; ++t) {
    out.converged[t] = conv[t] != 0;
    out.scores.values.row(t) = thetas[t].transpose();
  }
  return out;
}

GapInference wald_gap_inference(const PerTaskFit& fit, const ComparisonDataset& dataset,
                                int task, int model_a, int model_b,
                                const FitOptions& options) {
  const int d_m = dataset.index.model_count;
  if (task < 0 || task >= dataset.index.task_count)
    throw std::invalid_argument("wald_gap_inference: task out of range");
  if (model_a < 0 || model_a >= d_m || model_b < 0 || model_b >= d_m || model_a == model_b)
    throw std::invalid_argument("wald_gap_inference: bad model pair");

  std::vector<std::size_t> task_records;
  std::vector<char> observed(d_m, 0);
  std::vector<std::vector<int>> adj(d_m);
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    if (r.task != task) continue;
    task_records.push_back(i);
    observed[r.model_a] = observed[r.model_b] = 1;
    adj[r.model_a].push_back(r.model_b);
    adj[r.model_b].push_back(r.model_a);
  }
  if (task_records.empty() || !observed[model_a] || !observed[model_b])
    throw DataError("wald_gap_inference: insufficient connectivity");

  // Both endpoints must lie in one connected component of the comparison graph.
  std::vector<char> reach(d_m, 0);
  std::queue<int> frontier;
  frontier.push(model_a);
  reach[model_a] = 1;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (int v : adj[u]) {
      if (!reach[v]) {
        reach[v] = 1;
        frontier.push(v);
      }
    }
  }
  if (!reach[model_b]) throw DataError("wald_gap_inference: insufficient connectivity");

  const auto n_task = static_cast<double>(task_records.size());
  const auto n = static_cast<double>(dataset.records.size());
  double ridge = (options.ridge_abs >= 0.0) ? options.ridge_abs : options.ridge_scale * n_task;
  if (ridge <= 0.0) ridge = 1e-12;

  Eigen::VectorXd theta = fit.scores.values.row(task).transpose();
  Eigen::MatrixXd hess_bar = (ridge / n_task) * Eigen::MatrixXd::Identity(d_m, d_m);
  for (std::size_t i : task_records) {
    const auto& r = dataset.records[i];
    double w = fisher_weight(theta(r.model_a) - theta(r.model_b)) / n_task;
    hess_bar(r.model_a, r.model_a) += w;
    hess_bar(r.model_b, r.model_b) += w;
    hess_bar(r.model_a, r.model_b) -= w;
    hess_bar(r.model_b, r.model_a) -= w;
  }
  Eigen::VectorXd contrast = Eigen::VectorXd::Zero(d_m);
  contrast(model_a) = 1.0;
  contrast(model_b) = -1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(hess_bar);
  if (llt.info() != Eigen::Success)
    throw NumericalError("wald_gap_inference: information matrix not positive definite");
  Eigen::VectorXd weights = llt.solve(contrast);

  GapInference out;
  out.estimate = theta(model_a) - theta(model_b);
  out.influence.assign(dataset.records.size(), 0.0);
  double scale = n / n_task;
  for (std::size_t i : task_records) {
    const auto& r = dataset.records[i];
    double s = btl_score(r.outcome, theta(r.model_a) - theta(r.model_b));
    out.influence[i] = scale * s * (weights(r.model_a) - weights(r.model_b));
  }
  double mean_sq = 0.0;
  for (double v : out.influence) mean_sq += v * v;
  mean_sq /= n;
  out.std_error = std::sqrt(mean_sq / n);
  return out;
}

}  // namespace lrcert::per_task_btl
