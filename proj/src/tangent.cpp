#include "lrcert/tangent.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "lrcert/btl.hpp"
#include "lrcert/parallel.hpp"

namespace lrcert {

void ContrastSpec::validate(const TaskModelIndex& index) const {
  if (entries.empty()) throw ConfigError("contrast must have support size >= 1");
  for (const auto& e : entries) {
    if (e.task < 0 || e.task >= index.task_count) throw ConfigError("contrast task out of range");
    if (e.model < 0 || e.model >= index.model_count)
      throw ConfigError("contrast model out of range");
    if (!std::isfinite(e.weight)) throw ConfigError("contrast weight must be finite");
  }
}

Eigen::MatrixXd ContrastSpec::dense(const TaskModelIndex& index) const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(index.task_count, index.model_count);
  for (const auto& e : entries) g(e.task, e.model) += e.weight;
  return g;
}

double ContrastSpec::apply(const Eigen::MatrixXd& theta) const {
  double value = 0.0;
  for (const auto& e : entries) value += e.weight * theta(e.task, e.model);
  return value;
}

TangentBasis TangentBasis::from_scores(const ScoreMatrix& scores, int rank) {
  if (rank < 1 || rank > std::min(scores.values.rows(), scores.values.cols()))
    throw ConfigError("tangent basis rank out of range");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scores.values,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  TangentBasis basis;
  basis.u = svd.matrixU().leftCols(rank);
  basis.v = svd.matrixV().leftCols(rank);

  if (scores.values.rows() == 1) {
    // Single-task degenerate case: the task-side gauge cannot constrain a
    // 1-row factor, so the invariant moves to V (row-centered scores give
    // V orthogonal to the ones vector). The tangent space is the whole
    // centered row space.
    basis.u = Eigen::MatrixXd::Ones(1, 1);
    const double d_m = static_cast<double>(basis.v.rows());
    Eigen::RowVectorXd v_means = basis.v.colwise().sum() / d_m;
    basis.v.rowwise() -= v_means;
    for (int j = 0; j < basis.v.cols(); ++j) basis.v.col(j).normalize();
    return basis;
  }

  // Deflate the ones direction out of U, then restore orthonormality. Only
  // the span matters downstream (the projector uses U U^T).
  const double d_t = static_cast<double>(basis.u.rows());
  Eigen::RowVectorXd col_means = basis.u.colwise().sum() / d_t;
  basis.u.rowwise() -= col_means;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis.u);
  basis.u = qr.householderQ() * Eigen::MatrixXd::Identity(basis.u.rows(), rank);
  // QR of a ones-orthogonal matrix keeps columns ones-orthogonal; remove
  // round-off drift anyway.
  col_means = basis.u.colwise().sum() / d_t;
  basis.u.rowwise() -= col_means;
  for (int j = 0; j < basis.u.cols(); ++j) basis.u.col(j).normalize();
  return basis;
}

void TangentBasis::validate() const {
  const int r = rank();
  if (v.cols() != r) throw ConfigError("tangent basis rank mismatch");
  double err_u = (u.transpose() * u - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff();
  double err_v = (v.transpose() * v - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff();
  if (err_u > 1e-8 || err_v > 1e-8) throw NumericalError("tangent basis not orthonormal");
  if (u.rows() == 1) {
    // Single task: the gauge constraint lives on V.
    double gauge = (Eigen::RowVectorXd::Ones(v.rows()) * v).cwiseAbs().maxCoeff();
    if (gauge > 1e-8) throw NumericalError("tangent basis V not gauge-orthogonal");
    return;
  }
  double gauge = (Eigen::RowVectorXd::Ones(u.rows()) * u).cwiseAbs().maxCoeff();
  if (gauge > 1e-8) throw NumericalError("tangent basis U not gauge-orthogonal");
}

Eigen::MatrixXd tangent_project(const Eigen::MatrixXd& g, const TangentBasis& basis) {
  if (g.rows() == 1) {
    // Rank-one single-row manifold: the tangent space is the entire
    // row-centered space.
    return g.array() - g.mean();
  }
  const auto& u = basis.u;
  const auto& v = basis.v;
  const double d_t = static_cast<double>(g.rows());
  Eigen::MatrixXd ut_g = u.transpose() * g;             // r x d_m
  Eigen::MatrixXd g_v = g * v;                          // d_t x r
  Eigen::RowVectorXd col_means = g_v.colwise().sum() / d_t;
  g_v.rowwise() -= col_means;                           // P_perp G V
  Eigen::MatrixXd ut_g_v = ut_g * v;                    // r x r
  return u * ut_g + g_v * v.transpose() - u * (ut_g_v * v.transpose());
}

Eigen::MatrixXd fisher_apply(const Eigen::MatrixXd& h, const ComparisonDataset& dataset,
                             const std::vector<std::size_t>& aux_records,
                             const ScoreMatrix& theta_hat) {
  if (aux_records.empty()) throw DataError("fisher_apply: empty record set");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  const double inv_n = 1.0 / static_cast<double>(aux_records.size());
  for (std::size_t i : aux_records) {
    const auto& r = dataset.records[i];
    double eta = theta_hat.values(r.task, r.model_a) - theta_hat.values(r.task, r.model_b);
    double w = fisher_weight(eta) * (h(r.task, r.model_a) - h(r.task, r.model_b)) * inv_n;
    out(r.task, r.model_a) += w;
    out(r.task, r.model_b) -= w;
  }
  return out;
}

Eigen::MatrixXd solve_efficient_direction(const ContrastSpec& contrast,
                                          const TangentBasis& basis,
                                          const ComparisonDataset& dataset,
                                          const std::vector<std::size_t>& aux_records,
                                          const ScoreMatrix& theta_hat,
                                          const CgOptions& options) {
  contrast.validate(dataset.index);
  const int d_t = dataset.index.task_count;
  const int d_m = dataset.index.model_count;
  const double d_star = static_cast<double>(d_t) * d_m;
  const double ridge = options.ridge / d_star;
  const int r = basis.rank();
  const int max_iter = options.max_iter > 0 ? options.max_iter : 10 * r * (d_t + d_m);

  auto apply_op = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd px = tangent_project(x, basis);
    Eigen::MatrixXd gx = fisher_apply(px, dataset, aux_records, theta_hat);
    return Eigen::MatrixXd(tangent_project(gx, basis) + ridge * px);
  };

  Eigen::MatrixXd b = tangent_project(contrast.dense(dataset.index), basis);
  double b_norm = b.norm();
  if (b_norm == 0.0) return Eigen::MatrixXd::Zero(d_t, d_m);

  Eigen::MatrixXd x = d_star * b;  // constant-weight scale warm start
  Eigen::MatrixXd residual = b - apply_op(x);
  Eigen::MatrixXd direction = residual;
  double rho = residual.squaredNorm();
  for (int it = 0; it < max_iter; ++it) {
    if (std::sqrt(rho) / b_norm < options.tol) return tangent_project(x, basis);
    Eigen::MatrixXd op_dir = apply_op(direction);
    double denom = direction.cwiseProduct(op_dir).sum();
    if (denom <= 0.0) throw NumericalError("solve_efficient_direction: operator not PD");
    double alpha = rho / denom;
    x += alpha * direction;
    residual -= alpha * op_dir;
    double rho_next = residual.squaredNorm();
    direction = residual + (rho_next / rho) * direction;
    rho = rho_next;
  }
  throw NumericalError("solve_efficient_direction: CG did not converge, relative residual " +
                       std::to_string(std::sqrt(rho) / b_norm));
}

Eigen::MatrixXd solve_efficient_direction_dense(const ContrastSpec& contrast,
                                                const TangentBasis& basis,
                                                const ComparisonDataset& dataset,
                                                const std::vector<std::size_t>& aux_records,
                                                const ScoreMatrix& theta_hat, double ridge) {
  contrast.validate(dataset.index);
  const int d_t = dataset.index.task_count;
  const int d_m = dataset.index.model_count;
  const int d_star = d_t * d_m;
  if (d_star > 400)
    throw ConfigError("solve_efficient_direction_dense: debug path limited to d_star <= 400");

  Eigen::MatrixXd op(d_star, d_star);
  for (int j = 0; j < d_star; ++j) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(d_t, d_m);
    e(j % d_t, j / d_t) = 1.0;
    Eigen::MatrixXd pe = tangent_project(e, basis);
    Eigen::MatrixXd ape = tangent_project(fisher_apply(pe, dataset, aux_records, theta_hat),
                                          basis) +
                          (ridge / d_star) * pe;
    op.col(j) = Eigen::Map<Eigen::VectorXd>(ape.data(), d_star);
  }
  Eigen::MatrixXd rhs_mat = tangent_project(contrast.dense(dataset.index), basis);
  Eigen::VectorXd rhs = Eigen::Map<Eigen::VectorXd>(rhs_mat.data(), d_star);
  Eigen::VectorXd solution = op.completeOrthogonalDecomposition().solve(rhs);
  return tangent_project(Eigen::Map<Eigen::MatrixXd>(solution.data(), d_t, d_m), basis);
}

// ---------------------------------------------------------------------------
// TangentFamilySolver

TangentFamilySolver::TangentFamilySolver(const TangentBasis& basis,
                                         const ComparisonDataset& dataset,
                                         const std::vector<std::size_t>& aux_records,
                                         const ScoreMatrix& theta_hat, double ridge)
    : basis_(basis) {
  if (aux_records.empty()) throw DataError("TangentFamilySolver: empty record set");
  const int d_t = dataset.index.task_count;
  const int d_m = dataset.index.model_count;
  const int r = basis_.rank();

  if (d_t == 1) {
    // Single task: coordinates are an orthonormal basis of the centered row
    // space, stored in q_ (d_m x (d_m - 1)).
    Eigen::MatrixXd anchor = Eigen::MatrixXd::Constant(d_m, 1,
                                                       1.0 / std::sqrt(static_cast<double>(d_m)));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(anchor);
    Eigen::MatrixXd q_full = qr.householderQ() * Eigen::MatrixXd::Identity(d_m, d_m);
    q_ = q_full.rightCols(d_m - 1);
    dim_ = d_m - 1;
  } else {
    if (d_t - r - 1 < 0) throw ConfigError("TangentFamilySolver: rank too large for d_t");
    // Orthonormal complement of [U, 1/sqrt(d_t)] in R^{d_t}.
    Eigen::MatrixXd anchor(d_t, r + 1);
    anchor.leftCols(r) = basis_.u;
    anchor.col(r) = Eigen::VectorXd::Constant(d_t, 1.0 / std::sqrt(static_cast<double>(d_t)));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(anchor);
    Eigen::MatrixXd q_full = qr.householderQ() * Eigen::MatrixXd::Identity(d_t, d_t);
    q_ = q_full.rightCols(d_t - r - 1);
    dim_ = r * d_m + static_cast<int>(q_.cols()) * r;
  }
  const double d_star = static_cast<double>(d_t) * d_m;

  // M_jk = <E_j, G_hat E_k>; no projections needed since both sides lie in
  // the tangent space and G_hat is self-adjoint.
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
  parallel_for(static_cast<std::size_t>(dim_), [&](std::size_t k) {
    Eigen::MatrixXd g_k =
        fisher_apply(coordinate_matrix(static_cast<int>(k)), dataset, aux_records, theta_hat);
    m.col(static_cast<Eigen::Index>(k)) = project_coordinates(g_k);
  });
  // Symmetrize round-off and add the conditioning ridge.
  m = 0.5 * (m + m.transpose());
  m.diagonal().array() += ridge / d_star;
  cholesky_.compute(m);
  if (cholesky_.info() != Eigen::Success)
    throw NumericalError("TangentFamilySolver: restricted operator not positive definite");
}

Eigen::MatrixXd TangentFamilySolver::coordinate_matrix(int k) const {
  const int r = basis_.rank();
  const int d_m = static_cast<int>(basis_.v.rows());
  if (basis_.u.rows() == 1) return q_.col(k).transpose();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(basis_.u.rows(), d_m);
  if (k < r * d_m) {
    int j = k / d_m;
    int c = k % d_m;
    e.col(c) = basis_.u.col(j);
  } else {
    int k2 = k - r * d_m;
    int i = k2 / r;
    int j = k2 % r;
    e = q_.col(i) * basis_.v.col(j).transpose();
  }
  return e;
}

Eigen::VectorXd TangentFamilySolver::project_coordinates(const Eigen::MatrixXd& z) const {
  const int r = basis_.rank();
  const int d_m = static_cast<int>(basis_.v.rows());
  if (basis_.u.rows() == 1) return q_.transpose() * z.row(0).transpose();
  Eigen::VectorXd coords(dim_);
  Eigen::MatrixXd ut_z = basis_.u.transpose() * z;     // r x d_m
  for (int j = 0; j < r; ++j)
    coords.segment(j * d_m, d_m) = ut_z.row(j).transpose();
  Eigen::MatrixXd qt_z_v = (q_.transpose() * z) * basis_.v;  // (d_t-r-1) x r
  for (int i = 0; i < qt_z_v.rows(); ++i)
    coords.segment(r * d_m + i * r, r) = qt_z_v.row(i).transpose();
  return coords;
}

Eigen::VectorXd TangentFamilySolver::solve_coefficients(const ContrastSpec& contrast) const {
  const int r = basis_.rank();
  const int d_m = static_cast<int>(basis_.v.rows());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim_);
  if (basis_.u.rows() == 1) {
    for (const auto& e : contrast.entries) rhs += e.weight * q_.row(e.model).transpose();
  } else {
    for (const auto& e : contrast.entries) {
      for (int j = 0; j < r; ++j) rhs(j * d_m + e.model) += e.weight * basis_.u(e.task, j);
      for (int i = 0; i < q_.cols(); ++i)
        for (int j = 0; j < r; ++j)
          rhs(r * d_m + i * r + j) += e.weight * q_(e.task, i) * basis_.v(e.model, j);
    }
  }
  return cholesky_.solve(rhs);
}

Eigen::MatrixXd TangentFamilySolver::direction_from_coefficients(
    const Eigen::VectorXd& coefficients) const {
  const int r = basis_.rank();
  const int d_m = static_cast<int>(basis_.v.rows());
  if (basis_.u.rows() == 1) return (q_ * coefficients).transpose();
  Eigen::MatrixXd s(r, d_m);
  for (int j = 0; j < r; ++j) s.row(j) = coefficients.segment(j * d_m, d_m).transpose();
  Eigen::MatrixXd c(q_.cols(), r);
  for (int i = 0; i < c.rows(); ++i)
    c.row(i) = coefficients.segment(r * d_m + i * r, r).transpose();
  return basis_.u * s + q_ * (c * basis_.v.transpose());
}

Eigen::MatrixXd TangentFamilySolver::solve(const ContrastSpec& contrast) const {
  return direction_from_coefficients(solve_coefficients(contrast));
}

// ---------------------------------------------------------------------------
// One-step estimation

void GapInference::check_invariant() const {
  if (influence.empty()) return;
  double mean_sq = 0.0;
  for (double v : influence) mean_sq += v * v;
  mean_sq /= static_cast<double>(influence.size());
  double expected = std::sqrt(mean_sq / static_cast<double>(influence.size()));
  if (std::fabs(expected - std_error) > 1e-12 * std::max(1.0, expected))
    throw NumericalError("GapInference invariant violated");
}

namespace {

ComparisonDataset make_subset(const ComparisonDataset& dataset,
                              const std::vector<std::size_t>& indices) {
  ComparisonDataset out;
  out.index = dataset.index;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(dataset.records[i]);
  return out;
}

struct FoldPlan {
  std::vector<std::size_t> aux;
  std::vector<std::size_t> eval;
};

// Shared cross-fitting engine: correction terms are averaged over the union
// of eval sets; plug-in terms are weighted by eval share.
OneStepResult run_one_step(const std::vector<ContrastSpec>& contrasts,
                           const ComparisonDataset& dataset, const std::vector<FoldPlan>& plan,
                           const FitFunction& fit_fn, const OneStepOptions& options) {
  const auto p = contrasts.size();
  if (p == 0) throw ConfigError("one_step_estimate: no contrasts");
  for (const auto& c : contrasts) c.validate(dataset.index);

  std::size_t n_eval_total = 0;
  for (const auto& fold : plan) {
    if (fold.aux.empty()) throw DataError("one_step_estimate: empty fold complement");
    n_eval_total += fold.eval.size();
  }
  const double n_eval_d = static_cast<double>(n_eval_total);

  std::vector<double> plug(p, 0.0);
  // Influence matrix indexed by position in the concatenated eval order.
  Eigen::MatrixXd influence = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_eval_total),
                                                    static_cast<Eigen::Index>(p));
  std::size_t row_offset = 0;

  for (const auto& fold : plan) {
    ScoreMatrix theta = fit_fn(make_subset(dataset, fold.aux));
    TangentBasis basis = TangentBasis::from_scores(theta, options.rank);
    std::vector<Eigen::MatrixXd> directions(p);
    if (static_cast<int>(p) <= options.cg_family_limit) {
      for (std::size_t j = 0; j < p; ++j)
        directions[j] =
            solve_efficient_direction(contrasts[j], basis, dataset, fold.aux, theta, options.cg);
    } else {
      TangentFamilySolver solver(basis, dataset, fold.aux, theta, options.cg.ridge);
      parallel_for(p, [&](std::size_t j) { directions[j] = solver.solve(contrasts[j]); });
    }
    double eval_share = static_cast<double>(fold.eval.size()) / n_eval_d;
    for (std::size_t j = 0; j < p; ++j) plug[j] += eval_share * contrasts[j].apply(theta.values);

    for (std::size_t pos = 0; pos < fold.eval.size(); ++pos) {
      const auto& r = dataset.records[fold.eval[pos]];
      double eta = theta.values(r.task, r.model_a) - theta.values(r.task, r.model_b);
      double s = btl_score(r.outcome, eta);
      for (std::size_t j = 0; j < p; ++j) {
        double h_gap = directions[j](r.task, r.model_a) - directions[j](r.task, r.model_b);
        influence(static_cast<Eigen::Index>(row_offset + pos), static_cast<Eigen::Index>(j)) =
            s * h_gap;
      }
    }
    row_offset += fold.eval.size();
  }

  OneStepResult result;
  result.covariance = influence.transpose() * influence / n_eval_d;
  result.gaps.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    auto& gap = result.gaps[j];
    gap.contrast = contrasts[j];
    double correction = influence.col(static_cast<Eigen::Index>(j)).sum() / n_eval_d;
    gap.estimate = plug[j] + correction;
    gap.std_error =
        std::sqrt(result.covariance(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) /
                  n_eval_d);
    gap.influence.resize(n_eval_total);
    for (std::size_t i = 0; i < n_eval_total; ++i)
      gap.influence[i] = influence(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return result;
}

}  // namespace

OneStepResult one_step_estimate(const std::vector<ContrastSpec>& contrasts,
                                const ComparisonDataset& dataset, const FoldAssignment& folds,
                                const FitFunction& fit_fn, const OneStepOptions& options) {
  if (folds.assignment.size() != dataset.records.size())
    throw ConfigError("one_step_estimate: fold assignment length mismatch");
  std::vector<FoldPlan> plan(folds.fold_count);
  for (std::size_t i = 0; i < folds.assignment.size(); ++i) {
    int f = folds.assignment[i];
    for (int k = 0; k < folds.fold_count; ++k) {
      if (k == f)
        plan[k].eval.push_back(i);
      else
        plan[k].aux.push_back(i);
    }
  }
  return run_one_step(contrasts, dataset, plan, fit_fn, options);
}

OneStepResult one_step_estimate_split(const std::vector<ContrastSpec>& contrasts,
                                      const ComparisonDataset& dataset,
                                      const std::vector<std::size_t>& aux_records,
                                      const std::vector<std::size_t>& eval_records,
                                      const FitFunction& fit_fn, const OneStepOptions& options) {
  std::vector<FoldPlan> plan(1);
  plan[0].aux = aux_records;
  plan[0].eval = eval_records;
  return run_one_step(contrasts, dataset, plan, fit_fn, options);
}

}  // namespace lrcert
