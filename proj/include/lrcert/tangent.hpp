#pragma once

// Tangent-space debiased inference: the closed-form tangent projector, the
// empirical Fisher operator, efficient-direction solves, cross-fitted
// one-step estimators, and plug-in covariances for sparse contrasts.

#include <cstdint>
#include <functional>
#include <vector>

#include "lrcert/ingest.hpp"
#include "lrcert/score_matrix.hpp"
#include "lrcert/types.hpp"

namespace lrcert {

// Sparse linear functional psi(Theta) = sum_k w_k * Theta[t_k, m_k].
struct ContrastSpec {
  struct Entry {
    int task;
    int model;
    double weight;
  };
  std::vector<Entry> entries;

  // Canonical score gap Theta[t, model_lhs] - Theta[t, model_rhs].
  static ContrastSpec gap(int task, int model_lhs, int model_rhs) {
    return ContrastSpec{{{task, model_lhs, +1.0}, {task, model_rhs, -1.0}}};
  }

  void validate(const TaskModelIndex& index) const;
  Eigen::MatrixXd dense(const TaskModelIndex& index) const;
  double apply(const Eigen::MatrixXd& theta) const;
};

// Orthonormal singular-vector pair spanning the estimated tangent space.
// U is gauge-orthogonal: 1^T U = 0.
struct TangentBasis {
  Eigen::MatrixXd u;  // d_t x r
  Eigen::MatrixXd v;  // d_m x r

  int rank() const { return static_cast<int>(u.cols()); }

  // Rank-r SVD of a score matrix with U re-orthogonalized against the ones
  // vector so the gauge invariant holds exactly.
  static TangentBasis from_scores(const ScoreMatrix& scores, int rank);

  void validate() const;
};

// P_T G = U U^T G + P_perp G V V^T - U U^T G V V^T, P_perp = I - 11^T/d_t.
Eigen::MatrixXd tangent_project(const Eigen::MatrixXd& g, const TangentBasis& basis);

// (1/n_aux) sum_i I(eta_hat_i) <H, X_i> X_i, accumulated sparsely.
Eigen::MatrixXd fisher_apply(const Eigen::MatrixXd& h, const ComparisonDataset& dataset,
                             const std::vector<std::size_t>& aux_records,
                             const ScoreMatrix& theta_hat);

struct CgOptions {
  double tol = 1e-8;       // relative residual
  int max_iter = 0;        // 0 = 10 * r * (d_t + d_m)
  double ridge = 1e-8;     // epsilon_A; scaled by 1/d_star
};

// Solves (P_T G_hat P_T + ridge/d_star) H = P_T Gamma by conjugate gradients
// restricted to the tangent space. Throws NumericalError when CG fails to
// reach tol within max_iter.
Eigen::MatrixXd solve_efficient_direction(const ContrastSpec& contrast,
                                          const TangentBasis& basis,
                                          const ComparisonDataset& dataset,
                                          const std::vector<std::size_t>& aux_records,
                                          const ScoreMatrix& theta_hat,
                                          const CgOptions& options = {});

// Debug oracle: assembles the ridged operator densely (d_star^2 entries) and
// solves by minimum-norm least squares. Guarded to d_star <= 400; never used
// on the production path.
Eigen::MatrixXd solve_efficient_direction_dense(const ContrastSpec& contrast,
                                                const TangentBasis& basis,
                                                const ComparisonDataset& dataset,
                                                const std::vector<std::size_t>& aux_records,
                                                const ScoreMatrix& theta_hat,
                                                double ridge = 1e-8);

// Reduced-coordinate solver for families of contrasts sharing one basis and
// auxiliary sample. Builds the restricted operator once on an orthonormal
// tangent coordinate system (dimension r*(d_t + d_m - r - 1), never d_star^2)
// and back-solves each contrast by Cholesky. Algebraically identical to the
// CG solution of the same ridged system.
class TangentFamilySolver {
 public:
  TangentFamilySolver(const TangentBasis& basis, const ComparisonDataset& dataset,
                      const std::vector<std::size_t>& aux_records,
                      const ScoreMatrix& theta_hat, double ridge = 1e-8);

  // Coordinates of the efficient direction for one contrast.
  Eigen::VectorXd solve_coefficients(const ContrastSpec& contrast) const;
  // Dense d_t x d_m direction from its coordinates.
  Eigen::MatrixXd direction_from_coefficients(const Eigen::VectorXd& coefficients) const;
  Eigen::MatrixXd solve(const ContrastSpec& contrast) const;

  // Coordinates of P_T Z for an arbitrary dense matrix Z; the pairing
  // <H_Gamma, Z> equals solve_coefficients(Gamma) . project_coordinates(Z).
  Eigen::VectorXd project_coordinates(const Eigen::MatrixXd& z) const;

  int dimension() const { return dim_; }
  const TangentBasis& basis() const { return basis_; }

 private:
  TangentBasis basis_;
  // Orthonormal complement of [U, 1] in R^{d_t}; in the single-task case it
  // instead holds a basis of the centered row space in R^{d_m}.
  Eigen::MatrixXd q_;
  int dim_ = 0;
  Eigen::LLT<Eigen::MatrixXd> cholesky_;

  Eigen::MatrixXd coordinate_matrix(int k) const;  // k-th basis element, dense
};

// One-step inference output for a single contrast.
struct GapInference {
  ContrastSpec contrast;
  double estimate = 0.0;
  double std_error = 0.0;
  std::vector<double> influence;  // per observation, length n

  void check_invariant() const;
};

struct OneStepOptions {
  int rank = 5;
  CgOptions cg;
  // When true, n <= 8 contrasts are solved by per-contrast CG; larger
  // families always use the reduced-coordinate solver.
  int cg_family_limit = 8;
};

using FitFunction = std::function<ScoreMatrix(const ComparisonDataset&)>;

struct OneStepResult {
  std::vector<GapInference> gaps;
  Eigen::MatrixXd covariance;  // plug-in Sigma_hat, p x p
};

// Cross-fitted one-step estimator: per fold, nuisances (theta, basis,
// efficient directions) are fit on the complement; the correction term
// averages score residuals over the held-out fold.
OneStepResult one_step_estimate(const std::vector<ContrastSpec>& contrasts,
                                const ComparisonDataset& dataset, const FoldAssignment& folds,
                                const FitFunction& fit_fn, const OneStepOptions& options);

// No-cross-fit variant: nuisances on aux records, correction averaged over
// eval records only (influence vectors have length eval_records.size()).
OneStepResult one_step_estimate_split(const std::vector<ContrastSpec>& contrasts,
                                      const ComparisonDataset& dataset,
                                      const std::vector<std::size_t>& aux_records,
                                      const std::vector<std::size_t>& eval_records,
                                      const FitFunction& fit_fn, const OneStepOptions& options);

}  // namespace lrcert
