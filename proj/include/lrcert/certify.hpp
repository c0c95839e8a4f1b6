#pragma once

// Multiplier-bootstrap certification: simultaneous score-gap bands, rank
// confidence bands, three-way top-K membership decisions, and inner/outer
// top-K sets. One shared critical value per declared family scope.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrcert/per_task_btl.hpp"
#include "lrcert/tangent.hpp"
#include "lrcert/types.hpp"

namespace lrcert {

struct BootstrapConfig {
  int draws = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (draws < 100) throw ConfigError("bootstrap draws must be >= 100 for quantile stability");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
  }
};

struct RankBand {
  int task = 0;
  int model = 0;
  int lower = 1;             // 1 + certified_above
  int upper = 1;             // d_m - certified_below
  int certified_above = 0;   // A_t(m)
  int certified_below = 0;   // B_t(m)
};

enum class TopKCall { kCertifiedIn, kCertifiedOut, kUnresolved };

struct TopKDecision {
  int task = 0;
  int model = 0;
  int k = 0;
  TopKCall decision = TopKCall::kUnresolved;
};

// One competitor gap Delta = Theta[task, competitor] - Theta[task, model],
// with its simultaneous interval.
struct GapBand {
  int task = 0;
  int competitor = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

enum class FamilyScope { kOneTask, kAllTasks };

struct CertificationReport {
  std::string family;  // "one_task" | "all_tasks" | "all_pairs"
  std::string method;  // "joint" | "per_task_btl"
  double alpha = 0.05;
  double critical_value = 0.0;
  int model = -1;
  int k_top = 0;
  std::size_t n = 0;
  int draws = 0;
  std::vector<GapBand> bands;
  std::vector<RankBand> rank_bands;
  std::vector<TopKDecision> topk;
  // diagnostics
  int nonconverged_fits = 0;
  int degenerate_gaps = 0;  // zero-variance gaps excluded from the bootstrap max

  nlohmann::json to_json(const TaskModelIndex& index) const;
};

// Conditional (1-alpha)-quantile of max_j |n^{-1/2} sum_i xi_i phi_ij /
// sigma_j| over `draws` standard-normal multiplier replicates. The quantile
// is the order statistic at ceil((1-alpha)*draws).
double bootstrap_critical_value(const Eigen::MatrixXd& influence, const Eigen::VectorXd& sigmas,
                                const BootstrapConfig& config);

// Inverts d_m - 1 simultaneous gap intervals into [1 + A_t(m), d_m - B_t(m)].
RankBand rank_band(const std::vector<GapBand>& gaps, int task, int model, int d_m,
                   double critical_value, std::size_t n);

TopKDecision topk_decide(const RankBand& band, int k);

// Joint-method certification. Cross-fits nuisances per fold via fit_fn,
// solves the gap family's efficient directions, and calibrates one shared
// multiplier-bootstrap critical value for the scope.
CertificationReport certify_model(const ComparisonDataset& dataset, const FitFunction& fit_fn,
                                  int rank, const FoldAssignment& folds, FamilyScope scope,
                                  int scope_task, int model, int k_top,
                                  const BootstrapConfig& config, const CgOptions& cg = {});

// Batch variant: many certification targets share the cross-fitted nuisances
// and the multiplier draws; every target still gets its own family-wise
// critical value.
struct CertifyTarget {
  FamilyScope scope = FamilyScope::kOneTask;
  int scope_task = 0;  // ignored for kAllTasks
  int model = 0;
};

std::vector<CertificationReport> certify_targets(const ComparisonDataset& dataset,
                                                 const FitFunction& fit_fn, int rank,
                                                 const FoldAssignment& folds,
                                                 const std::vector<CertifyTarget>& targets,
                                                 int k_top, const BootstrapConfig& config,
                                                 const CgOptions& cg = {});

std::vector<CertificationReport> certify_targets_per_task_btl(
    const ComparisonDataset& dataset, const std::vector<CertifyTarget>& targets, int k_top,
    const BootstrapConfig& config, const per_task_btl::FitOptions& fit_options = {});

// Per-task BTL baseline with Wald plug-in influence functions.
CertificationReport certify_model_per_task_btl(const ComparisonDataset& dataset,
                                               FamilyScope scope, int scope_task, int model,
                                               int k_top, const BootstrapConfig& config,
                                               const per_task_btl::FitOptions& fit_options = {});

struct TopKSets {
  double critical_value = 0.0;
  std::vector<std::vector<int>> inner;  // per task, sorted model indices
  std::vector<std::vector<int>> outer;
};

// Simultaneous inner/outer top-K sets over the full family of within-task
// gaps. Guard: the family size d_t * d_m * (d_m - 1) must not exceed 10^6.
TopKSets topk_sets(const ComparisonDataset& dataset, const FitFunction& fit_fn, int rank,
                   const FoldAssignment& folds, int k_top, const BootstrapConfig& config,
                   const CgOptions& cg = {});

// Counting rules from hand-built intervals; used by topk_sets and testable in
// isolation. lower/upper are per (task, model, competitor) interval endpoints
// indexed [task][model][competitor].
TopKSets topk_sets_from_bands(const std::vector<Eigen::MatrixXd>& lower,
                              const std::vector<Eigen::MatrixXd>& upper, int k_top);

}  // namespace lrcert
