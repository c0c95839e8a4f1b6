#include "lrcert/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "lrcert/btl.hpp"
#include "lrcert/parallel.hpp"
#include "lrcert/rng.hpp"

namespace lrcert {

namespace {

// Zero-variance gaps are excluded from the studentized maximum; their
// intervals are treated as vacuous downstream, which can only leave them
// unresolved.
constexpr double kSigmaFloor = 1e-12;

double quantile_from_draws(std::vector<double>& draws, double alpha) {
  std::sort(draws.begin(), draws.end());
  auto k = static_cast<std::size_t>(
      std::ceil((1.0 - alpha) * static_cast<double>(draws.size())));
  if (k < 1) k = 1;
  if (k > draws.size()) k = draws.size();
  return draws[k - 1];
}

// Which target models per task need variance columns.
struct VariancePlan {
  // targets[t] = sorted distinct target models for task t; when all_models is
  // set, full d_m x d_m second-moment matrices are kept instead.
  std::vector<std::vector<int>> targets;
  bool all_models = false;
};

// Elementary per-(task, column) representation of a gap family. Every
// within-task gap statistic is a difference of two elementary columns, so
// estimates, variances, and bootstrap sums assemble from per-elementary
// accumulators:
//
//   psi_hat(t,l,m)    = plug(t,l) - plug(t,m) + (corr(t,l) - corr(t,m)) / n
//   sigma_hat(t,l,m)^2 = (Q_t(l,l) - 2 Q_t(l,m) + Q_t(m,m)) / n
//   sum_i xi_i phi_i  = w(t,l) - w(t,m), w from bootstrap_accumulate
class ElementaryFamily {
 public:
  virtual ~ElementaryFamily() = default;
  // Per-replicate elementary bootstrap sums w(t,c).
  virtual Eigen::MatrixXd bootstrap_accumulate(Rng& rng) const = 0;

  std::size_t n() const { return n_; }
  int nonconverged() const { return nonconverged_; }

  double gap_estimate(int t, int l, int m) const {
    double n_d = static_cast<double>(n_);
    return plug_(t, l) - plug_(t, m) + (corr_(t, l) - corr_(t, m)) / n_d;
  }

  double gap_sigma(int t, int l, int m) const {
    double cross = q_cols_[t](l, target_slot(t, m));
    double v = q_diag_[t](l) - 2.0 * cross + q_diag_[t](m);
    return std::sqrt(std::max(v, 0.0) / static_cast<double>(n_));
  }

 protected:
  int target_slot(int t, int m) const {
    if (plan_.all_models) return m;
    const auto& targets = plan_.targets[t];
    auto it = std::lower_bound(targets.begin(), targets.end(), m);
    if (it == targets.end() || *it != m)
      throw std::invalid_argument("gap_sigma: model not in the variance plan");
    return static_cast<int>(it - targets.begin());
  }

  void init_variance_storage(int d_t, int d_m) {
    q_diag_.assign(d_t, Eigen::VectorXd::Zero(d_m));
    q_cols_.resize(d_t);
    for (int t = 0; t < d_t; ++t) {
      int cols = plan_.all_models ? d_m : static_cast<int>(plan_.targets[t].size());
      q_cols_[t] = Eigen::MatrixXd::Zero(d_m, cols);
    }
  }

  // Accumulates diag and target columns of Q_t += e_rows^T e_rows, where
  // e_rows is (records x d_m) of s_i * e_i(t, c).
  void accumulate_variance(int t, const Eigen::MatrixXd& e_rows) {
    q_diag_[t] += e_rows.array().square().colwise().sum().matrix().transpose();
    if (plan_.all_models) {
      q_cols_[t].noalias() += e_rows.transpose() * e_rows;
    } else if (!plan_.targets[t].empty()) {
      Eigen::MatrixXd target_block(e_rows.rows(),
                                   static_cast<Eigen::Index>(plan_.targets[t].size()));
      for (std::size_t j = 0; j < plan_.targets[t].size(); ++j)
        target_block.col(static_cast<Eigen::Index>(j)) = e_rows.col(plan_.targets[t][j]);
      q_cols_[t].noalias() += e_rows.transpose() * target_block;
    }
  }

  VariancePlan plan_;
  Eigen::MatrixXd plug_;               // d_t x d_m
  Eigen::MatrixXd corr_;               // d_t x d_m, sum_i s_i e_i(t,c)
  std::vector<Eigen::VectorXd> q_diag_;
  std::vector<Eigen::MatrixXd> q_cols_;
  std::size_t n_ = 0;
  int nonconverged_ = 0;
};

// Joint method: cross-fitted one-step elementary statistics.
class JointElementaryFamily final : public ElementaryFamily {
 public:
  JointElementaryFamily(const ComparisonDataset& dataset, const FitFunction& fit_fn, int rank,
                        const FoldAssignment& folds, const CgOptions& cg,
                        const VariancePlan& plan) {
    plan_ = plan;
    const int d_t = dataset.index.task_count;
    const int d_m = dataset.index.model_count;
    n_ = dataset.records.size();
    if (folds.assignment.size() != n_)
      throw ConfigError("certify: fold assignment length mismatch");
    plug_ = Eigen::MatrixXd::Zero(d_t, d_m);
    corr_ = Eigen::MatrixXd::Zero(d_t, d_m);
    init_variance_storage(d_t, d_m);
    fold_state_.resize(folds.fold_count);

    for (int k = 0; k < folds.fold_count; ++k) {
      FoldState& state = fold_state_[k];
      std::vector<std::size_t> aux;
      for (std::size_t i = 0; i < n_; ++i) {
        if (folds.assignment[i] == k)
          state.eval.push_back(i);
        else
          aux.push_back(i);
      }
      if (aux.empty()) throw DataError("certify: empty fold complement");

      ComparisonDataset aux_ds;
      aux_ds.index = dataset.index;
      aux_ds.records.reserve(aux.size());
      for (std::size_t i : aux) aux_ds.records.push_back(dataset.records[i]);
      ScoreMatrix theta = fit_fn(aux_ds);
      TangentBasis basis = TangentBasis::from_scores(theta, rank);
      state.solver = std::make_unique<TangentFamilySolver>(basis, dataset, aux, theta, cg.ridge);

      // Elementary coefficient solves for every (t, c).
      state.coefficients.resize(state.solver->dimension(),
                                static_cast<Eigen::Index>(d_t) * d_m);
      parallel_for(static_cast<std::size_t>(d_t) * d_m, [&](std::size_t tc) {
        int t = static_cast<int>(tc) / d_m;
        int c = static_cast<int>(tc) % d_m;
        state.coefficients.col(static_cast<Eigen::Index>(tc)) =
            state.solver->solve_coefficients(ContrastSpec{{{t, c, 1.0}}});
      });

      double share = static_cast<double>(state.eval.size()) / static_cast<double>(n_);
      plug_ += share * theta.values;

      // Dense elementary directions, then one streaming pass over the eval
      // fold per contrast-task.
      std::vector<Eigen::MatrixXd> dense(static_cast<std::size_t>(d_t) * d_m);
      parallel_for(dense.size(), [&](std::size_t tc) {
        dense[tc] = state.solver->direction_from_coefficients(
            state.coefficients.col(static_cast<Eigen::Index>(tc)));
      });
      state.resid.resize(state.eval.size());
      state.records.resize(state.eval.size());
      for (std::size_t pos = 0; pos < state.eval.size(); ++pos) {
        const auto& r = dataset.records[state.eval[pos]];
        state.records[pos] = &r;
        double eta = theta.values(r.task, r.model_a) - theta.values(r.task, r.model_b);
        state.resid[pos] = btl_score(r.outcome, eta);
      }
      Eigen::MatrixXd e_rows(static_cast<Eigen::Index>(state.eval.size()), d_m);
      for (int t = 0; t < d_t; ++t) {
        for (std::size_t pos = 0; pos < state.eval.size(); ++pos) {
          const auto& r = *state.records[pos];
          double s = state.resid[pos];
          for (int c = 0; c < d_m; ++c) {
            const Eigen::MatrixXd& h = dense[static_cast<std::size_t>(t) * d_m + c];
            e_rows(static_cast<Eigen::Index>(pos), c) =
                s * (h(r.task, r.model_a) - h(r.task, r.model_b));
          }
        }
        corr_.row(t) += e_rows.colwise().sum();
        accumulate_variance(t, e_rows);
      }
    }
  }

  Eigen::MatrixXd bootstrap_accumulate(Rng& rng) const override {
    const int d_t = static_cast<int>(plug_.rows());
    const int d_m = static_cast<int>(plug_.cols());
    // xi is drawn in original record order so the stream is canonical.
    std::vector<double> xi(n_);
    for (std::size_t i = 0; i < n_; ++i) xi[i] = rng.normal();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d_t, d_m);
    for (const auto& fold : fold_state_) {
      Eigen::MatrixXd z = Eigen::MatrixXd::Zero(d_t, d_m);
      for (std::size_t pos = 0; pos < fold.eval.size(); ++pos) {
        const auto& r = *fold.records[pos];
        double v = xi[fold.eval[pos]] * fold.resid[pos];
        z(r.task, r.model_a) += v;
        z(r.task, r.model_b) -= v;
      }
      Eigen::VectorXd z_coords = fold.solver->project_coordinates(z);
      Eigen::VectorXd w_flat = fold.coefficients.transpose() * z_coords;
      w += Eigen::Map<const Eigen::MatrixXd>(w_flat.data(), d_m, d_t).transpose();
    }
    return w;
  }

 private:
  struct FoldState {
    std::unique_ptr<TangentFamilySolver> solver;
    std::vector<std::size_t> eval;
    std::vector<const ComparisonRecord*> records;
    std::vector<double> resid;       // s(Y_i, eta_hat_i) on the eval fold
    Eigen::MatrixXd coefficients;    // D x (d_t * d_m), column (t*d_m + c)
  };
  std::vector<FoldState> fold_state_;
};

// Per-task BTL baseline: Wald plug-in elementary statistics. The elementary
// influence is e_i(t,c) = (n/n_t) * [H_bar_t^{-1}(e_a - e_b)](c) for records
// in task t, zero otherwise.
class BaselineElementaryFamily final : public ElementaryFamily {
 public:
  BaselineElementaryFamily(const ComparisonDataset& dataset,
                           const per_task_btl::FitOptions& options, const VariancePlan& plan) {
    plan_ = plan;
    const int d_t = dataset.index.task_count;
    const int d_m = dataset.index.model_count;
    n_ = dataset.records.size();
    fit_ = per_task_btl::fit(dataset, options);
    for (bool c : fit_.converged)
      if (!c) ++nonconverged_;
    plug_ = fit_.scores.values;
    corr_ = Eigen::MatrixXd::Zero(d_t, d_m);  // Wald: no one-step correction
    init_variance_storage(d_t, d_m);

    task_records_.resize(d_t);
    for (std::size_t i = 0; i < dataset.records.size(); ++i)
      task_records_[dataset.records[i].task].push_back(i);

    weights_.resize(d_t);
    resid_.assign(n_, 0.0);
    scale_.assign(d_t, 0.0);
    for (int t = 0; t < d_t; ++t) {
      const auto& recs = task_records_[t];
      if (recs.empty()) {
        weights_[t] = Eigen::MatrixXd::Zero(d_m, d_m);
        continue;
      }
      double n_task = static_cast<double>(recs.size());
      scale_[t] = static_cast<double>(n_) / n_task;
      double ridge = (options.ridge_abs >= 0.0) ? options.ridge_abs
                                                : options.ridge_scale * n_task;
      if (ridge <= 0.0) ridge = 1e-12;
      Eigen::MatrixXd hess_bar = (ridge / n_task) * Eigen::MatrixXd::Identity(d_m, d_m);
      Eigen::VectorXd theta = fit_.scores.values.row(t).transpose();
      for (std::size_t i : recs) {
        const auto& r = dataset.records[i];
        double eta = theta(r.model_a) - theta(r.model_b);
        resid_[i] = btl_score(r.outcome, eta);
        double w = fisher_weight(eta) / n_task;
        hess_bar(r.model_a, r.model_a) += w;
        hess_bar(r.model_b, r.model_b) += w;
        hess_bar(r.model_a, r.model_b) -= w;
        hess_bar(r.model_b, r.model_a) -= w;
      }
      weights_[t] = hess_bar.llt().solve(Eigen::MatrixXd::Identity(d_m, d_m));

      Eigen::MatrixXd e_rows(static_cast<Eigen::Index>(recs.size()), d_m);
      for (std::size_t pos = 0; pos < recs.size(); ++pos) {
        const auto& r = dataset.records[recs[pos]];
        Eigen::VectorXd g =
            scale_[t] * (weights_[t].col(r.model_a) - weights_[t].col(r.model_b));
        e_rows.row(static_cast<Eigen::Index>(pos)) = resid_[recs[pos]] * g.transpose();
      }
      corr_.row(t) += e_rows.colwise().sum();
      accumulate_variance(t, e_rows);
    }
    records_ = &dataset;
  }

  Eigen::MatrixXd bootstrap_accumulate(Rng& rng) const override {
    const int d_t = static_cast<int>(plug_.rows());
    const int d_m = static_cast<int>(plug_.cols());
    std::vector<double> xi(n_);
    for (std::size_t i = 0; i < n_; ++i) xi[i] = rng.normal();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d_t, d_m);
    for (int t = 0; t < d_t; ++t) {
      if (task_records_[t].empty()) continue;
      Eigen::VectorXd z = Eigen::VectorXd::Zero(d_m);
      for (std::size_t i : task_records_[t]) {
        const auto& r = records_->records[i];
        double v = xi[i] * resid_[i];
        z(r.model_a) += v;
        z(r.model_b) -= v;
      }
      w.row(t) = (scale_[t] * (weights_[t] * z)).transpose();
    }
    return w;
  }

  const per_task_btl::PerTaskFit& fit() const { return fit_; }

 private:
  per_task_btl::PerTaskFit fit_;
  const ComparisonDataset* records_ = nullptr;
  std::vector<std::vector<std::size_t>> task_records_;
  std::vector<Eigen::MatrixXd> weights_;  // per task: (H_bar)^{-1}
  std::vector<double> resid_;
  std::vector<double> scale_;  // n / n_t
};

// One certification family: scope tasks plus the fixed target model.
struct FamilyPlan {
  std::vector<int> scope_tasks;
  int model = 0;
  std::string name;
};

VariancePlan variance_plan_for(const ComparisonDataset& dataset,
                               const std::vector<FamilyPlan>& plans) {
  VariancePlan plan;
  plan.targets.resize(dataset.index.task_count);
  for (const auto& family : plans)
    for (int t : family.scope_tasks) plan.targets[t].push_back(family.model);
  for (auto& targets : plan.targets) {
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  }
  return plan;
}

// Shared bootstrap replicates across many families; each family takes its own
// max and therefore its own critical value.
std::vector<CertificationReport> assemble_reports(const ElementaryFamily& family,
                                                  const std::vector<FamilyPlan>& plans,
                                                  int k_top, int d_m,
                                                  const BootstrapConfig& config,
                                                  const std::string& method) {
  config.validate();
  const double sqrt_n = std::sqrt(static_cast<double>(family.n()));

  struct Member {
    int task;
    int competitor;
    double sigma;
  };
  std::vector<std::vector<Member>> members(plans.size());
  for (std::size_t f = 0; f < plans.size(); ++f) {
    for (int t : plans[f].scope_tasks)
      for (int l = 0; l < d_m; ++l)
        if (l != plans[f].model)
          members[f].push_back({t, l, family.gap_sigma(t, l, plans[f].model)});
  }

  // draws[f][b] = family-f max statistic in replicate b.
  std::vector<std::vector<double>> draws(plans.size(),
                                         std::vector<double>(config.draws, 0.0));
  Rng master(config.seed);
  parallel_for(static_cast<std::size_t>(config.draws), [&](std::size_t b) {
    Rng rng = master.split(0xb007 + b);
    Eigen::MatrixXd w = family.bootstrap_accumulate(rng);
    for (std::size_t f = 0; f < plans.size(); ++f) {
      double stat = 0.0;
      int model = plans[f].model;
      for (const auto& mem : members[f]) {
        if (mem.sigma < kSigmaFloor) continue;
        stat = std::max(stat, std::fabs((w(mem.task, mem.competitor) - w(mem.task, model)) /
                                        (sqrt_n * mem.sigma)));
      }
      draws[f][b] = stat;
    }
  });

  std::vector<CertificationReport> reports(plans.size());
  for (std::size_t f = 0; f < plans.size(); ++f) {
    double critical = quantile_from_draws(draws[f], config.alpha);
    const int model = plans[f].model;

    CertificationReport report;
    report.family = plans[f].name;
    report.method = method;
    report.alpha = config.alpha;
    report.critical_value = critical;
    report.model = model;
    report.k_top = k_top;
    report.n = family.n();
    report.draws = config.draws;
    report.nonconverged_fits = family.nonconverged();
    for (const auto& mem : members[f])
      if (mem.sigma < kSigmaFloor) ++report.degenerate_gaps;

    for (int t : plans[f].scope_tasks) {
      std::vector<GapBand> task_bands;
      for (const auto& mem : members[f]) {
        if (mem.task != t) continue;
        GapBand band;
        band.task = t;
        band.competitor = mem.competitor;
        band.estimate = family.gap_estimate(t, band.competitor, model);
        band.std_error = mem.sigma;
        if (mem.sigma < kSigmaFloor) {
          // Vacuous interval: never certifies in either direction.
          band.lower = -std::numeric_limits<double>::infinity();
          band.upper = std::numeric_limits<double>::infinity();
        } else {
          double half = critical * mem.sigma / sqrt_n;
          band.lower = band.estimate - half;
          band.upper = band.estimate + half;
        }
        task_bands.push_back(band);
      }
      RankBand rb = rank_band(task_bands, t, model, d_m, critical, family.n());
      report.rank_bands.push_back(rb);
      report.topk.push_back(topk_decide(rb, k_top));
      report.bands.insert(report.bands.end(), task_bands.begin(), task_bands.end());
    }
    reports[f] = std::move(report);
  }
  return reports;
}

std::vector<FamilyPlan> make_plans(const ComparisonDataset& dataset,
                                   const std::vector<CertifyTarget>& targets) {
  std::vector<FamilyPlan> plans;
  plans.reserve(targets.size());
  for (const auto& target : targets) {
    if (target.model < 0 || target.model >= dataset.index.model_count)
      throw ConfigError("certify: model index out of range");
    FamilyPlan plan;
    plan.model = target.model;
    if (target.scope == FamilyScope::kOneTask) {
      if (target.scope_task < 0 || target.scope_task >= dataset.index.task_count)
        throw ConfigError("certify: scope task out of range");
      plan.scope_tasks.push_back(target.scope_task);
      plan.name = "one_task";
    } else {
      for (int t = 0; t < dataset.index.task_count; ++t) plan.scope_tasks.push_back(t);
      plan.name = "all_tasks";
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

}  // namespace

double bootstrap_critical_value(const Eigen::MatrixXd& influence, const Eigen::VectorXd& sigmas,
                                const BootstrapConfig& config) {
  config.validate();
  const auto n = influence.rows();
  const auto p = influence.cols();
  if (p < 1) throw ConfigError("bootstrap_critical_value: need p >= 1 columns");
  if (sigmas.size() != p) throw ConfigError("bootstrap_critical_value: sigma length mismatch");
  for (Eigen::Index j = 0; j < p; ++j)
    if (!(sigmas(j) > 0.0)) throw NumericalError("bootstrap_critical_value: degenerate contrast");

  const double sqrt_n = std::sqrt(static_cast<double>(n));
  std::vector<double> draws(static_cast<std::size_t>(config.draws));
  Rng master(config.seed);
  parallel_for(draws.size(), [&](std::size_t b) {
    Rng rng = master.split(0xb007 + b);
    Eigen::VectorXd xi(n);
    for (Eigen::Index i = 0; i < n; ++i) xi(i) = rng.normal();
    Eigen::VectorXd sums = influence.transpose() * xi;
    draws[b] = (sums.cwiseQuotient(sigmas).cwiseAbs() / sqrt_n).maxCoeff();
  });
  return quantile_from_draws(draws, config.alpha);
}

RankBand rank_band(const std::vector<GapBand>& gaps, int task, int model, int d_m,
                   double critical_value, std::size_t n) {
  (void)critical_value;
  (void)n;
  if (static_cast<int>(gaps.size()) != d_m - 1)
    throw ConfigError("rank_band: expected exactly d_m - 1 gaps");
  std::vector<char> seen(d_m, 0);
  seen[model] = 1;
  RankBand band;
  band.task = task;
  band.model = model;
  for (const auto& g : gaps) {
    if (g.task != task || g.competitor == model || g.competitor < 0 || g.competitor >= d_m ||
        seen[g.competitor])
      throw ConfigError("rank_band: inconsistent gap family");
    seen[g.competitor] = 1;
    if (g.lower > 0.0) ++band.certified_above;
    if (g.upper < 0.0) ++band.certified_below;
  }
  band.lower = 1 + band.certified_above;
  band.upper = d_m - band.certified_below;
  if (band.lower > band.upper)
    throw NumericalError("rank_band: empty band (inconsistent intervals)");
  return band;
}

TopKDecision topk_decide(const RankBand& band, int k) {
  TopKDecision decision;
  decision.task = band.task;
  decision.model = band.model;
  decision.k = k;
  if (band.upper <= k)
    decision.decision = TopKCall::kCertifiedIn;
  else if (band.lower > k)
    decision.decision = TopKCall::kCertifiedOut;
  else
    decision.decision = TopKCall::kUnresolved;
  return decision;
}

std::vector<CertificationReport> certify_targets(const ComparisonDataset& dataset,
                                                 const FitFunction& fit_fn, int rank,
                                                 const FoldAssignment& folds,
                                                 const std::vector<CertifyTarget>& targets,
                                                 int k_top, const BootstrapConfig& config,
                                                 const CgOptions& cg) {
  if (targets.empty()) throw ConfigError("certify_targets: no targets");
  if (k_top < 1 || k_top >= dataset.index.model_count)
    throw ConfigError("certify: k_top must be in [1, d_m)");
  auto plans = make_plans(dataset, targets);
  JointElementaryFamily family(dataset, fit_fn, rank, folds, cg,
                               variance_plan_for(dataset, plans));
  return assemble_reports(family, plans, k_top, dataset.index.model_count, config, "joint");
}

std::vector<CertificationReport> certify_targets_per_task_btl(
    const ComparisonDataset& dataset, const std::vector<CertifyTarget>& targets, int k_top,
    const BootstrapConfig& config, const per_task_btl::FitOptions& fit_options) {
  if (targets.empty()) throw ConfigError("certify_targets: no targets");
  if (k_top < 1 || k_top >= dataset.index.model_count)
    throw ConfigError("certify: k_top must be in [1, d_m)");
  auto plans = make_plans(dataset, targets);
  BaselineElementaryFamily family(dataset, fit_options, variance_plan_for(dataset, plans));
  return assemble_reports(family, plans, k_top, dataset.index.model_count, config,
                          "per_task_btl");
}

CertificationReport certify_model(const ComparisonDataset& dataset, const FitFunction& fit_fn,
                                  int rank, const FoldAssignment& folds, FamilyScope scope,
                                  int scope_task, int model, int k_top,
                                  const BootstrapConfig& config, const CgOptions& cg) {
  return certify_targets(dataset, fit_fn, rank, folds, {{scope, scope_task, model}}, k_top,
                         config, cg)[0];
}

CertificationReport certify_model_per_task_btl(const ComparisonDataset& dataset,
                                               FamilyScope scope, int scope_task, int model,
                                               int k_top, const BootstrapConfig& config,
                                               const per_task_btl::FitOptions& fit_options) {
  return certify_targets_per_task_btl(dataset, {{scope, scope_task, model}}, k_top, config,
                                      fit_options)[0];
}

TopKSets topk_sets_from_bands(const std::vector<Eigen::MatrixXd>& lower,
                              const std::vector<Eigen::MatrixXd>& upper, int k_top) {
  TopKSets sets;
  const int d_t = static_cast<int>(lower.size());
  sets.inner.resize(d_t);
  sets.outer.resize(d_t);
  for (int t = 0; t < d_t; ++t) {
    const int d_m = static_cast<int>(lower[t].rows());
    for (int m = 0; m < d_m; ++m) {
      int above = 0;  // competitors certified above m
      int below = 0;  // competitors certified below m
      for (int l = 0; l < d_m; ++l) {
        if (l == m) continue;
        if (lower[t](m, l) > 0.0) ++above;
        if (upper[t](m, l) < 0.0) ++below;
      }
      // Certified-in: the rank upper bound d_m - below is at most K.
      if (below >= d_m - k_top) sets.inner[t].push_back(m);
      // Not certified-out: the rank lower bound 1 + above is at most K.
      if (above < k_top) sets.outer[t].push_back(m);
    }
    for (int m : sets.inner[t]) {
      if (std::find(sets.outer[t].begin(), sets.outer[t].end(), m) == sets.outer[t].end())
        throw NumericalError("topk_sets: inner not contained in outer");
    }
  }
  return sets;
}

TopKSets topk_sets(const ComparisonDataset& dataset, const FitFunction& fit_fn, int rank,
                   const FoldAssignment& folds, int k_top, const BootstrapConfig& config,
                   const CgOptions& cg) {
  const int d_t = dataset.index.task_count;
  const int d_m = dataset.index.model_count;
  if (k_top < 1 || k_top >= d_m) throw ConfigError("topk_sets: k_top must be in [1, d_m)");
  double family_size = static_cast<double>(d_t) * d_m * (d_m - 1);
  if (family_size > 1e6)
    throw ConfigError("topk_sets: family size exceeds 10^6 contrasts; use per-model scope");
  config.validate();

  VariancePlan plan;
  plan.all_models = true;
  plan.targets.resize(d_t);
  JointElementaryFamily family(dataset, fit_fn, rank, folds, cg, plan);

  const double sqrt_n = std::sqrt(static_cast<double>(family.n()));
  // sigma for each ordered (t, m, l), l != m; the gap is Theta[t,l]-Theta[t,m].
  std::vector<Eigen::MatrixXd> sigma(d_t, Eigen::MatrixXd::Zero(d_m, d_m));
  for (int t = 0; t < d_t; ++t)
    for (int m = 0; m < d_m; ++m)
      for (int l = 0; l < d_m; ++l)
        if (l != m) sigma[t](m, l) = family.gap_sigma(t, l, m);

  std::vector<double> draws(static_cast<std::size_t>(config.draws));
  Rng master(config.seed);
  parallel_for(draws.size(), [&](std::size_t b) {
    Rng rng = master.split(0xb007 + b);
    Eigen::MatrixXd w = family.bootstrap_accumulate(rng);
    double stat = 0.0;
    for (int t = 0; t < d_t; ++t)
      for (int m = 0; m < d_m; ++m)
        for (int l = 0; l < d_m; ++l) {
          if (l == m || sigma[t](m, l) < kSigmaFloor) continue;
          stat = std::max(stat, std::fabs((w(t, l) - w(t, m)) / (sqrt_n * sigma[t](m, l))));
        }
    draws[b] = stat;
  });
  double critical = quantile_from_draws(draws, config.alpha);

  std::vector<Eigen::MatrixXd> lower(d_t, Eigen::MatrixXd::Zero(d_m, d_m));
  std::vector<Eigen::MatrixXd> upper(d_t, Eigen::MatrixXd::Zero(d_m, d_m));
  for (int t = 0; t < d_t; ++t)
    for (int m = 0; m < d_m; ++m)
      for (int l = 0; l < d_m; ++l) {
        if (l == m) continue;
        double est = family.gap_estimate(t, l, m);
        if (sigma[t](m, l) < kSigmaFloor) {
          lower[t](m, l) = -std::numeric_limits<double>::infinity();
          upper[t](m, l) = std::numeric_limits<double>::infinity();
        } else {
          double half = critical * sigma[t](m, l) / sqrt_n;
          lower[t](m, l) = est - half;
          upper[t](m, l) = est + half;
        }
      }
  TopKSets sets = topk_sets_from_bands(lower, upper, k_top);
  sets.critical_value = critical;
  return sets;
}

nlohmann::json CertificationReport::to_json(const TaskModelIndex& index) const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["family"] = family;
  j["method"] = method;
  j["alpha"] = alpha;
  j["critical_value"] = critical_value;
  j["model"] = (model >= 0 && model < index.model_count) ? index.model_names[model] : "";
  j["k_top"] = k_top;
  j["n"] = n;
  j["draws"] = draws;
  j["diagnostics"] = {{"nonconverged_fits", nonconverged_fits},
                      {"degenerate_gaps", degenerate_gaps}};
  j["rank_bands"] = nlohmann::json::array();
  for (const auto& b : rank_bands) {
    j["rank_bands"].push_back({{"task", index.task_names[b.task]},
                               {"lower", b.lower},
                               {"upper", b.upper},
                               {"certified_above", b.certified_above},
                               {"certified_below", b.certified_below}});
  }
  j["topk"] = nlohmann::json::array();
  for (const auto& d : topk) {
    const char* call = d.decision == TopKCall::kCertifiedIn
                           ? "certified_in"
                           : (d.decision == TopKCall::kCertifiedOut ? "certified_out"
                                                                    : "unresolved");
    j["topk"].push_back({{"task", index.task_names[d.task]}, {"k", d.k}, {"decision", call}});
  }
  j["bands"] = nlohmann::json::array();
  for (const auto& g : bands) {
    j["bands"].push_back({{"task", index.task_names[g.task]},
                          {"competitor", index.model_names[g.competitor]},
                          {"estimate", g.estimate},
                          {"std_error", g.std_error},
                          {"lower", std::isfinite(g.lower) ? nlohmann::json(g.lower)
                                                           : nlohmann::json()},
                          {"upper", std::isfinite(g.upper) ? nlohmann::json(g.upper)
                                                           : nlohmann::json()}});
  }
  return j;
}

}  // namespace lrcert
