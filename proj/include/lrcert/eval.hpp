#pragma once

// Metrics and Monte Carlo experiment drivers: top-K Hamming, boundary
// profiles, simulation sweeps, and coverage experiments with bootstrap CIs.

#include <cstdint>
#include <string>
#include <vector>

#include "lrcert/certify.hpp"
#include "lrcert/pipeline.hpp"
#include "lrcert/score_matrix.hpp"
#include "lrcert/synth.hpp"

namespace lrcert {

// Ham_{K,t} = |symmetric difference of top-K sets| / (2K), per task.
std::vector<double> hamming_topk(const ScoreMatrix& est, const ScoreMatrix& truth, int k);

// Fraction of models within delta of the K-boundary midpoint, over 2K.
std::vector<double> boundary_profile(const ScoreMatrix& truth, int k, double delta);

// Checks Ham_{K,t} <= boundary_profile(truth, K, 2*eps) per task; valid
// whenever ||est - truth||_inf <= eps.
std::vector<bool> hamming_boundary_check(const ScoreMatrix& est, const ScoreMatrix& truth, int k,
                                         double eps);

struct MeanWithCi {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap over per-trial values (200 resamples).
MeanWithCi bootstrap_mean_ci(const std::vector<double>& values, std::uint64_t seed,
                             int resamples = 200, double alpha = 0.05);

struct SweepCell {
  std::int64_t n = 0;
  std::string method;
  int k = 0;
  MeanWithCi hamming;
  double mean_frob_error = 0.0;
  double mean_inf_error = 0.0;
  int trials = 0;
};

struct SweepConfig {
  SyntheticConfig synthetic;
  std::vector<std::int64_t> n_values = {4000, 8000, 16000, 32000};
  std::vector<int> k_values = {5, 10};
  std::vector<std::string> methods = {"joint", "per_task_btl"};
  int trials = 100;
  std::uint64_t seed = 1;
  JointConfig joint;
};

// One row per (n, method, K) cell: mean Hamming with bootstrap CI plus mean
// Frobenius / sup-norm errors for the decay plot.
std::vector<SweepCell> run_sim_sweep(const SweepConfig& config);

// CSV / JSON emission for sweep results.
void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path);
void write_sweep_json(const std::vector<SweepCell>& cells, const std::string& path);

struct CoverageRow {
  std::string method;
  MeanWithCi coverage;        // true rank inside the band
  MeanWithCi correct_cert;    // certified and consistent with the truth
  MeanWithCi resolved;        // non-trivial decision rate
  MeanWithCi width;           // mean rank-band width (upper - lower)
  int trials = 0;
};

struct CoverageConfig {
  SyntheticConfig synthetic;
  FamilyScope scope = FamilyScope::kOneTask;
  int k_top = 10;
  double alpha = 0.05;
  int trials = 100;
  int bootstrap_draws = 1000;
  std::uint64_t seed = 1;
  JointConfig joint;
  std::vector<std::string> methods = {"joint", "per_task_btl"};
};

// Fixed truth across trials; each trial resamples comparisons. One-task scope
// targets one random model per task (fixed across trials); all-tasks scope
// targets a single random model. Reports per-(task,trial) rates.
std::vector<CoverageRow> run_coverage_experiment(const CoverageConfig& config);

void write_coverage_csv(const std::vector<CoverageRow>& rows, const std::string& path);

}  // namespace lrcert
