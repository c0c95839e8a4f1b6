#include "lrcert/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "lrcert/ingest.hpp"
#include "lrcert/parallel.hpp"
#include "lrcert/per_task_btl.hpp"
#include "lrcert/rng.hpp"

namespace lrcert {

std::vector<double> hamming_topk(const ScoreMatrix& est, const ScoreMatrix& truth, int k) {
  if (!est.index.same_shape(truth.index))
    throw ConfigError("hamming_topk: shape mismatch");
  const int d_m = truth.index.model_count;
  if (k < 1 || k >= d_m) throw ConfigError("hamming_topk: K must be in [1, d_m)");
  std::vector<double> out(truth.index.task_count);
  for (int t = 0; t < truth.index.task_count; ++t) {
    auto est_set = topk_set(est.values.row(t).transpose(), k);
    auto truth_set = topk_set(truth.values.row(t).transpose(), k);
    std::vector<int> sym_diff;
    std::set_symmetric_difference(est_set.begin(), est_set.end(), truth_set.begin(),
                                  truth_set.end(), std::back_inserter(sym_diff));
    out[t] = static_cast<double>(sym_diff.size()) / (2.0 * k);
  }
  return out;
}

std::vector<double> boundary_profile(const ScoreMatrix& truth, int k, double delta) {
  const int d_m = truth.index.model_count;
  if (k < 1 || k >= d_m) throw ConfigError("boundary_profile: K must be in [1, d_m)");
  if (delta < 0.0) throw ConfigError("boundary_profile: delta must be >= 0");
  std::vector<double> out(truth.index.task_count);
  std::vector<double> sorted(d_m);
  for (int t = 0; t < truth.index.task_count; ++t) {
    for (int m = 0; m < d_m; ++m) sorted[m] = truth.values(t, m);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double tau = 0.5 * (sorted[k - 1] + sorted[k]);
    int count = 0;
    for (int m = 0; m < d_m; ++m)
      if (std::fabs(truth.values(t, m) - tau) <= delta) ++count;
    out[t] = static_cast<double>(count) / (2.0 * k);
  }
  return out;
}

std::vector<bool> hamming_boundary_check(const ScoreMatrix& est, const ScoreMatrix& truth, int k,
                                         double eps) {
  auto ham = hamming_topk(est, truth, k);
  auto profile = boundary_profile(truth, k, 2.0 * eps);
  std::vector<bool> pass(ham.size());
  for (std::size_t t = 0; t < ham.size(); ++t) pass[t] = ham[t] <= profile[t] + 1e-12;
  return pass;
}

MeanWithCi bootstrap_mean_ci(const std::vector<double>& values, std::uint64_t seed,
                             int resamples, double alpha) {
  MeanWithCi out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) {
    out.lo = out.hi = out.mean;
    return out;
  }
  Rng rng = Rng(seed).split(0xc1);
  std::vector<double> means(resamples);
  for (int b = 0; b < resamples; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
      acc += values[rng.uniform_int(values.size())];
    means[b] = acc / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  auto lo_idx = static_cast<std::size_t>(std::floor(alpha / 2.0 * (resamples - 1)));
  auto hi_idx = static_cast<std::size_t>(std::ceil((1.0 - alpha / 2.0) * (resamples - 1)));
  out.lo = means[lo_idx];
  out.hi = means[hi_idx];
  return out;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

}  // namespace

std::vector<SweepCell> run_sim_sweep(const SweepConfig& config) {
  std::vector<SweepCell> cells;
  Rng master(config.seed);
  for (std::int64_t n : config.n_values) {
    struct TrialOut {
      std::map<std::pair<std::string, int>, double> hamming;  // (method, K) -> mean over tasks
      std::map<std::string, double> frob;
      std::map<std::string, double> inf;
    };
    std::vector<TrialOut> trials(config.trials);
    parallel_for(static_cast<std::size_t>(config.trials), [&](std::size_t trial) {
      Rng trial_rng = master.split(static_cast<std::uint64_t>(n) * 131 + trial);
      SyntheticConfig synth = config.synthetic;
      synth.n = n;
      synth.seed = trial_rng.next_u64();
      ScoreMatrix truth = generate_truth(synth);
      SamplingDesign design = SamplingDesign::uniform(truth.index);
      ComparisonDataset ds = sample_comparisons(truth, design, n, synth.temperature,
                                                trial_rng.next_u64());
      for (const auto& method : config.methods) {
        ScoreMatrix est = (method == "joint") ? fit_joint(ds, config.joint).scores
                                              : per_task_btl::fit(ds).scores;
        trials[trial].frob[method] = (est.values - truth.values).norm();
        trials[trial].inf[method] = (est.values - truth.values).cwiseAbs().maxCoeff();
        for (int k : config.k_values)
          trials[trial].hamming[{method, k}] = mean_of(hamming_topk(est, truth, k));
      }
    });
    for (const auto& method : config.methods) {
      for (int k : config.k_values) {
        SweepCell cell;
        cell.n = n;
        cell.method = method;
        cell.k = k;
        cell.trials = config.trials;
        std::vector<double> ham, frob, inf;
        for (const auto& t : trials) {
          ham.push_back(t.hamming.at({method, k}));
          frob.push_back(t.frob.at(method));
          inf.push_back(t.inf.at(method));
        }
        cell.hamming = bootstrap_mean_ci(ham, config.seed ^ (n * 7 + k));
        cell.mean_frob_error = mean_of(frob);
        cell.mean_inf_error = mean_of(inf);
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_sweep_csv: cannot open " + path);
  out << "n,method,k,mean_hamming,hamming_ci_lo,hamming_ci_hi,mean_frob_error,mean_inf_error,"
         "trials\n";
  for (const auto& c : cells) {
    out << c.n << ',' << c.method << ',' << c.k << ',' << c.hamming.mean << ',' << c.hamming.lo
        << ',' << c.hamming.hi << ',' << c.mean_frob_error << ',' << c.mean_inf_error << ','
        << c.trials << '\n';
  }
}

void write_sweep_json(const std::vector<SweepCell>& cells, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : cells) {
    j["cells"].push_back({{"n", c.n},
                          {"method", c.method},
                          {"k", c.k},
                          {"mean_hamming", c.hamming.mean},
                          {"hamming_ci", {c.hamming.lo, c.hamming.hi}},
                          {"mean_frob_error", c.mean_frob_error},
                          {"mean_inf_error", c.mean_inf_error},
                          {"trials", c.trials}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("write_sweep_json: cannot open " + path);
  out << j.dump(2) << '\n';
}

std::vector<CoverageRow> run_coverage_experiment(const CoverageConfig& config) {
  Rng master(config.seed);
  SyntheticConfig synth = config.synthetic;
  synth.seed = Rng(config.seed).split(0x72).next_u64();
  // Truth and targets are fixed across trials; trials resample comparisons.
  ScoreMatrix truth = generate_truth(synth);
  SamplingDesign design = SamplingDesign::uniform(truth.index);
  const int d_t = truth.index.task_count;
  const int d_m = truth.index.model_count;

  Rng target_rng = master.split(0x7a26e7);
  std::vector<CertifyTarget> targets;
  if (config.scope == FamilyScope::kOneTask) {
    for (int t = 0; t < d_t; ++t)
      targets.push_back({FamilyScope::kOneTask, t,
                         static_cast<int>(target_rng.uniform_int(d_m))});
  } else {
    targets.push_back({FamilyScope::kAllTasks, 0, static_cast<int>(target_rng.uniform_int(d_m))});
  }

  struct TrialMetricsRow {
    double coverage = 0.0;
    double correct = 0.0;
    double resolved = 0.0;
    double width = 0.0;
  };
  std::map<std::string, std::vector<TrialMetricsRow>> per_method;
  for (const auto& m : config.methods) per_method[m].resize(config.trials);

  parallel_for(static_cast<std::size_t>(config.trials), [&](std::size_t trial) {
    Rng trial_rng = master.split(0x10000 + trial);
    ComparisonDataset ds = sample_comparisons(truth, design, synth.n, synth.temperature,
                                              trial_rng.next_u64());
    FoldAssignment folds = assign_folds(ds.records.size(), config.joint.folds,
                                        trial_rng.next_u64());
    BootstrapConfig boot;
    boot.draws = config.bootstrap_draws;
    boot.alpha = config.alpha;
    boot.seed = trial_rng.next_u64();

    for (const auto& method : config.methods) {
      std::vector<CertificationReport> reports;
      if (method == "joint") {
        reports = certify_targets(ds, make_joint_fit_fn(config.joint), config.joint.rank, folds,
                                  targets, config.k_top, boot, config.joint.cg);
      } else {
        reports = certify_targets_per_task_btl(ds, targets, config.k_top, boot);
      }
      double covered = 0.0, correct = 0.0, resolved = 0.0, width = 0.0;
      double count = 0.0;
      for (const auto& report : reports) {
        for (std::size_t i = 0; i < report.rank_bands.size(); ++i) {
          const auto& band = report.rank_bands[i];
          const auto& decision = report.topk[i];
          int rank_true = true_rank(truth, band.task, band.model);
          bool in_truth = rank_true <= config.k_top;
          covered += (rank_true >= band.lower && rank_true <= band.upper) ? 1.0 : 0.0;
          if (decision.decision != TopKCall::kUnresolved) {
            resolved += 1.0;
            bool says_in = decision.decision == TopKCall::kCertifiedIn;
            correct += (says_in == in_truth) ? 1.0 : 0.0;
          }
          width += band.upper - band.lower;
          count += 1.0;
        }
      }
      auto& row = per_method[method][trial];
      row.coverage = covered / count;
      row.correct = correct / count;
      row.resolved = resolved / count;
      row.width = width / count;
    }
  });

  std::vector<CoverageRow> rows;
  for (const auto& method : config.methods) {
    CoverageRow row;
    row.method = method;
    row.trials = config.trials;
    std::vector<double> cov, cor, res, wid;
    for (const auto& t : per_method[method]) {
      cov.push_back(t.coverage);
      cor.push_back(t.correct);
      res.push_back(t.resolved);
      wid.push_back(t.width);
    }
    row.coverage = bootstrap_mean_ci(cov, config.seed ^ 0x11);
    row.correct_cert = bootstrap_mean_ci(cor, config.seed ^ 0x22);
    row.resolved = bootstrap_mean_ci(res, config.seed ^ 0x33);
    row.width = bootstrap_mean_ci(wid, config.seed ^ 0x44);
    rows.push_back(row);
  }
  return rows;
}

void write_coverage_csv(const std::vector<CoverageRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_coverage_csv: cannot open " + path);
  out << "method,coverage,coverage_ci_lo,coverage_ci_hi,correct_cert,correct_ci_lo,"
         "correct_ci_hi,resolved,resolved_ci_lo,resolved_ci_hi,width,width_ci_lo,width_ci_hi,"
         "trials\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.coverage.mean << ',' << r.coverage.lo << ',' << r.coverage.hi
        << ',' << r.correct_cert.mean << ',' << r.correct_cert.lo << ',' << r.correct_cert.hi
        << ',' << r.resolved.mean << ',' << r.resolved.lo << ',' << r.resolved.hi << ','
        << r.width.mean << ',' << r.width.lo << ',' << r.width.hi << ',' << r.trials << '\n';
  }
}

}  // namespace lrcert
