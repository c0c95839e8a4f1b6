// lrcert: simulate | ingest | fit | infer | certify | bench
//
// Every command is deterministic given (config, seed); --seed overrides the
// config seed and --threads caps worker parallelism. Exit codes: 0 success,
// 2 config error, 3 data error, 4 numerical failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lrcert/certify.hpp"
#include "lrcert/config.hpp"
#include "lrcert/eval.hpp"
#include "lrcert/ingest.hpp"
#include "lrcert/io.hpp"
#include "lrcert/parallel.hpp"
#include "lrcert/pipeline.hpp"
#include "lrcert/synth.hpp"

namespace {

using lrcert::RunConfig;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

RunConfig load_config(const CommonArgs& args) {
  RunConfig config;
  if (!args.config_path.empty()) config = RunConfig::from_file(args.config_path);
  if (args.seed) config.set("seed", std::to_string(*args.seed));
  if (args.threads > 0) lrcert::global_thread_cap() = args.threads;
  return config;
}

lrcert::SyntheticConfig synthetic_from(const RunConfig& config) {
  lrcert::SyntheticConfig synth;
  synth.d_t = static_cast<int>(config.get_int("d_t", 50));
  synth.d_m = static_cast<int>(config.get_int("d_m", 50));
  synth.rank = static_cast<int>(config.get_int("rank", 5));
  synth.amplitude = config.get_double("amplitude", 5.0);
  synth.n = config.get_int("n", 16000);
  synth.temperature = config.get_double("temperature", 1.0);
  synth.seed = static_cast<std::uint64_t>(config.get_int("seed", 1));
  return synth;
}

lrcert::JointConfig joint_from(const RunConfig& config) {
  lrcert::JointConfig joint;
  joint.rank = static_cast<int>(config.get_int("rank", 5));
  joint.entry_bound = config.get_double("entry_bound", 5.0);
  std::string mode = config.get_string("refine_mode", "alt_min");
  if (mode == "alt_min")
    joint.mode = lrcert::RefineMode::kAltMin;
  else if (mode == "three_split")
    joint.mode = lrcert::RefineMode::kThreeSplit;
  else
    throw lrcert::ConfigError("unknown refine_mode: " + mode);
  if (config.has("lambda")) joint.convex.lambda = config.get_double("lambda", 0.0);
  joint.convex.lambda_scale = config.get_double("lambda_scale", 2.0);
  joint.convex.max_iter = static_cast<int>(config.get_int("convex_max_iter", 2000));
  joint.convex.tol = config.get_double("convex_tol", 1e-7);
  joint.refine.incoherence_cap = config.get_double("incoherence_cap", 4.0);
  joint.refine.newton_max_iter = static_cast<int>(config.get_int("newton_max_iter", 50));
  joint.refine.newton_tol = config.get_double("newton_tol", 1e-8);
  joint.refine.passes = static_cast<int>(config.get_int("refine_passes", 1));
  joint.alt_min.incoherence_cap = joint.refine.incoherence_cap;
  joint.alt_min.passes = static_cast<int>(config.get_int("altmin_passes", 8));
  joint.cg.tol = config.get_double("cg_tol", 1e-8);
  joint.cg.ridge = config.get_double("cg_ridge", 1e-8);
  joint.folds = static_cast<int>(config.get_int("folds", 6));
  return joint;
}

lrcert::ComparisonDataset load_dataset(const RunConfig& config, const std::string& path) {
  std::string format = config.get_string("format", "csv");
  auto fmt = format == "jsonl" ? lrcert::VoteFormat::kJsonl : lrcert::VoteFormat::kCsv;
  if (format != "csv" && format != "jsonl")
    throw lrcert::ConfigError("unknown format: " + format);
  auto parsed = lrcert::parse_votes(path, fmt);
  // Identity category map: every observed category is its own task.
  std::map<std::string, std::string> category_map;
  for (const auto& v : parsed.votes) category_map[v.category] = v.category;
  int top_models = static_cast<int>(config.get_int("top_models", 1 << 20));
  auto policy = config.get_string("tie_policy", "drop") == "split" ? lrcert::TiePolicy::kSplit
                                                                   : lrcert::TiePolicy::kDrop;
  return lrcert::build_dataset(parsed.votes, top_models, category_map, policy,
                               static_cast<std::uint64_t>(config.get_int("seed", 1)));
}

int find_model(const lrcert::TaskModelIndex& index, const std::string& name) {
  for (int m = 0; m < index.model_count; ++m)
    if (index.model_names[m] == name) return m;
  throw lrcert::DataError("unknown model name: " + name);
}

int find_task(const lrcert::TaskModelIndex& index, const std::string& name) {
  for (int t = 0; t < index.task_count; ++t)
    if (index.task_names[t] == name) return t;
  throw lrcert::DataError("unknown task name: " + name);
}

int cmd_simulate(const CommonArgs& common, const std::string& data_out,
                 const std::string& truth_out) {
  RunConfig config = load_config(common);
  lrcert::SyntheticConfig synth = synthetic_from(config);
  lrcert::ScoreMatrix truth = lrcert::generate_truth(synth);
  lrcert::SamplingDesign design = lrcert::SamplingDesign::uniform(truth.index);
  lrcert::ComparisonDataset ds = lrcert::sample_comparisons(
      truth, design, synth.n, synth.temperature, synth.seed);

  std::string data_path = data_out.empty() ? config.get_string("data_out", "comparisons.csv")
                                           : data_out;
  std::string truth_path = truth_out.empty() ? config.get_string("truth_out", "truth.scores")
                                             : truth_out;
  if (config.get_string("format", "csv") == "jsonl")
    lrcert::write_dataset_jsonl(ds, data_path);
  else
    lrcert::write_dataset_csv(ds, data_path);
  lrcert::write_scores(truth, truth_path);
  std::cout << "wrote " << ds.records.size() << " comparisons to " << data_path
            << " and truth to " << truth_path << "\n";
  return 0;
}

int cmd_ingest(const CommonArgs& common, const std::string& in_path,
               const std::string& out_path) {
  RunConfig config = load_config(common);
  lrcert::ComparisonDataset ds = load_dataset(config, in_path);
  lrcert::write_dataset_csv(ds, out_path);
  nlohmann::json j = {{"schema_version", 1},
                      {"records", ds.records.size()},
                      {"tasks", ds.index.task_count},
                      {"models", ds.index.model_count}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_fit(const CommonArgs& common, const std::string& data_path,
            const std::string& truth_path, const std::string& out_path) {
  RunConfig config = load_config(common);
  lrcert::ComparisonDataset ds = load_dataset(config, data_path);
  lrcert::JointConfig joint = joint_from(config);
  if (joint.rank > std::min(ds.index.task_count, ds.index.model_count))
    throw lrcert::ConfigError("rank exceeds min(d_t, d_m) for this dataset");
  lrcert::ConvexFitInfo info;
  lrcert::RefineResult result = lrcert::fit_joint(ds, joint, &info);
  lrcert::write_artifact(result, out_path);
  std::cout << "fit rank-" << joint.rank << " model on " << ds.records.size()
            << " comparisons (lambda " << info.lambda << ", " << info.iterations
            << " convex iterations)\n";
  if (!truth_path.empty()) {
    lrcert::ScoreMatrix truth = lrcert::read_scores(truth_path);
    if (!truth.index.same_shape(result.scores.index))
      throw lrcert::DataError("truth shape does not match fitted model");
    double frob = (result.scores.values - truth.values).norm();
    double inf = (result.scores.values - truth.values).cwiseAbs().maxCoeff();
    std::cout << "frobenius_error " << frob << "\nmax_error " << inf << "\n";
  }
  std::cout << "artifact written to " << out_path << "\n";
  return 0;
}

int cmd_infer(const CommonArgs& common, const std::string& data_path, const std::string& task,
              const std::string& model_a, const std::string& model_b) {
  RunConfig config = load_config(common);
  lrcert::ComparisonDataset ds = load_dataset(config, data_path);
  lrcert::JointConfig joint = joint_from(config);
  int t = find_task(ds.index, task);
  int a = find_model(ds.index, model_a);
  int b = find_model(ds.index, model_b);

  auto folds = lrcert::assign_folds(ds.records.size(), joint.folds,
                                    static_cast<std::uint64_t>(config.get_int("seed", 1)));
  lrcert::OneStepOptions options;
  options.rank = joint.rank;
  options.cg = joint.cg;
  auto result = lrcert::one_step_estimate({lrcert::ContrastSpec::gap(t, a, b)}, ds, folds,
                                          lrcert::make_joint_fit_fn(joint), options);
  const auto& gap = result.gaps[0];
  double z = 1.959963984540054;  // 97.5% normal quantile
  nlohmann::json j = {{"schema_version", 1},
                      {"task", task},
                      {"model_a", model_a},
                      {"model_b", model_b},
                      {"estimate", gap.estimate},
                      {"std_error", gap.std_error},
                      {"ci95", {gap.estimate - z * gap.std_error, gap.estimate + z * gap.std_error}}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_certify(const CommonArgs& common, const std::string& data_path, const std::string& model,
                const std::string& task, bool all_tasks, bool with_topk_sets,
                const std::string& out_path) {
  RunConfig config = load_config(common);
  lrcert::ComparisonDataset ds = load_dataset(config, data_path);
  lrcert::JointConfig joint = joint_from(config);
  int m = find_model(ds.index, model);
  lrcert::FamilyScope scope = all_tasks ? lrcert::FamilyScope::kAllTasks
                                        : lrcert::FamilyScope::kOneTask;
  int t = all_tasks ? 0 : find_task(ds.index, task);

  lrcert::BootstrapConfig boot;
  boot.draws = static_cast<int>(config.get_int("bootstrap_draws", 1000));
  boot.alpha = config.get_double("alpha", 0.05);
  boot.seed = static_cast<std::uint64_t>(config.get_int("seed", 1));
  int k_top = static_cast<int>(config.get_int("k_top", 10));
  if (k_top >= ds.index.model_count) k_top = ds.index.model_count - 1;

  auto folds = lrcert::assign_folds(ds.records.size(), joint.folds, boot.seed + 1);
  std::string method = config.get_string("method", "joint");
  lrcert::CertificationReport report;
  if (method == "joint") {
    report = lrcert::certify_model(ds, lrcert::make_joint_fit_fn(joint), joint.rank, folds,
                                   scope, t, m, k_top, boot, joint.cg);
  } else if (method == "per_task_btl") {
    report = lrcert::certify_model_per_task_btl(ds, scope, t, m, k_top, boot);
  } else {
    throw lrcert::ConfigError("unknown method: " + method);
  }
  nlohmann::json j = report.to_json(ds.index);
  if (with_topk_sets) {
    // Simultaneous inner/outer top-K sets over the all-pairs family.
    lrcert::TopKSets sets =
        lrcert::topk_sets(ds, lrcert::make_joint_fit_fn(joint), joint.rank, folds, k_top, boot,
                          joint.cg);
    nlohmann::json sets_json;
    sets_json["critical_value"] = sets.critical_value;
    sets_json["per_task"] = nlohmann::json::array();
    for (int task_id = 0; task_id < ds.index.task_count; ++task_id) {
      nlohmann::json inner = nlohmann::json::array();
      nlohmann::json outer = nlohmann::json::array();
      for (int mm : sets.inner[task_id]) inner.push_back(ds.index.model_names[mm]);
      for (int mm : sets.outer[task_id]) outer.push_back(ds.index.model_names[mm]);
      sets_json["per_task"].push_back({{"task", ds.index.task_names[task_id]},
                                       {"inner", inner},
                                       {"outer", outer}});
    }
    j["topk_sets"] = sets_json;
  }
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw lrcert::DataError("cannot open " + out_path);
    out << j.dump(2) << "\n";
    std::cout << "report written to " << out_path << "\n";
  }
  return 0;
}

int cmd_bench(const CommonArgs& common, const std::string& experiment,
              const std::string& out_prefix) {
  RunConfig config = load_config(common);
  if (experiment == "sweep") {
    lrcert::SweepConfig sweep;
    sweep.synthetic = synthetic_from(config);
    sweep.n_values = config.get_int_list("n_values", {4000, 8000, 16000, 32000});
    auto ks = config.get_int_list("k_values", {5, 10});
    sweep.k_values.assign(ks.begin(), ks.end());
    sweep.methods = config.get_string_list("methods", {"joint", "per_task_btl"});
    sweep.trials = static_cast<int>(config.get_int("trials", 100));
    sweep.seed = static_cast<std::uint64_t>(config.get_int("seed", 1));
    sweep.joint = joint_from(config);
    auto cells = lrcert::run_sim_sweep(sweep);
    lrcert::write_sweep_csv(cells, out_prefix + "_sweep.csv");
    lrcert::write_sweep_json(cells, out_prefix + "_sweep.json");
    std::cout << "wrote " << cells.size() << " cells to " << out_prefix << "_sweep.{csv,json}\n";
    return 0;
  }
  if (experiment == "coverage") {
    lrcert::CoverageConfig cov;
    cov.synthetic = synthetic_from(config);
    cov.scope = config.get_string("scope", "one_task") == "all_tasks"
                    ? lrcert::FamilyScope::kAllTasks
                    : lrcert::FamilyScope::kOneTask;
    cov.k_top = static_cast<int>(config.get_int("k_top", 10));
    cov.alpha = config.get_double("alpha", 0.05);
    cov.trials = static_cast<int>(config.get_int("trials", 100));
    cov.bootstrap_draws = static_cast<int>(config.get_int("bootstrap_draws", 1000));
    cov.seed = static_cast<std::uint64_t>(config.get_int("seed", 1));
    cov.joint = joint_from(config);
    cov.methods = config.get_string_list("methods", {"joint", "per_task_btl"});
    auto rows = lrcert::run_coverage_experiment(cov);
    lrcert::write_coverage_csv(rows, out_prefix + "_coverage.csv");
    std::cout << "wrote " << rows.size() << " rows to " << out_prefix << "_coverage.csv\n";
    return 0;
  }
  throw lrcert::ConfigError("unknown experiment: " + experiment);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank certified task-specific leaderboards from pairwise comparisons"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("-c,--config", common.config_path, "key = value config file");
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "override config seed");
  app.add_option("--threads", common.threads, "cap worker threads (default: all cores)");

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset + truth");
  std::string sim_data_out, sim_truth_out;
  simulate->add_option("--out-data", sim_data_out, "comparisons file");
  simulate->add_option("--out-truth", sim_truth_out, "truth scores file");

  auto* ingest = app.add_subcommand("ingest", "normalize an arena-style vote log");
  std::string ingest_in, ingest_out = "dataset.csv";
  ingest->add_option("--in", ingest_in, "votes file")->required();
  ingest->add_option("--out", ingest_out, "normalized dataset CSV");

  auto* fit = app.add_subcommand("fit", "fit the low-rank model");
  std::string fit_data, fit_truth, fit_out = "model.json";
  fit->add_option("--data", fit_data, "comparisons file")->required();
  fit->add_option("--truth", fit_truth, "optional truth scores for error reporting");
  fit->add_option("--out", fit_out, "model artifact path");

  auto* infer = app.add_subcommand("infer", "one-step gap inference for a model pair");
  std::string infer_data, infer_task, infer_a, infer_b;
  infer->add_option("--data", infer_data, "comparisons file")->required();
  infer->add_option("--task", infer_task, "task name")->required();
  infer->add_option("--model-a", infer_a, "first model name")->required();
  infer->add_option("--model-b", infer_b, "second model name")->required();

  auto* certify = app.add_subcommand("certify", "rank bands and top-K certification");
  std::string cert_data, cert_model, cert_task, cert_out;
  bool cert_all_tasks = false;
  certify->add_option("--data", cert_data, "comparisons file")->required();
  certify->add_option("--model", cert_model, "target model name")->required();
  certify->add_option("--task", cert_task, "task name (one-task scope)");
  certify->add_flag("--all-tasks", cert_all_tasks, "simultaneous scope across all tasks");
  bool cert_topk_sets = false;
  certify->add_flag("--topk-sets", cert_topk_sets,
                    "also compute simultaneous inner/outer top-K sets");
  certify->add_option("--out", cert_out, "report path (default: stdout)");

  auto* bench = app.add_subcommand("bench", "run simulation experiments");
  std::string bench_experiment = "sweep", bench_prefix = "bench";
  bench->add_option("--experiment", bench_experiment, "sweep | coverage");
  bench->add_option("--out-prefix", bench_prefix, "output file prefix");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) common.seed = seed_flag;

  try {
    if (simulate->parsed()) return cmd_simulate(common, sim_data_out, sim_truth_out);
    if (ingest->parsed()) return cmd_ingest(common, ingest_in, ingest_out);
    if (fit->parsed()) return cmd_fit(common, fit_data, fit_truth, fit_out);
    if (infer->parsed()) return cmd_infer(common, infer_data, infer_task, infer_a, infer_b);
    if (certify->parsed())
      return cmd_certify(common, cert_data, cert_model, cert_task, cert_all_tasks,
                         cert_topk_sets, cert_out);
    if (bench->parsed()) return cmd_bench(common, bench_experiment, bench_prefix);
  } catch (const lrcert::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const lrcert::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const lrcert::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
