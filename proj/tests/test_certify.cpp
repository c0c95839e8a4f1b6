#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lrcert/certify.hpp"
#include "lrcert/pipeline.hpp"
#include "lrcert/rng.hpp"
#include "lrcert/synth.hpp"

using namespace lrcert;

TEST_CASE("bootstrap_critical_value approximates the Gaussian quantile at p = 1") {
  const int n = 2000;
  Rng rng(81);
  Eigen::MatrixXd influence(n, 1);
  for (int i = 0; i < n; ++i) influence(i, 0) = rng.normal();
  double sq = influence.col(0).squaredNorm() / n;
  Eigen::VectorXd sigma(1);
  sigma << std::sqrt(sq);
  BootstrapConfig config;
  config.draws = 4000;
  config.alpha = 0.05;
  config.seed = 31;
  double critical = bootstrap_critical_value(influence, sigma, config);
  CHECK(critical > 1.8);
  CHECK(critical < 2.2);
}

TEST_CASE("bootstrap_critical_value is invariant to duplicated columns") {
  const int n = 500;
  Rng rng(82);
  Eigen::MatrixXd one(n, 1);
  for (int i = 0; i < n; ++i) one(i, 0) = rng.normal();
  Eigen::MatrixXd two(n, 2);
  two.col(0) = one.col(0);
  two.col(1) = one.col(0);
  double s = std::sqrt(one.col(0).squaredNorm() / n);
  Eigen::VectorXd sig1(1), sig2(2);
  sig1 << s;
  sig2 << s, s;
  BootstrapConfig config;
  config.draws = 500;
  config.seed = 7;
  CHECK(bootstrap_critical_value(one, sig1, config) ==
        doctest::Approx(bootstrap_critical_value(two, sig2, config)).epsilon(1e-12));
}

TEST_CASE("bootstrap_critical_value grows with added columns and shrinks with alpha") {
  const int n = 400;
  Rng rng(83);
  Eigen::MatrixXd wide(n, 6);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 6; ++j) wide(i, j) = rng.normal();
  Eigen::VectorXd sig(6);
  for (int j = 0; j < 6; ++j) sig(j) = std::sqrt(wide.col(j).squaredNorm() / n);

  BootstrapConfig config;
  config.draws = 800;
  config.seed = 9;
  double narrow = bootstrap_critical_value(wide.leftCols(2), sig.head(2), config);
  double full = bootstrap_critical_value(wide, sig, config);
  CHECK(full >= narrow);  // max over a superset, same xi draws

  BootstrapConfig loose = config;
  loose.alpha = 0.2;
  CHECK(bootstrap_critical_value(wide, sig, loose) <= full);

  Eigen::VectorXd bad = sig;
  bad(3) = 0.0;
  CHECK_THROWS_WITH_AS(bootstrap_critical_value(wide, bad, config),
                       doctest::Contains("degenerate contrast"), NumericalError);
}

namespace {

std::vector<GapBand> make_bands(int task, const std::vector<std::pair<double, double>>& lu,
                                int model) {
  std::vector<GapBand> bands;
  int competitor = 0;
  for (auto [lo, hi] : lu) {
    if (competitor == model) ++competitor;
    GapBand b;
    b.task = task;
    b.competitor = competitor++;
    b.estimate = 0.5 * (lo + hi);
    b.lower = lo;
    b.upper = hi;
    bands.push_back(b);
  }
  return bands;
}

}  // namespace

TEST_CASE("rank_band inversion") {
  // d_m = 4, target model 3, hand-built intervals.
  auto bands = make_bands(0, {{1.0, 2.0}, {-2.0, -1.0}, {-0.5, 0.5}}, 3);
  RankBand band = rank_band(bands, 0, 3, 4, 2.0, 100);
  CHECK(band.certified_above == 1);
  CHECK(band.certified_below == 1);
  CHECK(band.lower == 2);
  CHECK(band.upper == 3);

  // all positive: last place certified
  auto all_pos = make_bands(0, {{0.1, 1.0}, {0.2, 1.0}, {0.3, 1.0}}, 3);
  RankBand last = rank_band(all_pos, 0, 3, 4, 2.0, 100);
  CHECK(last.lower == 4);
  CHECK(last.upper == 4);

  // all straddle zero: vacuous band
  auto vague = make_bands(0, {{-1.0, 1.0}, {-0.1, 0.2}, {-3.0, 0.5}}, 3);
  RankBand vacuous = rank_band(vague, 0, 3, 4, 2.0, 100);
  CHECK(vacuous.lower == 1);
  CHECK(vacuous.upper == 4);

  // inconsistent family: wrong count
  auto short_family = make_bands(0, {{1.0, 2.0}}, 3);
  CHECK_THROWS_AS(rank_band(short_family, 0, 3, 4, 2.0, 100), ConfigError);
}

TEST_CASE("topk_decide three-way rule") {
  RankBand band;
  band.lower = 2;
  band.upper = 3;
  CHECK(topk_decide(band, 3).decision == TopKCall::kCertifiedIn);
  band.lower = 4;
  band.upper = 7;
  CHECK(topk_decide(band, 3).decision == TopKCall::kCertifiedOut);
  band.lower = 2;
  band.upper = 5;
  CHECK(topk_decide(band, 3).decision == TopKCall::kUnresolved);
}

TEST_CASE("topk_sets_from_bands counting rules") {
  const int d_t = 3, d_m = 5, k = 2;
  // Vacuous bands: inner empty, outer everything.
  std::vector<Eigen::MatrixXd> lower(d_t, Eigen::MatrixXd::Constant(d_m, d_m, -1.0));
  std::vector<Eigen::MatrixXd> upper(d_t, Eigen::MatrixXd::Constant(d_m, d_m, 1.0));
  TopKSets vacuous = topk_sets_from_bands(lower, upper, k);
  for (int t = 0; t < d_t; ++t) {
    CHECK(vacuous.inner[t].empty());
    CHECK(vacuous.outer[t].size() == d_m);
  }

  // Oracle zero-width bands from a truth matrix: inner == outer == true set.
  SyntheticConfig config;
  config.d_t = d_t;
  config.d_m = d_m;
  config.rank = 2;
  config.amplitude = 2.0;
  config.seed = 84;
  ScoreMatrix truth = generate_truth(config);
  for (int t = 0; t < d_t; ++t)
    for (int m = 0; m < d_m; ++m)
      for (int l = 0; l < d_m; ++l) {
        double gap = truth.values(t, l) - truth.values(t, m);
        lower[t](m, l) = gap;
        upper[t](m, l) = gap;
      }
  TopKSets oracle = topk_sets_from_bands(lower, upper, k);
  for (int t = 0; t < d_t; ++t) {
    auto expected = topk_set(truth.values.row(t).transpose(), k);
    CHECK(oracle.inner[t] == expected);
    CHECK(oracle.outer[t] == expected);
  }

  // Random bands vs a brute-force evaluation of the two counting formulas;
  // inner must stay inside outer.
  Rng rng(85);
  for (int t = 0; t < d_t; ++t)
    for (int m = 0; m < d_m; ++m)
      for (int l = 0; l < d_m; ++l) {
        double center = rng.normal();
        double half = 0.3 + rng.uniform();
        lower[t](m, l) = center - half;
        upper[t](m, l) = center + half;
      }
  TopKSets sets = topk_sets_from_bands(lower, upper, k);
  for (int t = 0; t < d_t; ++t) {
    std::vector<int> inner_expected, outer_expected;
    for (int m = 0; m < d_m; ++m) {
      int certified_below = 0, certified_above = 0;
      for (int l = 0; l < d_m; ++l) {
        if (l == m) continue;
        if (upper[t](m, l) < 0.0) ++certified_below;
        if (lower[t](m, l) > 0.0) ++certified_above;
      }
      if (certified_below >= d_m - k) inner_expected.push_back(m);
      if (certified_above < k) outer_expected.push_back(m);
    }
    CHECK(sets.inner[t] == inner_expected);
    CHECK(sets.outer[t] == outer_expected);
    for (int m : sets.inner[t])
      CHECK(std::find(sets.outer[t].begin(), sets.outer[t].end(), m) != sets.outer[t].end());
  }
}

TEST_CASE("certify_model per-task baseline end to end on a small instance") {
  SyntheticConfig config;
  config.d_t = 3;
  config.d_m = 5;
  config.rank = 2;
  config.amplitude = 3.0;
  config.n = 4000;
  config.seed = 86;
  ScoreMatrix truth = generate_truth(config);
  ComparisonDataset ds = sample_comparisons(truth, SamplingDesign::uniform(truth.index),
                                            config.n, 1.0, 87);
  BootstrapConfig boot;
  boot.draws = 400;
  boot.alpha = 0.05;
  boot.seed = 88;
  CertificationReport report =
      certify_model_per_task_btl(ds, FamilyScope::kAllTasks, 0, 2, 2, boot);
  CHECK(report.rank_bands.size() == 3);
  for (const auto& band : report.rank_bands) {
    CHECK(band.lower == 1 + band.certified_above);
    CHECK(band.upper == 5 - band.certified_below);
    CHECK(band.lower <= band.upper);
  }
  // interval width monotone in alpha (same seed, same draws)
  BootstrapConfig loose = boot;
  loose.alpha = 0.5;
  CertificationReport loose_report =
      certify_model_per_task_btl(ds, FamilyScope::kAllTasks, 0, 2, 2, loose);
  CHECK(loose_report.critical_value <= report.critical_value);
  for (std::size_t i = 0; i < report.bands.size(); ++i) {
    CHECK(loose_report.bands[i].lower >= report.bands[i].lower);
    CHECK(loose_report.bands[i].upper <= report.bands[i].upper);
  }
  // report serializes
  auto j = report.to_json(ds.index);
  CHECK(j["schema_version"] == 1);
  CHECK(j["rank_bands"].size() == 3);
}

TEST_CASE("joint certify: one-task scope equals all-tasks scope when d_t = 1") {
  SyntheticConfig config;
  config.d_t = 1;
  config.d_m = 5;
  config.rank = 1;
  config.amplitude = 2.0;
  config.n = 2400;
  config.seed = 89;
  ScoreMatrix truth = generate_truth(config);
  ComparisonDataset ds = sample_comparisons(truth, SamplingDesign::uniform(truth.index),
                                            config.n, 1.0, 90);
  FoldAssignment folds = assign_folds(ds.records.size(), 3, 91);
  JointConfig joint;
  joint.rank = 1;
  joint.entry_bound = 2.0;
  BootstrapConfig boot;
  boot.draws = 300;
  boot.seed = 92;

  CertificationReport one = certify_model(ds, make_joint_fit_fn(joint), 1, folds,
                                          FamilyScope::kOneTask, 0, 2, 2, boot, joint.cg);
  CertificationReport all = certify_model(ds, make_joint_fit_fn(joint), 1, folds,
                                          FamilyScope::kAllTasks, 0, 2, 2, boot, joint.cg);
  CHECK(one.critical_value == doctest::Approx(all.critical_value).epsilon(1e-12));
  REQUIRE(one.rank_bands.size() == all.rank_bands.size());
  CHECK(one.rank_bands[0].lower == all.rank_bands[0].lower);
  CHECK(one.rank_bands[0].upper == all.rank_bands[0].upper);
}

TEST_CASE("topk_sets rejects oversized families") {
  ComparisonDataset ds;
  ds.index = TaskModelIndex::make(500, 50);  // 500 * 50 * 49 > 10^6 contrasts
  ds.records.push_back({0, 0, 1, 1});
  FoldAssignment folds;
  folds.n = 1;
  folds.fold_count = 2;
  folds.assignment = {0};
  BootstrapConfig boot;
  auto fit_stub = [&](const ComparisonDataset&) {
    ScoreMatrix s;
    s.index = ds.index;
    s.values = Eigen::MatrixXd::Zero(500, 50);
    return s;
  };
  CHECK_THROWS_WITH_AS(topk_sets(ds, fit_stub, 2, folds, 5, boot),
                       doctest::Contains("10^6"), ConfigError);
}

TEST_CASE("certify_targets shares nuisances across targets consistently") {
  SyntheticConfig config;
  config.d_t = 4;
  config.d_m = 4;
  config.rank = 2;
  config.amplitude = 2.0;
  config.n = 3000;
  config.seed = 93;
  ScoreMatrix truth = generate_truth(config);
  ComparisonDataset ds = sample_comparisons(truth, SamplingDesign::uniform(truth.index),
                                            config.n, 1.0, 94);
  BootstrapConfig boot;
  boot.draws = 300;
  boot.seed = 95;
  std::vector<CertifyTarget> targets = {{FamilyScope::kOneTask, 0, 1},
                                        {FamilyScope::kOneTask, 2, 3}};
  auto reports = certify_targets_per_task_btl(ds, targets, 2, boot);
  REQUIRE(reports.size() == 2);
  // Each agrees with its standalone run (same seed => same xi draws).
  auto solo = certify_model_per_task_btl(ds, FamilyScope::kOneTask, 0, 1, 2, boot);
  CHECK(reports[0].critical_value == doctest::Approx(solo.critical_value).epsilon(1e-12));
  CHECK(reports[0].rank_bands[0].lower == solo.rank_bands[0].lower);
  CHECK(reports[0].rank_bands[0].upper == solo.rank_bands[0].upper);
}
