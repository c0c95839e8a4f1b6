#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lrcert/btl.hpp"
#include "lrcert/refine.hpp"
#include "lrcert/rng.hpp"
#include "lrcert/synth.hpp"

using namespace lrcert;

namespace {

ScoreMatrix low_rank_scores(int d_t, int d_m, int rank, double amplitude, std::uint64_t seed) {
  SyntheticConfig config;
  config.d_t = d_t;
  config.d_m = d_m;
  config.rank = rank;
  config.amplitude = amplitude;
  config.seed = seed;
  return generate_truth(config);
}

// 1-D root of g(x) = target - sigma(slope * x - offset) by bisection.
double bisect_logistic(double target, double slope, double offset) {
  double lo = -1e3, hi = 1e3;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double value = target - btl_prob(slope * mid - offset);
    // g is decreasing in x when slope > 0
    if ((slope > 0) == (value > 0))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("stage_a reconstructs an exact low-rank initializer") {
  ScoreMatrix init = low_rank_scores(10, 8, 3, 2.0, 41);
  FactoredScores fac = stage_a_right_factor(init, 3, 100.0);  // cap never binds
  Eigen::MatrixXd recon = fac.reconstruct();
  CHECK((recon - init.values).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("stage_a caps spiky right-factor rows at exactly C_R/sqrt(d_m)") {
  // Construct an initializer whose top right singular vector is spiky.
  const int d_t = 6, d_m = 9;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(d_t);
  u << 1, -1, 2, -2, 1, -1;
  u.normalize();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d_m);
  v(0) = 1.0;  // maximally spiky
  Eigen::MatrixXd m = 5.0 * u * v.transpose();
  ScoreMatrix init = recenter_rows(TaskModelIndex::make(d_t, d_m), m);

  double cap_const = 0.5;  // cap at 0.5/sqrt(9) = 1/6 < 1
  FactoredScores fac = stage_a_right_factor(init, 1, cap_const);
  double cap = cap_const / std::sqrt(static_cast<double>(d_m));
  double max_norm = 0.0;
  for (int r = 0; r < fac.right.rows(); ++r)
    max_norm = std::max(max_norm, fac.right.row(r).norm());
  CHECK(max_norm == doctest::Approx(cap).epsilon(1e-12));
}

TEST_CASE("stage_a right factor is near-orthonormal when uncapped") {
  ScoreMatrix init = low_rank_scores(50, 50, 5, 5.0, 42);
  FactoredScores fac = stage_a_right_factor(init, 5, 100.0);
  Eigen::MatrixXd gram = fac.right.transpose() * fac.right;
  CHECK((gram - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("stage_a rejects rank-deficient initializers") {
  ScoreMatrix init = low_rank_scores(8, 8, 2, 3.0, 43);
  CHECK_THROWS_AS(stage_a_right_factor(init, 5, 4.0), NumericalError);
}

TEST_CASE("stage_b keeps Stage-A rows for tasks without split records") {
  ScoreMatrix truth = low_rank_scores(4, 6, 2, 2.0, 44);
  ComparisonDataset ds =
      sample_comparisons(truth, SamplingDesign::uniform(truth.index), 300, 1.0, 45);
  FactoredScores stage_a = stage_a_right_factor(truth, 2, 4.0);
  // Split containing only records of task 0.
  std::vector<std::size_t> split;
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    if (ds.records[i].task == 0) split.push_back(i);
  REQUIRE(!split.empty());
  RefineConfig config;
  config.rank = 2;
  Eigen::MatrixXd left = stage_b_left_update(stage_a, truth, ds, split, config);
  for (int t = 1; t < 4; ++t)
    CHECK((left.row(t) - stage_a.left.row(t)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((left.row(0) - stage_a.left.row(0)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("stage_b Newton root matches a bisection oracle at r = 1") {
  // One task, one pair, mixed outcomes so the score equation has a root:
  // S(theta) = R[m] * (2 - 3 sigma(R[m] theta - o)) = 0.
  const int d_m = 2;
  TaskModelIndex index = TaskModelIndex::make(1, d_m);
  ScoreMatrix init;
  init.index = index;
  init.values.resize(1, 2);
  init.values << 0.4, -0.4;

  FactoredScores stage_a = stage_a_right_factor(init, 1, 100.0);
  ComparisonDataset ds;
  ds.index = index;
  ds.records = {{0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 1, 0}};
  RefineConfig config;
  config.rank = 1;
  config.newton_tol = 1e-12;
  config.newton_max_iter = 200;
  Eigen::MatrixXd left = stage_b_left_update(stage_a, init, ds, {0, 1, 2}, config);

  double slope = stage_a.right(0, 0);
  double offset = init.values(0, 1);
  double oracle = bisect_logistic(2.0 / 3.0, slope, offset);
  CHECK(std::fabs(left(0, 0) - oracle) < 1e-8);
}

TEST_CASE("stage_b residual contract") {
  ScoreMatrix truth = low_rank_scores(5, 7, 2, 2.0, 46);
  ComparisonDataset ds =
      sample_comparisons(truth, SamplingDesign::uniform(truth.index), 2000, 1.0, 47);
  FactoredScores stage_a = stage_a_right_factor(truth, 2, 4.0);
  std::vector<std::size_t> split(ds.records.size());
  std::iota(split.begin(), split.end(), 0);
  RefineConfig config;
  config.rank = 2;
  RefineDiagnostics diag;
  Eigen::MatrixXd left = stage_b_left_update(stage_a, truth, ds, split, config, &diag);
  CHECK(diag.stage_b_nonconverged == 0);
  // verify ||S_t|| < tol * M_t directly
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(2);
    int count = 0;
    for (const auto& r : ds.records) {
      if (r.task != t) continue;
      ++count;
      double eta = stage_a.right.row(r.model_a).dot(left.row(t)) - truth.values(t, r.model_b);
      score += stage_a.right.row(r.model_a).transpose() * (r.outcome - btl_prob(eta));
    }
    CHECK(score.norm() < config.newton_tol * count);
  }
}

TEST_CASE("stage_c gauge contract and skipped models") {
  ScoreMatrix truth = low_rank_scores(6, 5, 2, 2.0, 48);
  ComparisonDataset ds =
      sample_comparisons(truth, SamplingDesign::uniform(truth.index), 400, 1.0, 49);
  FactoredScores stage_a = stage_a_right_factor(truth, 2, 4.0);
  // Drop model 3 from the split.
  std::vector<std::size_t> split;
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    if (ds.records[i].model_a != 3 && ds.records[i].model_b != 3) split.push_back(i);
  RefineConfig config;
  config.rank = 2;
  FactoredScores out = stage_c_column_update(stage_a.left, stage_a, ds, split, config);
  CHECK((Eigen::RowVectorXd::Ones(6) * out.left).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((out.right.row(3) - stage_a.right.row(3)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((out.right.row(0) - stage_a.right.row(0)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("stage_c Newton root matches a bisection oracle at r = 1, d_t = 2") {
  TaskModelIndex index = TaskModelIndex::make(2, 2);
  ScoreMatrix init;
  init.index = index;
  init.values.resize(2, 2);
  init.values << 0.8, -0.8, -0.5, 0.5;

  FactoredScores stage_a = stage_a_right_factor(init, 1, 100.0);
  ComparisonDataset ds;
  ds.index = index;
  // Only model 0 vs 1 at task 0, mixed outcomes (2 wins, 1 loss).
  ds.records = {{0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 1, 0}};
  RefineConfig config;
  config.rank = 1;
  config.newton_tol = 1e-12;
  config.newton_max_iter = 200;
  FactoredScores out = stage_c_column_update(stage_a.left, stage_a, ds, {0, 1, 2}, config);

  // Column-centered left factor and the reconstruction offset for model 1.
  Eigen::MatrixXd left_bar = stage_a.left;
  left_bar.rowwise() -= stage_a.left.colwise().mean();
  double x = left_bar(0, 0);
  double offset = left_bar.row(0).dot(stage_a.right.row(1));
  // Model 0's equation: x * (2 - 3 sigma(x * a - offset)) = 0.
  double oracle = bisect_logistic(2.0 / 3.0, x, offset);
  CHECK(std::fabs(out.right(0, 0) - oracle) < 1e-8);
}

TEST_CASE("stage_c is invariant to record reorientation") {
  ScoreMatrix truth = low_rank_scores(5, 6, 2, 2.0, 50);
  ComparisonDataset ds =
      sample_comparisons(truth, SamplingDesign::uniform(truth.index), 500, 1.0, 51);
  FactoredScores stage_a = stage_a_right_factor(truth, 2, 4.0);
  std::vector<std::size_t> split(ds.records.size());
  std::iota(split.begin(), split.end(), 0);
  RefineConfig config;
  config.rank = 2;
  FactoredScores out1 = stage_c_column_update(stage_a.left, stage_a, ds, split, config);

  ComparisonDataset flipped = ds;
  for (std::size_t i = 0; i < flipped.records.size(); i += 2) {
    auto& r = flipped.records[i];
    std::swap(r.model_a, r.model_b);
    r.outcome = 1 - r.outcome;
  }
  FactoredScores out2 = stage_c_column_update(stage_a.left, stage_a, flipped, split, config);
  CHECK((out1.right - out2.right).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("pairwise Gram identity by exhaustive summation") {
  const int d_t = 6, r = 3;
  Rng rng(52);
  Eigen::MatrixXd theta(d_t, r);
  for (int i = 0; i < d_t; ++i)
    for (int j = 0; j < r; ++j) theta(i, j) = rng.normal();
  theta.rowwise() -= theta.colwise().mean();  // column-centered

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(r, r);
  for (int u = 0; u < d_t; ++u)
    for (int v = u + 1; v < d_t; ++v) {
      Eigen::VectorXd diff = (theta.row(u) - theta.row(v)).transpose();
      sum += diff * diff.transpose();
    }
  Eigen::MatrixXd expected = static_cast<double>(d_t) * theta.transpose() * theta;
  CHECK((sum - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("column recentering preserves row pairwise differences") {
  Rng rng(53);
  Eigen::MatrixXd left(7, 3);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 3; ++j) left(i, j) = rng.normal();
  Eigen::MatrixXd centered = left;
  centered.rowwise() -= left.colwise().mean();
  for (int u = 0; u < 7; ++u)
    for (int v = 0; v < 7; ++v) {
      Eigen::RowVectorXd before = left.row(u) - left.row(v);
      Eigen::RowVectorXd after = centered.row(u) - centered.row(v);
      CHECK((before - after).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("refine output has rank at most r and satisfies the gauge") {
  ScoreMatrix truth = low_rank_scores(10, 10, 3, 3.0, 54);
  ComparisonDataset ds =
      sample_comparisons(truth, SamplingDesign::uniform(truth.index), 6000, 1.0, 55);
  RefineConfig config;
  config.rank = 3;
  // Bound chosen so clipping is inactive here; active clipping may bump the
  // numerical rank and is exercised separately.
  config.entry_bound = 6.0;
  config.splits = equal_thirds(ds.records.size());
  RefineResult result = refine(truth, ds, config);
  result.scores.validate();
  Eigen::VectorXd sv = result.scores.values.jacobiSvd().singularValues();
  CHECK(sv(3) < 1e-10 * sv(0));
  CHECK(result.scores.values.cwiseAbs().maxCoeff() <= 6.0 + 1e-12);
}

TEST_CASE("refine config validation") {
  ScoreMatrix truth = low_rank_scores(4, 4, 2, 2.0, 56);
  ComparisonDataset ds =
      sample_comparisons(truth, SamplingDesign::uniform(truth.index), 30, 1.0, 57);
  RefineConfig config;
  config.rank = 2;
  config.splits = {{0, 1}, {1, 2}, {3}};  // overlap
  CHECK_THROWS_AS(refine(truth, ds, config), ConfigError);
  config.splits = {{0, 1}, {2}, {}};  // empty split
  CHECK_THROWS_AS(refine(truth, ds, config), ConfigError);
}
