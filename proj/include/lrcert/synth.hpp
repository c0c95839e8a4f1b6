#pragma once

// Synthetic data generation: ground-truth low-rank score matrices and BTL
// comparison samples under a near-uniform sampling design.

#include <cstdint>
#include <optional>
#include <vector>

#include "lrcert/rng.hpp"
#include "lrcert/score_matrix.hpp"
#include "lrcert/types.hpp"

namespace lrcert {

enum class PairWeightMode { kUniform, kCustom };

// Task distribution nu and per-task distribution pi_t over unordered model
// pairs. Pairs are indexed canonically: (a,b) with a < b maps to
// a*d_m - a*(a+1)/2 + (b-a-1).
struct SamplingDesign {
  Eigen::VectorXd task_weights;  // length d_t, sums to 1
  PairWeightMode pair_weight_mode = PairWeightMode::kUniform;
  // When kCustom: one probability vector per task over the C(d_m,2) pairs.
  std::vector<Eigen::VectorXd> custom_pair_weights;

  static SamplingDesign uniform(const TaskModelIndex& index);
  static int pair_index(int a, int b, int d_m);
  void validate(const TaskModelIndex& index) const;
};

struct SyntheticConfig {
  int d_t = 50;
  int d_m = 50;
  int rank = 5;
  double amplitude = 5.0;  // target entrywise bound
  std::int64_t n = 16000;
  double temperature = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (d_t < 1 || d_m < 2) throw ConfigError("synthetic dims require d_t >= 1, d_m >= 2");
    if (rank < 1 || rank > std::min(d_t, d_m)) throw ConfigError("rank must be in [1, min(d_t,d_m)]");
    if (amplitude <= 0.0) throw ConfigError("amplitude must be positive");
    if (n < 1) throw ConfigError("n must be >= 1");
    if (temperature <= 0.0) throw ConfigError("temperature must be positive");
  }
};

// Gaussian factor product, row-centered, then rescaled so max |entry| equals
// amplitude exactly. Deterministic given the seed.
ScoreMatrix generate_truth(const SyntheticConfig& config);

// n i.i.d. records: task from nu, unordered pair from pi_t, orientation
// randomized uniformly, outcome ~ Bernoulli(sigma((theta_a - theta_b)/tau)).
ComparisonDataset sample_comparisons(const ScoreMatrix& truth, const SamplingDesign& design,
                                     std::int64_t n, double temperature, std::uint64_t seed);

}  // namespace lrcert
