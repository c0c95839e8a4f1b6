#include "lrcert/synth.hpp"

#include <cmath>

#include "lrcert/btl.hpp"

namespace lrcert {

SamplingDesign SamplingDesign::uniform(const TaskModelIndex& index) {
  SamplingDesign d;
  d.task_weights = Eigen::VectorXd::Constant(index.task_count, 1.0 / index.task_count);
  d.pair_weight_mode = PairWeightMode::kUniform;
  return d;
}

int SamplingDesign::pair_index(int a, int b, int d_m) {
  if (a > b) std::swap(a, b);
  return a * d_m - a * (a + 1) / 2 + (b - a - 1);
}

void SamplingDesign::validate(const TaskModelIndex& index) const {
  if (task_weights.size() != index.task_count)
    throw ConfigError("task_weights length must equal task_count");
  if ((task_weights.array() <= 0.0).any())
    throw ConfigError("task_weights must be strictly positive");
  if (std::fabs(task_weights.sum() - 1.0) > 1e-12)
    throw ConfigError("task_weights must sum to 1");
  if (pair_weight_mode == PairWeightMode::kCustom) {
    int n_pairs = index.model_count * (index.model_count - 1) / 2;
    if (static_cast<int>(custom_pair_weights.size()) != index.task_count)
      throw ConfigError("custom_pair_weights must have one vector per task");
    for (const auto& w : custom_pair_weights) {
      if (w.size() != n_pairs) throw ConfigError("pair weight vector length mismatch");
      if ((w.array() <= 0.0).any()) throw ConfigError("pair weights must be strictly positive");
      if (std::fabs(w.sum() - 1.0) > 1e-12) throw ConfigError("pair weights must sum to 1");
    }
  }
}

ScoreMatrix generate_truth(const SyntheticConfig& config) {
  config.validate();
  for (int attempt = 0; attempt < 4; ++attempt) {
    Rng rng = Rng(config.seed + static_cast<std::uint64_t>(attempt)).split(0x5e11);
    Eigen::MatrixXd left(config.d_t, config.rank);
    Eigen::MatrixXd right(config.d_m, config.rank);
    for (int i = 0; i < left.rows(); ++i)
      for (int j = 0; j < left.cols(); ++j) left(i, j) = rng.normal();
    for (int i = 0; i < right.rows(); ++i)
      for (int j = 0; j < right.cols(); ++j) right(i, j) = rng.normal();

    TaskModelIndex index = TaskModelIndex::make(config.d_t, config.d_m);
    // Center first, then rescale; the reverse order would break the amplitude.
    ScoreMatrix centered = recenter_rows(index, left * right.transpose());
    double max_abs = centered.values.cwiseAbs().maxCoeff();
    if (max_abs < 1e-300) continue;  // degenerate draw, retry with next seed
    centered.values *= config.amplitude / max_abs;
    return centered;
  }
  throw NumericalError("generate_truth: degenerate factor draw after 3 retries");
}

namespace {

// Inverse-CDF sampling from a fixed discrete distribution.
struct DiscreteSampler {
  Eigen::VectorXd cdf;
  explicit DiscreteSampler(const Eigen::VectorXd& w) : cdf(w.size()) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      acc += w(i);
      cdf(i) = acc;
    }
    cdf(w.size() - 1) = 1.0;
  }
  int draw(Rng& rng) const {
    double u = rng.uniform();
    const double* begin = cdf.data();
    const double* end = begin + cdf.size();
    return static_cast<int>(std::upper_bound(begin, end, u) - begin);
  }
};

}  // namespace

ComparisonDataset sample_comparisons(const ScoreMatrix& truth, const SamplingDesign& design,
                                     std::int64_t n, double temperature, std::uint64_t seed) {
  design.validate(truth.index);
  if (n < 1) throw ConfigError("sample_comparisons: n must be >= 1");
  if (temperature <= 0.0) throw ConfigError("sample_comparisons: temperature must be positive");
  const int d_m = truth.index.model_count;

  DiscreteSampler task_sampler(design.task_weights);
  std::vector<DiscreteSampler> pair_samplers;
  if (design.pair_weight_mode == PairWeightMode::kCustom) {
    pair_samplers.reserve(design.custom_pair_weights.size());
    for (const auto& w : design.custom_pair_weights) pair_samplers.emplace_back(w);
  }

  ComparisonDataset ds;
  ds.index = truth.index;
  ds.records.reserve(static_cast<std::size_t>(n));
  Rng rng = Rng(seed).split(0xda7a);
  for (std::int64_t i = 0; i < n; ++i) {
    ComparisonRecord rec;
    rec.task = task_sampler.draw(rng);
    int a, b;
    if (design.pair_weight_mode == PairWeightMode::kUniform) {
      a = static_cast<int>(rng.uniform_int(d_m));
      b = static_cast<int>(rng.uniform_int(d_m - 1));
      if (b >= a) ++b;
    } else {
      int pair = pair_samplers[rec.task].draw(rng);
      // invert the canonical pair index
      a = 0;
      int remaining = pair;
      while (remaining >= d_m - 1 - a) {
        remaining -= d_m - 1 - a;
        ++a;
      }
      b = a + 1 + remaining;
      if (rng.bernoulli(0.5)) std::swap(a, b);  // orientation
    }
    rec.model_a = a;
    rec.model_b = b;
    double eta = (truth.values(rec.task, a) - truth.values(rec.task, b)) / temperature;
    rec.outcome = rng.bernoulli(btl_prob(eta)) ? 1 : 0;
    ds.records.push_back(rec);
  }
  return ds;
}

}  // namespace lrcert
