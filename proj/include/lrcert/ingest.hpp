#pragma once

// Arena-style log ingestion: file parsing, model filtering, category-to-task
// mapping, subsampling, and fold assignment.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lrcert/score_matrix.hpp"
#include "lrcert/types.hpp"

namespace lrcert {

enum class Winner { kA, kB, kTie, kBothBad };
enum class VoteFormat { kCsv, kJsonl };
enum class TiePolicy { kDrop, kSplit };

struct RawVote {
  std::string model_a;
  std::string model_b;
  Winner winner = Winner::kA;
  std::string category;
};

struct ParsedVotes {
  std::vector<RawVote> votes;
  std::size_t skipped = 0;  // rows with missing/malformed fields
};

struct FoldAssignment {
  std::size_t n = 0;
  int fold_count = 0;
  std::vector<int> assignment;  // length n, values in [0, fold_count)

  std::vector<std::size_t> fold_members(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == fold) out.push_back(i);
    return out;
  }
};

struct BuildStats {
  std::size_t dropped_excluded_model = 0;
  std::size_t dropped_unmapped_category = 0;
  std::size_t dropped_tie = 0;
};

// Reads votes from a CSV (header: model_a,model_b,winner,category) or JSONL
// file with the same field names. Winner values: "model_a", "model_b",
// "tie", "tie (bothbad)".
ParsedVotes parse_votes(const std::string& path, VoteFormat format);

// Keeps the top_k_models most frequently compared models (frequency ties
// broken alphabetically), maps categories to tasks, applies the tie policy,
// and emits a dataset with sorted, deterministic dictionaries.
ComparisonDataset build_dataset(const std::vector<RawVote>& votes, int top_k_models,
                                const std::map<std::string, std::string>& category_map,
                                TiePolicy tie_policy, std::uint64_t seed = 0,
                                BuildStats* stats = nullptr);

// Uniform without-replacement sample of ceil(f*n) records; f == 1 returns the
// dataset unchanged. Relative record order is preserved.
ComparisonDataset subsample(const ComparisonDataset& dataset, double fraction,
                            std::uint64_t seed);

// Random balanced partition into fold_count folds (sizes differ by <= 1).
FoldAssignment assign_folds(std::size_t n, int fold_count, std::uint64_t seed);

// Per-task BTL MLE on the full data; the arena experiments use this as the
// reference score matrix.
ScoreMatrix fit_ground_truth_btl(const ComparisonDataset& dataset);

}  // namespace lrcert
