#pragma once

// File formats: comparison datasets (CSV/JSONL, same schema the ingest module
// reads), score matrices (versioned dense text), and fitted model artifacts
// (versioned JSON).

#include <string>

#include "lrcert/refine.hpp"
#include "lrcert/score_matrix.hpp"
#include "lrcert/types.hpp"

namespace lrcert {

// Comparison files use the arena schema: model_a,model_b,winner,category with
// winner in {model_a, model_b}; the task name is the category.
void write_dataset_csv(const ComparisonDataset& dataset, const std::string& path);
void write_dataset_jsonl(const ComparisonDataset& dataset, const std::string& path);

// Dense text format:
//   lrcert-scores 1
//   <d_t> <d_m>
//   <task names, one line, tab-separated>
//   <model names, one line, tab-separated>
//   d_t rows of d_m entries (max precision)
void write_scores(const ScoreMatrix& scores, const std::string& path);
ScoreMatrix read_scores(const std::string& path);

// Model artifact: index, rank, factors, and fit diagnostics as JSON.
void write_artifact(const RefineResult& result, const std::string& path);
RefineResult read_artifact(const std::string& path);

}  // namespace lrcert
