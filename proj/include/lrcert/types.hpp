#pragma once

// Core domain types shared by every module: the task/model dictionary and
// pairwise comparison records.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace lrcert {

// Error taxonomy mapped to CLI exit codes (2/3/4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dictionary of task and model names. Row index = task, column index = model.
struct TaskModelIndex {
  int task_count = 0;
  int model_count = 0;
  std::vector<std::string> task_names;
  std::vector<std::string> model_names;

  static TaskModelIndex make(int d_t, int d_m) {
    TaskModelIndex idx;
    idx.task_count = d_t;
    idx.model_count = d_m;
    idx.task_names.reserve(d_t);
    idx.model_names.reserve(d_m);
    for (int t = 0; t < d_t; ++t) idx.task_names.push_back("task_" + std::to_string(t));
    for (int m = 0; m < d_m; ++m) idx.model_names.push_back("model_" + std::to_string(m));
    return idx;
  }

  void validate() const {
    if (task_count < 1) throw ConfigError("task_count must be >= 1");
    if (model_count < 2) throw ConfigError("model_count must be >= 2");
    if (static_cast<int>(task_names.size()) != task_count)
      throw ConfigError("task_names length mismatch");
    if (static_cast<int>(model_names.size()) != model_count)
      throw ConfigError("model_names length mismatch");
    std::unordered_set<std::string> seen;
    for (const auto& s : task_names)
      if (!seen.insert(s).second) throw ConfigError("duplicate task name: " + s);
    seen.clear();
    for (const auto& s : model_names)
      if (!seen.insert(s).second) throw ConfigError("duplicate model name: " + s);
  }

  bool same_shape(const TaskModelIndex& other) const {
    return task_count == other.task_count && model_count == other.model_count;
  }
};

// One pairwise comparison: outcome == 1 means model_a was preferred.
struct ComparisonRecord {
  std::int32_t task = 0;
  std::int32_t model_a = 0;
  std::int32_t model_b = 0;
  std::uint8_t outcome = 0;
};

struct ComparisonDataset {
  TaskModelIndex index;
  std::vector<ComparisonRecord> records;

  std::size_t size() const { return records.size(); }

  void validate() const {
    index.validate();
    for (const auto& r : records) {
      if (r.task < 0 || r.task >= index.task_count)
        throw DataError("comparison record has task index out of range");
      if (r.model_a < 0 || r.model_a >= index.model_count ||
          r.model_b < 0 || r.model_b >= index.model_count)
        throw DataError("comparison record has model index out of range");
      if (r.model_a == r.model_b)
        throw DataError("comparison record compares a model with itself");
      if (r.outcome > 1) throw DataError("outcome must be 0 or 1");
    }
  }
};

}  // namespace lrcert
