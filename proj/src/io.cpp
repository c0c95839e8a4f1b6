#include "lrcert/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lrcert {

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_dataset_csv(const ComparisonDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_dataset_csv: cannot open " + path);
  out << "model_a,model_b,winner,category\n";
  for (const auto& r : dataset.records) {
    out << csv_escape(dataset.index.model_names[r.model_a]) << ','
        << csv_escape(dataset.index.model_names[r.model_b]) << ','
        << (r.outcome ? "model_a" : "model_b") << ','
        << csv_escape(dataset.index.task_names[r.task]) << '\n';
  }
}

void write_dataset_jsonl(const ComparisonDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_dataset_jsonl: cannot open " + path);
  for (const auto& r : dataset.records) {
    nlohmann::json j = {{"model_a", dataset.index.model_names[r.model_a]},
                        {"model_b", dataset.index.model_names[r.model_b]},
                        {"winner", r.outcome ? "model_a" : "model_b"},
                        {"category", dataset.index.task_names[r.task]}};
    out << j.dump() << '\n';
  }
}

void write_scores(const ScoreMatrix& scores, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_scores: cannot open " + path);
  out << "lrcert-scores 1\n";
  out << scores.index.task_count << ' ' << scores.index.model_count << '\n';
  for (int t = 0; t < scores.index.task_count; ++t)
    out << scores.index.task_names[t] << (t + 1 < scores.index.task_count ? '\t' : '\n');
  for (int m = 0; m < scores.index.model_count; ++m)
    out << scores.index.model_names[m] << (m + 1 < scores.index.model_count ? '\t' : '\n');
  out << std::setprecision(17);
  for (int t = 0; t < scores.index.task_count; ++t) {
    for (int m = 0; m < scores.index.model_count; ++m)
      out << scores.values(t, m) << (m + 1 < scores.index.model_count ? ' ' : '\n');
  }
}

ScoreMatrix read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_scores: cannot open " + path);
  std::string header;
  std::getline(in, header);
  if (header != "lrcert-scores 1") throw DataError("read_scores: unknown format in " + path);
  ScoreMatrix scores;
  in >> scores.index.task_count >> scores.index.model_count;
  in.ignore();
  std::string line;
  std::getline(in, line);
  scores.index.task_names = split_tabs(line);
  std::getline(in, line);
  scores.index.model_names = split_tabs(line);
  scores.values.resize(scores.index.task_count, scores.index.model_count);
  for (int t = 0; t < scores.index.task_count; ++t)
    for (int m = 0; m < scores.index.model_count; ++m) in >> scores.values(t, m);
  if (!in) throw DataError("read_scores: truncated file " + path);
  scores.index.validate();
  return scores;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return {};
  auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

}  // namespace

void write_artifact(const RefineResult& result, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["kind"] = "lrcert-model";
  j["task_names"] = result.factors.index.task_names;
  j["model_names"] = result.factors.index.model_names;
  j["rank"] = result.factors.rank;
  j["left"] = matrix_to_json(result.factors.left);
  j["right"] = matrix_to_json(result.factors.right);
  j["scores"] = matrix_to_json(result.scores.values);
  j["diagnostics"] = {{"stage_b_nonconverged", result.diagnostics.stage_b_nonconverged},
                      {"stage_c_nonconverged", result.diagnostics.stage_c_nonconverged},
                      {"stage_b_skipped", result.diagnostics.stage_b_skipped},
                      {"stage_c_skipped", result.diagnostics.stage_c_skipped}};
  std::ofstream out(path);
  if (!out) throw DataError("write_artifact: cannot open " + path);
  out << j.dump(2) << '\n';
}

RefineResult read_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_artifact: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("read_artifact: bad JSON in " + path + ": " + e.what());
  }
  if (j.value("kind", "") != "lrcert-model" || j.value("schema_version", 0) != 1)
    throw DataError("read_artifact: not a version-1 lrcert model file");
  RefineResult result;
  result.factors.index.task_names = j.at("task_names").get<std::vector<std::string>>();
  result.factors.index.model_names = j.at("model_names").get<std::vector<std::string>>();
  result.factors.index.task_count = static_cast<int>(result.factors.index.task_names.size());
  result.factors.index.model_count = static_cast<int>(result.factors.index.model_names.size());
  result.factors.rank = j.at("rank").get<int>();
  result.factors.left = matrix_from_json(j.at("left"));
  result.factors.right = matrix_from_json(j.at("right"));
  result.scores.index = result.factors.index;
  result.scores.values = matrix_from_json(j.at("scores"));
  const auto& d = j.at("diagnostics");
  result.diagnostics.stage_b_nonconverged = d.value("stage_b_nonconverged", 0);
  result.diagnostics.stage_c_nonconverged = d.value("stage_c_nonconverged", 0);
  result.diagnostics.stage_b_skipped = d.value("stage_b_skipped", 0);
  result.diagnostics.stage_c_skipped = d.value("stage_c_skipped", 0);
  result.factors.index.validate();
  return result;
}

}  // namespace lrcert
