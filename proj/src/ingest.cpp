#include "lrcert/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "lrcert/per_task_btl.hpp"
#include "lrcert/rng.hpp"

namespace lrcert {

namespace {

std::optional<Winner> parse_winner(const std::string& s) {
  if (s == "model_a" || s == "a") return Winner::kA;
  if (s == "model_b" || s == "b") return Winner::kB;
  if (s == "tie") return Winner::kTie;
  if (s == "tie (bothbad)" || s == "tie(bothbad)" || s == "both_bad") return Winner::kBothBad;
  return std::nullopt;
}

// Splits one CSV line, honoring double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

ParsedVotes parse_csv(std::istream& in) {
  ParsedVotes out;
  std::string line;
  if (!std::getline(in, line)) throw DataError("parse_votes: empty file");
  auto header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"model_a", "model_b", "winner", "category"}) {
    if (!col.count(required))
      throw DataError(std::string("parse_votes: missing CSV column ") + required);
  }
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() < header.size()) {
      ++out.skipped;
      continue;
    }
    RawVote v;
    v.model_a = fields[col["model_a"]];
    v.model_b = fields[col["model_b"]];
    v.category = fields[col["category"]];
    auto w = parse_winner(fields[col["winner"]]);
    if (v.model_a.empty() || v.model_b.empty() || v.category.empty() || !w) {
      ++out.skipped;
      continue;
    }
    v.winner = *w;
    out.votes.push_back(std::move(v));
  }
  return out;
}

ParsedVotes parse_jsonl(std::istream& in) {
  ParsedVotes out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      ++out.skipped;
      continue;
    }
    if (!j.contains("model_a") || !j.contains("model_b") || !j.contains("winner") ||
        !j.contains("category")) {
      ++out.skipped;
      continue;
    }
    RawVote v;
    try {
      v.model_a = j.at("model_a").get<std::string>();
      v.model_b = j.at("model_b").get<std::string>();
      v.category = j.at("category").get<std::string>();
      auto w = parse_winner(j.at("winner").get<std::string>());
      if (v.model_a.empty() || v.model_b.empty() || v.category.empty() || !w) {
        ++out.skipped;
        continue;
      }
      v.winner = *w;
    } catch (const nlohmann::json::exception&) {
      ++out.skipped;
      continue;
    }
    out.votes.push_back(std::move(v));
  }
  return out;
}

}  // namespace

ParsedVotes parse_votes(const std::string& path, VoteFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("parse_votes: cannot open " + path);
  ParsedVotes out = (format == VoteFormat::kCsv) ? parse_csv(in) : parse_jsonl(in);
  if (out.votes.empty()) throw DataError("parse_votes: zero valid rows in " + path);
  return out;
}

ComparisonDataset build_dataset(const std::vector<RawVote>& votes, int top_k_models,
                                const std::map<std::string, std::string>& category_map,
                                TiePolicy tie_policy, std::uint64_t seed, BuildStats* stats) {
  if (votes.empty()) throw DataError("build_dataset: no votes");
  if (top_k_models < 2) throw ConfigError("build_dataset: top_k_models must be >= 2");

  std::map<std::string, std::size_t> freq;
  for (const auto& v : votes) {
    ++freq[v.model_a];
    ++freq[v.model_b];
  }
  std::vector<std::pair<std::string, std::size_t>> by_freq(freq.begin(), freq.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;  // frequency ties broken alphabetically
  });
  if (static_cast<int>(by_freq.size()) < 2)
    throw DataError("build_dataset: fewer than 2 surviving models");
  if (static_cast<int>(by_freq.size()) > top_k_models) by_freq.resize(top_k_models);

  std::vector<std::string> model_names;
  model_names.reserve(by_freq.size());
  for (const auto& [name, count] : by_freq) model_names.push_back(name);
  std::sort(model_names.begin(), model_names.end());
  std::unordered_map<std::string, int> model_id;
  for (std::size_t i = 0; i < model_names.size(); ++i) model_id[model_names[i]] = static_cast<int>(i);

  BuildStats local_stats;
  BuildStats& st = stats ? *stats : local_stats;

  // First pass decides which task names survive, so the dictionary is stable.
  std::vector<std::string> task_names;
  {
    std::map<std::string, bool> seen;
    for (const auto& v : votes) {
      auto it = category_map.find(v.category);
      if (it == category_map.end()) continue;
      if (!model_id.count(v.model_a) || !model_id.count(v.model_b)) continue;
      seen[it->second] = true;
    }
    for (const auto& [name, unused] : seen) task_names.push_back(name);
  }
  if (task_names.empty()) throw DataError("build_dataset: empty surviving record set");
  std::unordered_map<std::string, int> task_id;
  for (std::size_t i = 0; i < task_names.size(); ++i) task_id[task_names[i]] = static_cast<int>(i);

  ComparisonDataset ds;
  ds.index.task_count = static_cast<int>(task_names.size());
  ds.index.model_count = static_cast<int>(model_names.size());
  ds.index.task_names = task_names;
  ds.index.model_names = model_names;

  Rng rng = Rng(seed).split(0x71e5);
  for (const auto& v : votes) {
    if (!model_id.count(v.model_a) || !model_id.count(v.model_b)) {
      ++st.dropped_excluded_model;
      continue;
    }
    auto cat = category_map.find(v.category);
    if (cat == category_map.end()) {
      ++st.dropped_unmapped_category;
      continue;
    }
    ComparisonRecord rec;
    rec.task = task_id.at(cat->second);
    rec.model_a = model_id.at(v.model_a);
    rec.model_b = model_id.at(v.model_b);
    if (rec.model_a == rec.model_b) {
      ++st.dropped_excluded_model;
      continue;
    }
    if (v.winner == Winner::kTie || v.winner == Winner::kBothBad) {
      if (tie_policy == TiePolicy::kDrop) {
        ++st.dropped_tie;
        continue;
      }
      rec.outcome = rng.bernoulli(0.5) ? 1 : 0;
    } else {
      rec.outcome = (v.winner == Winner::kA) ? 1 : 0;
    }
    ds.records.push_back(rec);
  }
  if (ds.records.empty()) throw DataError("build_dataset: empty surviving record set");
  if (ds.index.model_count < 2) throw DataError("build_dataset: fewer than 2 surviving models");
  ds.validate();
  return ds;
}

ComparisonDataset subsample(const ComparisonDataset& dataset, double fraction,
                            std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("subsample: fraction must be in (0, 1]");
  if (fraction == 1.0) return dataset;
  std::size_t n = dataset.records.size();
  auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  if (keep == 0) throw DataError("subsample: resulting dataset empty");

  // Partial Fisher-Yates picks `keep` indices; sorting restores input order.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng(seed).split(0x5ab5);
  for (std::size_t i = 0; i < keep; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());

  ComparisonDataset out;
  out.index = dataset.index;
  out.records.reserve(keep);
  for (std::size_t i : idx) out.records.push_back(dataset.records[i]);
  return out;
}

FoldAssignment assign_folds(std::size_t n, int fold_count, std::uint64_t seed) {
  if (fold_count < 2) throw ConfigError("assign_folds: fold_count must be >= 2");
  if (n < static_cast<std::size_t>(fold_count))
    throw DataError("assign_folds: n must be >= fold_count");
  FoldAssignment fa;
  fa.n = n;
  fa.fold_count = fold_count;
  fa.assignment.reserve(n);
  std::size_t base = n / fold_count;
  std::size_t rem = n % fold_count;
  for (int f = 0; f < fold_count; ++f) {
    std::size_t size = base + (static_cast<std::size_t>(f) < rem ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fa.assignment.push_back(f);
  }
  Rng rng = Rng(seed).split(0xf01d);
  rng.shuffle(fa.assignment);
  return fa;
}

ScoreMatrix fit_ground_truth_btl(const ComparisonDataset& dataset) {
  if (dataset.records.empty()) throw DataError("fit_ground_truth_btl: empty dataset");
  return per_task_btl::fit(dataset).scores;
}

}  // namespace lrcert
