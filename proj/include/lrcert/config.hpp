#pragma once

// Key-value run configuration: `key = value` lines, '#' comments. Flags given
// on the command line override file values.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lrcert/types.hpp"

namespace lrcert {

class RunConfig {
 public:
  RunConfig() = default;
  static RunConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback = "") const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         const std::vector<std::int64_t>& fallback) const;
  std::vector<std::string> get_string_list(const std::string& key,
                                           const std::vector<std::string>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lrcert
