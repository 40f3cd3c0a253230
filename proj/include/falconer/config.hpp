#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace falconer {

/// Flat `key = value` text. `#` starts a comment; `[section]` lines prefix
/// the following keys with `section.`; dotted keys may also be written
/// inline. Later assignments override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string require(const std::string& key) const;
  double require_double(const std::string& key) const;
  long long require_int(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);
/// Comma-separated reals.
std::vector<double> parse_double_list(const std::string& text, const std::string& what);

/// Levenshtein distance.
std::size_t edit_distance(const std::string& a, const std::string& b);
/// Candidate closest to `key` by edit distance; empty when none given.
std::string nearest_key(const std::string& key, const std::vector<std::string>& candidates);

}  // namespace falconer
