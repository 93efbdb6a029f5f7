#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "proxdiff/schedule.hpp"
#include "proxdiff/targets.hpp"

namespace proxdiff {

// Flat `key = value` configuration text: one pair per line, `#` starts a
// comment, blank lines are skipped, duplicate keys are errors. Every lookup
// marks its key consumed so ensure_consumed() can reject leftovers — a
// misspelled key is a hard error, never a silently applied default.
class ConfigMap {
 public:
  static ConfigMap from_file(const std::string& path);
  static ConfigMap from_text(const std::string& text, const std::string& origin = "<inline>");

  const std::string& origin() const { return origin_; }
  const std::string& text() const { return text_; }  // verbatim, for manifests
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  // Single-argument forms are required keys; two-argument forms fall back.
  std::string get_string(const std::string& key);
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key);
  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key);
  int get_int(const std::string& key, int fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);

  // Comma-separated lists.
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback);
  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback);
  std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                          std::vector<std::uint64_t> fallback);
  std::vector<std::string> get_string_list(const std::string& key,
                                           std::vector<std::string> fallback);

  // Sorted keys starting with prefix; does not consume.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  // Throws std::invalid_argument naming every key that was never read.
  void ensure_consumed() const;

 private:
  ConfigMap() = default;
  std::string raw(const std::string& key);  // consume; throws if missing

  std::string origin_;
  std::string text_;
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

// Plain-data target description, buildable against any schedule.
// Config block:
//   target.dim     = d
//   target.labels  = C
//   target.label.i = w m_1 ... m_d var [; w m_1 ... m_d var] ...
struct TargetSpec {
  int dim = 1;
  std::vector<std::vector<Component>> per_label;

  MixtureTarget build(const NoiseSchedule& schedule) const;
};

TargetSpec parse_target_spec(ConfigMap& cfg);

}  // namespace proxdiff
