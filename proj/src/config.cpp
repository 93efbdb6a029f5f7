#include "proxdiff/config.hpp"

#include <charconv>
#include <climits>
#include <sstream>
#include <stdexcept>

#include "proxdiff/io.hpp"

namespace proxdiff {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(trim(s.substr(start)));
      return parts;
    }
    parts.push_back(trim(s.substr(start, pos - start)));
    start = pos + 1;
  }
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("config key '" + key + "': '" + s + "' is not a number");
  }
  return v;
}

long long parse_ll(const std::string& key, const std::string& s) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("config key '" + key + "': '" + s + "' is not an integer");
  }
  return v;
}

}  // namespace

ConfigMap ConfigMap::from_file(const std::string& path) {
  return from_text(read_text_file(path), path);
}

ConfigMap ConfigMap::from_text(const std::string& text, const std::string& origin) {
  ConfigMap cfg;
  cfg.origin_ = origin;
  cfg.text_ = text;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!cfg.values_.emplace(key, value).second) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                                  key + "'");
    }
  }
  return cfg;
}

std::string ConfigMap::raw(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::invalid_argument(origin_ + ": missing required config key '" + key + "'");
  }
  consumed_.insert(key);
  return it->second;
}

std::string ConfigMap::get_string(const std::string& key) { return raw(key); }

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) {
  return has(key) ? raw(key) : fallback;
}

double ConfigMap::get_double(const std::string& key) { return parse_double(key, raw(key)); }

double ConfigMap::get_double(const std::string& key, double fallback) {
  return has(key) ? get_double(key) : fallback;
}

int ConfigMap::get_int(const std::string& key) {
  const long long v = parse_ll(key, raw(key));
  if (v < INT_MIN || v > INT_MAX) {
    throw std::invalid_argument("config key '" + key + "': value out of int range");
  }
  return static_cast<int>(v);
}

int ConfigMap::get_int(const std::string& key, int fallback) {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t ConfigMap::get_u64(const std::string& key, std::uint64_t fallback) {
  if (!has(key)) return fallback;
  const std::string s = raw(key);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("config key '" + key + "': '" + s +
                                "' is not an unsigned integer");
  }
  return v;
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const std::string s = raw(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("config key '" + key + "': '" + s + "' is not a boolean");
}

std::vector<int> ConfigMap::get_int_list(const std::string& key, std::vector<int> fallback) {
  if (!has(key)) return fallback;
  std::vector<int> out;
  for (const std::string& part : split(raw(key), ',')) {
    if (part.empty()) continue;
    out.push_back(static_cast<int>(parse_ll(key, part)));
  }
  if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
  return out;
}

std::vector<double> ConfigMap::get_double_list(const std::string& key,
                                               std::vector<double> fallback) {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const std::string& part : split(raw(key), ',')) {
    if (part.empty()) continue;
    out.push_back(parse_double(key, part));
  }
  if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
  return out;
}

std::vector<std::uint64_t> ConfigMap::get_u64_list(const std::string& key,
                                                   std::vector<std::uint64_t> fallback) {
  if (!has(key)) return fallback;
  std::vector<std::uint64_t> out;
  for (const std::string& part : split(raw(key), ',')) {
    if (part.empty()) continue;
    std::uint64_t v = 0;
    const auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (res.ec != std::errc() || res.ptr != part.data() + part.size()) {
      throw std::invalid_argument("config key '" + key + "': '" + part +
                                  "' is not an unsigned integer");
    }
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
  return out;
}

std::vector<std::string> ConfigMap::get_string_list(const std::string& key,
                                                    std::vector<std::string> fallback) {
  if (!has(key)) return fallback;
  std::vector<std::string> out;
  for (const std::string& part : split(raw(key), ',')) {
    if (!part.empty()) out.push_back(part);
  }
  if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
  return out;
}

std::vector<std::string> ConfigMap::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (key.rfind(prefix, 0) == 0) out.push_back(key);
  }
  return out;
}

void ConfigMap::ensure_consumed() const {
  std::string leftover;
  for (const auto& [key, value] : values_) {
    if (consumed_.count(key) == 0) {
      if (!leftover.empty()) leftover += ", ";
      leftover += "'" + key + "'";
    }
  }
  if (!leftover.empty()) {
    throw std::invalid_argument(origin_ + ": unknown config keys: " + leftover);
  }
}

MixtureTarget TargetSpec::build(const NoiseSchedule& schedule) const {
  return MixtureTarget(schedule, dim, per_label);
}

TargetSpec parse_target_spec(ConfigMap& cfg) {
  TargetSpec spec;
  spec.dim = cfg.get_int("target.dim");
  const int labels = cfg.get_int("target.labels");
  if (spec.dim < 1) throw std::invalid_argument("target.dim must be >= 1");
  if (labels < 1) throw std::invalid_argument("target.labels must be >= 1");

  spec.per_label.reserve(static_cast<std::size_t>(labels));
  for (int i = 0; i < labels; ++i) {
    const std::string key = "target.label." + std::to_string(i);
    const std::string value = cfg.get_string(key);
    std::vector<Component> comps;
    for (const std::string& chunk : split(value, ';')) {
      std::istringstream fields(chunk);
      std::vector<double> nums;
      std::string tok;
      while (fields >> tok) nums.push_back(parse_double(key, tok));
      // weight, d mean coordinates, variance
      if (nums.size() != static_cast<std::size_t>(spec.dim) + 2) {
        throw std::invalid_argument(key + ": component '" + chunk + "' needs " +
                                    std::to_string(spec.dim + 2) +
                                    " numbers (weight, mean, variance), got " +
                                    std::to_string(nums.size()));
      }
      Component c;
      c.weight = nums.front();
      c.mean = Eigen::Map<const Eigen::VectorXd>(nums.data() + 1, spec.dim);
      c.var = nums.back();
      comps.push_back(std::move(c));
    }
    spec.per_label.push_back(std::move(comps));
  }
  return spec;
}

}  // namespace proxdiff
