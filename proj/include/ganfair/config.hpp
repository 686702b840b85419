#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace ganfair {

// Configuration problems carry the offending key so the CLI can cite it.
class config_error : public std::runtime_error {
 public:
  config_error(const std::string& key, const std::string& message)
      : std::runtime_error("config key '" + key + "': " + message), key_(key) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Flat section.key -> raw value store fed by either the TOML-style format or
// a JSON document with one nesting level.
class KvConfig {
 public:
  void set(const std::string& key, std::string value) {
    values_[key] = std::move(value);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key,
                         const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw config_error(key, "missing required key");
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_double(key, it->second);
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const std::int64_t v = std::stoll(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw config_error(key, "expected an integer, got '" + it->second + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw config_error(key, "expected true/false, got '" + it->second + "'");
  }

  std::vector<double> get_double_array(const std::string& key,
                                       std::vector<double> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const std::string& item : split_array(key, it->second)) {
      out.push_back(parse_double(key, item));
    }
    return out;
  }

  std::vector<std::uint64_t> get_u64_array(
      const std::string& key, std::vector<std::uint64_t> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::uint64_t> out;
    for (const std::string& item : split_array(key, it->second)) {
      try {
        out.push_back(std::stoull(item));
      } catch (const std::exception&) {
        throw config_error(key, "expected unsigned integers, got '" + item + "'");
      }
    }
    return out;
  }

  const std::map<std::string, std::string>& raw() const { return values_; }

 private:
  static double parse_double(const std::string& key, const std::string& text) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw config_error(key, "expected a number, got '" + text + "'");
    }
  }

  static std::vector<std::string> split_array(const std::string& key,
                                              const std::string& text) {
    std::string body = text;
    if (body.size() >= 2 && body.front() == '[' && body.back() == ']') {
      body = body.substr(1, body.size() - 2);
    } else {
      throw config_error(key, "expected an array like [a, b, c]");
    }
    std::vector<std::string> items;
    std::string item;
    std::istringstream is(body);
    while (std::getline(is, item, ',')) {
      const auto first = item.find_first_not_of(" \t");
      if (first == std::string::npos) continue;
      const auto last = item.find_last_not_of(" \t");
      items.push_back(item.substr(first, last - first + 1));
    }
    if (items.empty()) throw config_error(key, "array must not be empty");
    return items;
  }

  std::map<std::string, std::string> values_;
};

namespace detail {

inline std::string strip(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

// Flat TOML subset: [section] headers, key = value lines, # comments,
// quoted strings, bare numbers/booleans, and one-line arrays.
inline KvConfig parse_toml_config(const std::string& text) {
  KvConfig config;
  std::istringstream is(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    // strip comments outside quotes
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = detail::strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw config_error("line " + std::to_string(line_no),
                           "malformed section header");
      }
      section = detail::strip(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error("line " + std::to_string(line_no),
                         "expected key = value");
    }
    std::string key = detail::strip(line.substr(0, eq));
    std::string value = detail::strip(line.substr(eq + 1));
    if (key.empty()) {
      throw config_error("line " + std::to_string(line_no), "empty key");
    }
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    config.set(section.empty() ? key : section + "." + key, value);
  }
  return config;
}

// JSON alternative: {"section": {"key": value}} or flat {"key": value}.
inline KvConfig parse_json_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    throw config_error("<document>", std::string("invalid JSON: ") + err.what());
  }
  if (!doc.is_object()) {
    throw config_error("<document>", "top-level JSON value must be an object");
  }
  KvConfig config;
  auto to_raw = [](const nlohmann::json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
      std::string out = "[";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += v[i].dump();
      }
      return out + "]";
    }
    return v.dump();
  };
  for (const auto& [key, value] : doc.items()) {
    if (value.is_object()) {
      for (const auto& [inner_key, inner] : value.items()) {
        config.set(key + "." + inner_key, to_raw(inner));
      }
    } else {
      config.set(key, to_raw(value));
    }
  }
  return config;
}

inline KvConfig load_config_file(const std::string& path, std::string* raw_out = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("config: cannot read " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  const std::string text = buffer.str();
  if (raw_out) *raw_out = text;
  const bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  return json ? parse_json_config(text) : parse_toml_config(text);
}

}  // namespace ganfair
