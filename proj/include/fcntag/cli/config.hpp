#pragma once

// Flat `section.key = value` run configuration. Blank lines and lines
// starting with '#' are ignored; later assignments win.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fcntag/error.hpp"

namespace fcntag::cli {

class RunConfig {
 public:
  static RunConfig parse(std::istream& in, const std::string& origin) {
    RunConfig c;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorKind::invalid_config, origin + ":" + std::to_string(line_no) + ": expected 'section.key = value'");
      try {
        c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
      } catch (const Error& e) {
        throw Error(ErrorKind::invalid_config, origin + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::invalid_config, "cannot open config file " + path.string());
    return parse(in, path.string());
  }

  void set(const std::string& key, const std::string& value) {
    auto dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size() || key.find_first_of(" \t=") != std::string::npos)
      throw Error(ErrorKind::invalid_config, "config key '" + key + "' is not of the form section.key");
    values_[key] = value;
  }

  /// Sets `key` only when absent.
  void set_default(const std::string& key, const std::string& value) {
    if (!has(key)) set(key, value);
  }

  /// Applies a `section.key=value` override string.
  void apply_override(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::invalid_config, "--set expects key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end() || it->second.empty())
      throw Error(ErrorKind::invalid_config, "missing required setting '" + key + "'");
    return it->second;
  }

  std::string str_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::uint64_t u64(const std::string& key) const {
    const auto& s = str(key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw Error(ErrorKind::invalid_config, key + ": expected a non-negative integer, got '" + s + "'");
    return v;
  }

  std::size_t size(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }
  int integer(const std::string& key) const { return static_cast<int>(u64(key)); }

  double real(const std::string& key) const {
    const auto& s = str(key);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw Error(ErrorKind::invalid_config, key + ": expected a number, got '" + s + "'");
    return v;
  }

  bool flag(const std::string& key) const {
    auto s = str_or(key, "false");
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off" || s.empty()) return false;
    throw Error(ErrorKind::invalid_config, key + ": expected true or false, got '" + s + "'");
  }

  /// Sorted `key = value` lines; `parse` reads this back.
  std::string text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace fcntag::cli
