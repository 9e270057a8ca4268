#pragma once

// Flat key = value configuration files with dotted sections
// (problem.*, solver.*, output.*).  '#' starts a comment; lists are
// comma-separated numbers.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace asdvar {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line, std::string field)
      : std::runtime_error(what), line_(line), field_(std::move(field)) {}
  /// 1-based line number, or 0 when the problem is not tied to a line.
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<config>");
  static Config parse_string(const std::string& text, const std::string& source = "<config>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);
  std::vector<std::string> keys() const;
  const std::string& source() const { return source_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  /// Throws ConfigError for the first key not in the allowed set.
  void require_known(const std::set<std::string>& allowed) const;
  /// Throws ConfigError unless the key is present.
  void require(const std::string& key) const;
  /// Throws ConfigError tagged with the key's line.
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, Entry> entries_;
  std::string source_;
};

}  // namespace asdvar
