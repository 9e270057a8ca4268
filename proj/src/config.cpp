#include "asdvar/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace asdvar {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')) return false;
  return true;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << source << ":" << line << ": expected 'key = value'";
      throw ConfigError(os.str(), line, "");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (!valid_key(key)) {
      std::ostringstream os;
      os << source << ":" << line << ": invalid key '" << key << "'";
      throw ConfigError(os.str(), line, key);
    }
    if (value.empty()) {
      std::ostringstream os;
      os << source << ":" << line << ": field '" << key << "' has an empty value";
      throw ConfigError(os.str(), line, key);
    }
    if (cfg.entries_.count(key)) {
      std::ostringstream os;
      os << source << ":" << line << ": field '" << key << "' repeated (first on line " << cfg.entries_[key].line
         << ")";
      throw ConfigError(os.str(), line, key);
    }
    cfg.entries_[key] = {value, line};
  }
  return cfg;
}

Config Config::parse_string(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse(in, source);
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'", 0, "");
  return parse(in, path);
}

void Config::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ConfigError("invalid key '" + key + "'", 0, key);
  entries_[key] = {value, 0};
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

void Config::fail(const std::string& key, const std::string& msg) const {
  const auto it = entries_.find(key);
  const int line = it == entries_.end() ? 0 : it->second.line;
  std::ostringstream os;
  os << source_;
  if (line > 0) os << ":" << line;
  os << ": field '" << key << "': " << msg;
  throw ConfigError(os.str(), line, key);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second.value;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second.value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != it->second.value.size() || !std::isfinite(v)) fail(key, "expected a finite number, got '" + it->second.value + "'");
  return v;
}

int Config::get_int(const std::string& key, int fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(it->second.value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != it->second.value.size() || v < -2147483647L || v > 2147483647L)
    fail(key, "expected an integer, got '" + it->second.value + "'");
  return static_cast<int>(v);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!it->second.value.empty() && it->second.value[0] != '-') v = std::stoull(it->second.value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != it->second.value.size()) fail(key, "expected an unsigned integer, got '" + it->second.value + "'");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second.value;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(key, "expected a boolean, got '" + v + "'");
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size() || !std::isfinite(v))
      fail(key, "expected a comma-separated list of numbers, got '" + it->second.value + "'");
    out.push_back(v);
  }
  return out;
}

void Config::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [k, e] : entries_)
    if (!allowed.count(k)) fail(k, "unknown field");
}

void Config::require(const std::string& key) const {
  if (!has(key)) {
    std::ostringstream os;
    os << source_ << ": missing required field '" << key << "'";
    throw ConfigError(os.str(), 0, key);
  }
}

}  // namespace asdvar
