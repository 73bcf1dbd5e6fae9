#include "mtae/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mtae {

namespace {

std::string trim(const std::string& s) {
  size_t first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  size_t last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return from_text(text.str(), path);
}

RunConfig RunConfig::from_text(const std::string& text,
                               const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": empty key");
    if (cfg.values_.count(key) > 0)
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const {
  return values_.count(key) > 0;
}

const std::string* RunConfig::find(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string RunConfig::get_string(const std::string& key,
                                  const std::string& fallback) const {
  const std::string* v = find(key);
  return v == nullptr ? fallback : *v;
}

std::string RunConfig::require_string(const std::string& key) const {
  const std::string* v = find(key);
  if (v == nullptr || v->empty())
    throw ConfigError("missing required config key '" + key + "'");
  return *v;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  if (v == nullptr) return fallback;
  char* end = nullptr;
  double parsed = std::strtod(v->c_str(), &end);
  if (end == v->c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "': expected a number, got '" +
                      *v + "'");
  return parsed;
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  const std::string* v = find(key);
  if (v == nullptr) return fallback;
  char* end = nullptr;
  long parsed = std::strtol(v->c_str(), &end, 10);
  if (end == v->c_str() || *end != '\0' || parsed != static_cast<int>(parsed))
    throw ConfigError("config key '" + key + "': expected an integer, got '" +
                      *v + "'");
  return static_cast<int>(parsed);
}

u64 RunConfig::get_u64(const std::string& key, u64 fallback) const {
  const std::string* v = find(key);
  if (v == nullptr) return fallback;
  char* end = nullptr;
  unsigned long long parsed = std::strtoull(v->c_str(), &end, 10);
  if (end == v->c_str() || *end != '\0' || v->front() == '-')
    throw ConfigError("config key '" + key +
                      "': expected a nonnegative integer, got '" + *v + "'");
  return static_cast<u64>(parsed);
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const std::string* v = find(key);
  if (v == nullptr) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" +
                    *v + "'");
}

void RunConfig::restrict_keys(const std::set<std::string>& allowed) const {
  std::string unknown;
  for (const auto& [key, value] : values_)
    if (allowed.count(key) == 0) unknown += (unknown.empty() ? "" : ", ") + key;
  if (!unknown.empty())
    throw ConfigError("unknown config key(s): " + unknown);
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [key, value] : values_)
    out += key + " = " + value + "\n";
  return out;
}

}  // namespace mtae
