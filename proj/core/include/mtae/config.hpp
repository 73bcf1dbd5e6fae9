#pragma once

#include <map>
#include <set>
#include <string>

#include "mtae/common.hpp"

namespace mtae {

// Flat `key = value` run configuration. Precedence: set() overrides (the
// command line) beat file values beat the defaults baked into each getter.
class RunConfig {
 public:
  RunConfig() = default;

  // Blank lines and lines starting with '#' are skipped; a key may appear
  // only once.
  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text,
                             const std::string& origin);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  u64 get_u64(const std::string& key, u64 fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Rejects any present key outside `allowed` (each command declares its
  // vocabulary up front).
  void restrict_keys(const std::set<std::string>& allowed) const;

  // Sorted `key = value` lines; what every run writes next to its outputs.
  std::string serialize() const;

 private:
  std::map<std::string, std::string> values_;

  const std::string* find(const std::string& key) const;
};

}  // namespace mtae
