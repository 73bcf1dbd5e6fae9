#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mtae {

using i64 = std::int64_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user input: malformed manifests, out-of-range config values, unknown
// keys. Everything else (shape mismatches etc.) is a plain Error.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

void log_info(const std::string& msg);
void log_warn(const std::string& msg);

}  // namespace mtae
