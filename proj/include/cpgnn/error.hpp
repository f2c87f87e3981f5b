#pragma once

#include <stdexcept>
#include <string>

namespace cpgnn {

// Bad input data or a violated precondition on data (CLI exit code 1).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration or argument value (CLI exit code 2 when it comes from flags).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace cpgnn
