#pragma once

#include <stdexcept>
#include <string>

namespace nuwa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (trace files, wire messages).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " at line " + std::to_string(line) : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Violation of the RL environment protocol (bad action, step after done).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Metric that is mathematically undefined for the given input.
class UndefinedError : public Error {
 public:
  using Error::Error;
};

}  // namespace nuwa
