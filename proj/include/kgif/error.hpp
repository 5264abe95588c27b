#pragma once

#include <stdexcept>
#include <string>

namespace kgif {

/// Base of every error the library throws. `kind()` is a stable short tag
/// used by the command-line tool for its one-line error output.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what) : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

private:
  std::string kind_;
};

class DimensionError : public Error {
public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class NumericError : public Error {
public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error("parse", line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class DataError : public Error {
public:
  explicit DataError(const std::string& what) : Error("data", what) {}
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class CheckpointError : public Error {
public:
  explicit CheckpointError(const std::string& what) : Error("checkpoint", what) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

}  // namespace kgif
