#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fastertucker {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. line() is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class BuildError : public Error {
 public:
  using Error::Error;
};

class OracleCapacityError : public Error {
 public:
  using Error::Error;
};

class StaleCacheError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, std::size_t mode, const std::string& what)
      : Error("diverged at epoch " + std::to_string(epoch) + ", mode " +
              std::to_string(mode + 1) + ": " + what),
        epoch_(epoch),
        mode_(mode) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t mode() const noexcept { return mode_; }

 private:
  std::size_t epoch_;
  std::size_t mode_;
};

}  // namespace fastertucker
