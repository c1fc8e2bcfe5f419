#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cadscene {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value; the message starts with the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key_path, const std::string& what)
      : Error(key_path + ": " + what), key_path_(key_path) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Shape or dimension mismatch between collaborating objects.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Backward pass requested before a matching forward pass.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace cadscene
