#pragma once

#include <stdexcept>
#include <string>

namespace sstl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed input record or configuration. `where` names the line number
/// or JSON path of the offending element.
class SchemaError : public Error {
 public:
  SchemaError(std::string where, const std::string& what)
      : Error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

class NotTrained : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A required input file does not exist.
class MissingInput : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace sstl
