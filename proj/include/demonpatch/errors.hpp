#pragma once

#include <stdexcept>
#include <string>

namespace demonpatch {

// Error categories map one-to-one onto the CLI exit codes.
enum class ErrorKind { io = 2, dimension = 3, usage = 4, format = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& what)
      : Error(ErrorKind::dimension, what) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& what)
      : Error(ErrorKind::format, what) {}
};

}  // namespace demonpatch
