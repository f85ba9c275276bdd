#ifndef RLMSAD_ERRORS_HPP_
#define RLMSAD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace rlmsad {

// Failure categories map one-to-one onto CLI exit codes.
enum class ErrorKind { kConfig = 2, kData = 3, kRuntime = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error(ErrorKind::kConfig, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error(ErrorKind::kData, message) {}
};

class RuntimeFailure : public Error {
 public:
  explicit RuntimeFailure(const std::string& message)
      : Error(ErrorKind::kRuntime, message) {}
};

}  // namespace rlmsad

#endif  // RLMSAD_ERRORS_HPP_
