#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ngym {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A violated operation precondition (caller bug).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Structural problem in a configuration document. `path` is a dotted JSON
/// path such as `config.agents[1].name`; `offset` is the byte offset for
/// syntax errors.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& message, std::size_t offset = 0)
      : Error(path.empty() ? message : path + ": " + message),
        path_(std::move(path)),
        offset_(offset) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string path_;
  std::size_t offset_;
};

struct Violation {
  std::string path;
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// Raised by parse_config when the document is well-formed but breaks one or
/// more invariants.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Unknown utility_class.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// A utility binding could not be evaluated against an episode.
class UtilityError : public Error {
 public:
  UtilityError(std::string variable, const std::string& message)
      : Error(message), variable_(std::move(variable)) {}

  const std::string& variable() const noexcept { return variable_; }

 private:
  std::string variable_;
};

/// Any failure of a model backend call.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// Transport-level failure after retries were exhausted. `status` is the last
/// HTTP status seen, or 0 when no response was received.
class TransportError : public BackendError {
 public:
  TransportError(const std::string& message, int status, std::string body = {})
      : BackendError(message), status_(status), body_(std::move(body)) {}

  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// Reply body that does not have the expected shape.
class MalformedResponseError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// A structured reply lacked a required key.
class MissingKeyError : public BackendError {
 public:
  explicit MissingKeyError(std::string key)
      : BackendError("structured reply is missing key '" + key + "'"), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class TypedParseError : public Error {
 public:
  TypedParseError(std::string raw, std::string kind)
      : Error("cannot parse '" + raw + "' as " + kind), raw_(std::move(raw)), kind_(std::move(kind)) {}

  const std::string& raw() const noexcept { return raw_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string raw_;
  std::string kind_;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

class StoreError : public Error {
 public:
  using Error::Error;
};

}  // namespace ngym
