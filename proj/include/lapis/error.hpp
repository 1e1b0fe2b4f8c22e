#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lapis {

// Machine-readable categories; the CLI prints them and the HTTP API returns
// them as the error code.
enum class ErrorCode {
  invalid_input,
  parse_error,
  not_found,
  conflict,
  state,
  transport,
  storage,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  bool retryable() const { return code_ == ErrorCode::transport; }

 private:
  ErrorCode code_;
};

struct InvalidInput : Error {
  explicit InvalidInput(const std::string& m) : Error(ErrorCode::invalid_input, m) {}
};

// A malformed record in a line-delimited file. line is 1-based.
struct ParseError : Error {
  ParseError(std::size_t line, const std::string& m)
      : Error(ErrorCode::parse_error, "line " + std::to_string(line) + ": " + m), line(line) {}
  std::size_t line;
};

struct NotFound : Error {
  explicit NotFound(const std::string& m) : Error(ErrorCode::not_found, m) {}
};

struct Conflict : Error {
  explicit Conflict(const std::string& m) : Error(ErrorCode::conflict, m) {}
};

struct StateError : Error {
  explicit StateError(const std::string& m) : Error(ErrorCode::state, m) {}
};

// Provider or generation-service failure. Safe to retry.
struct TransportError : Error {
  explicit TransportError(const std::string& m) : Error(ErrorCode::transport, m) {}
};

struct StorageError : Error {
  explicit StorageError(const std::string& m) : Error(ErrorCode::storage, m) {}
};

}  // namespace lapis
