#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace frameloom {

// Mirrors fl_status in frameloom.h; keep the numeric values in sync.
enum class ErrorCode : int {
  InvalidArgument = 1,
  Syntax = 2,
  Schema = 3,
  NotFound = 4,
  Duplicate = 5,
  DomainViolation = 6,
  NoOverlap = 7,
  Unresolved = 8,
  NotADisagreement = 9,
  SpuriousResolution = 10,
  Unauthorized = 11,
  ProjectNotInitialized = 12,
  EmptyInput = 13,
  DecoderNotFound = 20,
  Decode = 21,
  EmptyVideo = 22,
  MissingCredentials = 23,
  Http = 24,
  Timeout = 25,
  RateLimited = 26,
  CacheMiss = 27,
  Io = 28,
  Bind = 29,
  Integrity = 30,
  Internal = 99,
};

const char* error_code_name(ErrorCode code);

// True for failures caused by the environment (tools, network, disk)
// rather than by what the user asked for.
bool is_environment_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct Diagnostic {
  std::string code_id;  // empty for codebook-level problems
  int position = -1;    // index into codes, -1 for codebook-level
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

std::string format_diagnostic(const Diagnostic& d);

class SchemaError : public Error {
 public:
  explicit SchemaError(std::vector<Diagnostic> diagnostics);

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(int line, int column, const std::string& what);

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class HttpError : public Error {
 public:
  HttpError(int status, std::string body_excerpt);

  int status() const { return status_; }
  const std::string& body_excerpt() const { return body_; }

 private:
  int status_;
  std::string body_;
};

}  // namespace frameloom
