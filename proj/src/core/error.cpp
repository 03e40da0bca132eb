#include "frameloom/error.hpp"

#include <sstream>

namespace frameloom {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Syntax: return "SyntaxError";
    case ErrorCode::Schema: return "SchemaError";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Duplicate: return "DuplicateRecord";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::Unresolved: return "UnresolvedDisagreement";
    case ErrorCode::NotADisagreement: return "NotADisagreement";
    case ErrorCode::SpuriousResolution: return "SpuriousResolution";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::ProjectNotInitialized: return "ProjectNotInitialized";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DecoderNotFound: return "DecoderNotFound";
    case ErrorCode::Decode: return "DecodeError";
    case ErrorCode::EmptyVideo: return "EmptyVideo";
    case ErrorCode::MissingCredentials: return "MissingCredentials";
    case ErrorCode::Http: return "HttpError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::CacheMiss: return "CacheMiss";
    case ErrorCode::Io: return "StoreIoError";
    case ErrorCode::Bind: return "BindError";
    case ErrorCode::Integrity: return "IntegrityError";
    case ErrorCode::Internal: return "InternalError";
  }
  return "UnknownError";
}

bool is_environment_error(ErrorCode code) {
  return static_cast<int>(code) >= static_cast<int>(ErrorCode::DecoderNotFound);
}

std::string format_diagnostic(const Diagnostic& d) {
  if (d.position < 0) return d.message;
  std::string where = "#" + std::to_string(d.position + 1);
  if (d.code_id.empty()) return "code " + where + ": " + d.message;
  return "code '" + d.code_id + "' (" + where + "): " + d.message;
}

namespace {

std::string join_diagnostics(const std::vector<Diagnostic>& diags) {
  std::ostringstream out;
  for (size_t i = 0; i < diags.size(); ++i) {
    if (i) out << "; ";
    out << format_diagnostic(diags[i]);
  }
  return out.str();
}

}  // namespace

SchemaError::SchemaError(std::vector<Diagnostic> diagnostics)
    : Error(ErrorCode::Schema, join_diagnostics(diagnostics)),
      diagnostics_(std::move(diagnostics)) {}

SyntaxError::SyntaxError(int line, int column, const std::string& what)
    : Error(ErrorCode::Syntax, "line " + std::to_string(line) + ", column " +
                                   std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

HttpError::HttpError(int status, std::string body_excerpt)
    : Error(ErrorCode::Http,
            "HTTP " + std::to_string(status) + ": " + body_excerpt),
      status_(status),
      body_(std::move(body_excerpt)) {}

}  // namespace frameloom
