#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "frameloom/error.hpp"

namespace frameloom {

enum class CodeType { Object, Behavior, Genre, Emotion };

const char* code_type_name(CodeType t);   // "object", ...
const char* code_type_label(CodeType t);  // "Object", ...
std::optional<CodeType> parse_code_type(std::string_view s);

// Count answers accepted for numeric codes.
inline constexpr int kCountMin = 0;
inline constexpr int kCountMax = 999;

struct ValueDomain {
  enum class Kind { Categorical, CountNumeric };

  Kind kind = Kind::Categorical;
  // Display form, author casing preserved. Empty for CountNumeric.
  std::vector<std::string> allowed_values;

  static ValueDomain categorical(std::vector<std::string> values);
  static ValueDomain count();

  bool is_categorical() const { return kind == Kind::Categorical; }

  // Display form of the allowed value matching v under canonicalization,
  // or the canonical decimal form for a count in range.
  std::optional<std::string> lookup(std::string_view v) const;

  // True when the domain contains both "Yes" and "No".
  bool is_yes_no() const;

  bool operator==(const ValueDomain&) const = default;
};

// Trim surrounding whitespace and fold case; used for uniqueness checks and
// value lookup. Idempotent.
std::string canonicalize_value(std::string_view v);

struct Code {
  std::string id;
  CodeType type = CodeType::Object;
  std::string name;
  std::string definition;
  std::string question;
  ValueDomain domain;
  // Overrides the definition sentence in compiled prompts when the prompt
  // phrasing differs from the table wording.
  std::optional<std::string> prompt_definition;

  const std::string& definition_for_prompt() const {
    return prompt_definition ? *prompt_definition : definition;
  }

  bool operator==(const Code&) const = default;
};

struct Codebook {
  std::string version = "1";
  std::vector<Code> codes;

  const Code* find(std::string_view id) const;
  const Code& at(std::string_view id) const;  // throws NotFound

  bool operator==(const Codebook&) const = default;
};

// Throws SyntaxError (with line/column) or SchemaError carrying every
// diagnostic found.
Codebook parse_codebook(std::string_view document);
Codebook load_codebook(const std::string& path);

// Empty iff every invariant holds. Ordered by code position.
std::vector<Diagnostic> validate_codebook(const Codebook& cb);

std::string serialize_codebook(const Codebook& cb);

}  // namespace frameloom
