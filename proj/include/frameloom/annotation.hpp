#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "frameloom/codebook.hpp"
#include "frameloom/jsonl.hpp"

namespace frameloom {

enum class ParseStatus { Exact, Normalized, Unparseable };
const char* parse_status_name(ParseStatus s);
ParseStatus parse_status_from_name(std::string_view s);

struct ParsedValue {
  ParseStatus status = ParseStatus::Unparseable;
  std::optional<std::string> value;  // display form; absent iff Unparseable
  std::string raw;

  bool operator==(const ParsedValue&) const = default;
};

// Matching ladder, first hit wins:
//  1. Exact: raw minus surrounding whitespace and at most one terminal
//     period equals an allowed value (case-sensitive), or is a bare
//     canonical integer 0-999 for counts.
//  2. Normalized: see satisfies_normalized.
//  3. Unparseable.
ParsedValue parse_value(std::string_view raw, const ValueDomain& vd);

// Rule 2 on its own. Categorical: raw stripped of whitespace, periods and
// surrounding quotes equals an allowed value ignoring case, or exactly one
// distinct allowed value occurs as a whole word (case-insensitive).
// Counts: exactly one integer token, and it is a valid count.
std::optional<std::string> match_normalized(std::string_view raw, const ValueDomain& vd);

// First sentence of text: up to the first '.', '!' or '?' followed by
// whitespace or end of text.
std::string_view first_sentence(std::string_view text);

// The explanation's leading stance: the earliest allowed value (display
// form, case-sensitive, whole word) in the first sentence; for Yes/No
// domains a sentence-initial "yes"/"no" in any case also counts. For
// counts, the first integer token.
std::optional<std::string> leading_stance(std::string_view explanation, const ValueDomain& vd);

// True iff a leading stance exists and differs from parsed.value.
bool detect_conflict(const ParsedValue& parsed, std::string_view explanation,
                     const ValueDomain& vd);

struct AnnotationRecord {
  std::string unit_id;
  std::string code_id;
  std::string rater_id;  // coder id or "llm:<model>"
  ParsedValue parsed;
  std::optional<std::string> explanation;
  bool conflict = false;
  std::string created_at;

  bool operator==(const AnnotationRecord&) const = default;
};

inline std::string llm_rater_id(std::string_view model) { return "llm:" + std::string(model); }
inline bool is_llm_rater(std::string_view rater) { return rater.starts_with("llm:"); }

nlohmann::json to_json(const AnnotationRecord& r);
AnnotationRecord annotation_from_json(const nlohmann::json& j);

using RecordKey = std::tuple<std::string, std::string, std::string>;  // unit, code, rater

struct Receipt {
  size_t line = 0;  // 1-based line of the record in the store file
};

// project/annotations.jsonl. Tombstones are {"deleted": true, unit_id,
// code_id, rater_id, created_at}.
class AnnotationStore {
 public:
  AnnotationStore(std::filesystem::path path, Codebook codebook);

  // Throws DuplicateRecord, DomainViolation, InvalidArgument, StoreIoError.
  Receipt append(const AnnotationRecord& rec, bool overwrite = false);

  // Picks up lines written by other processes.
  void refresh();

  // Live records in the order they were appended.
  std::vector<AnnotationRecord> records();
  std::optional<AnnotationRecord> find(std::string_view unit, std::string_view code,
                                       std::string_view rater);

  const Codebook& codebook() const { return codebook_; }
  const std::filesystem::path& path() const { return file_.path(); }

 private:
  void apply(const nlohmann::json& line, size_t line_no);
  void check(const AnnotationRecord& rec) const;

  Codebook codebook_;
  JsonlFile file_;
  std::mutex mu_;
  std::map<RecordKey, std::pair<size_t, AnnotationRecord>> live_;  // key -> (line, record)
};

// One CSV row per live record.
std::string export_csv(const std::vector<AnnotationRecord>& records);

}  // namespace frameloom
