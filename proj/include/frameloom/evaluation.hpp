#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "frameloom/annotation.hpp"
#include "frameloom/codebook.hpp"

namespace frameloom {

using UnitCode = std::pair<std::string, std::string>;  // (unit_id, code_id)

inline constexpr const char* kGroundTruthId = "ground-truth";
// Rows at or above this percentage (in hundredths) are acceptable.
inline constexpr int64_t kAcceptableHundredths = 7500;

// One rater's decisions. A nullopt value marks an unparseable answer, which
// never equals anything, itself included.
struct RaterSet {
  std::string rater_id;
  std::map<UnitCode, std::optional<std::string>> records;

  void set(std::string unit_id, std::string code_id, std::optional<std::string> value) {
    records[{std::move(unit_id), std::move(code_id)}] = std::move(value);
  }
};

// Builds one RaterSet per rater from store records, keeping the given order
// of rater ids.
RaterSet rater_set_from_records(const std::string& rater_id,
                                const std::vector<AnnotationRecord>& records);

struct Agreement {
  int64_t n_units = 0;
  int64_t n_agree = 0;
  int64_t percent_hundredths = 0;  // 7980 == 79.80%

  bool operator==(const Agreement&) const = default;
};

// round_half_up(10000 * agree / units), exact integer arithmetic.
int64_t percent_hundredths(int64_t n_agree, int64_t n_units);
std::string format_percent(int64_t hundredths);  // "79.80"

// Denominator: units both raters coded for code_id. Throws NoOverlap.
Agreement percentage_agreement(const RaterSet& a, const RaterSet& b, const std::string& code_id);

struct Disagreement {
  std::string unit_id;
  std::string code_id;
  std::optional<std::string> value_a;  // nullopt = unparseable
  std::optional<std::string> value_b;

  bool operator==(const Disagreement&) const = default;
};

// Jointly coded pairs with unequal values, ordered by (unit_id, code_id).
std::vector<Disagreement> list_disagreements(const RaterSet& a, const RaterSet& b);

struct Resolution {
  std::string unit_id;
  std::string code_id;
  std::string value;
  std::string resolver_id;
  std::string created_at;
};

nlohmann::json to_json(const Resolution& r);
Resolution resolution_from_json(const nlohmann::json& j);

enum class Provenance { Agreed, Reconciled };

struct GroundTruthEntry {
  std::string value;
  Provenance provenance = Provenance::Agreed;
  std::string resolver_id;  // Reconciled only
};

struct GroundTruth {
  std::map<UnitCode, GroundTruthEntry> entries;

  RaterSet as_rater_set() const;
};

// Throws UnresolvedDisagreement (listing missing pairs), SpuriousResolution
// or DomainViolation.
GroundTruth build_ground_truth(const RaterSet& a, const RaterSet& b,
                               const std::map<UnitCode, Resolution>& resolutions,
                               const Codebook& cb);

struct ReportRow {
  std::string code_id;
  std::string pair_label;  // "a vs b"
  std::string rater_a;
  std::string rater_b;
  int64_t n_units = 0;
  int64_t n_agree = 0;
  int64_t percent_hundredths = 0;
  bool acceptable = false;
};

struct AgreementReport {
  std::vector<std::string> pair_labels;  // column order
  std::vector<ReportRow> rows;           // rows with empty denominators omitted
};

// Rows for every (code, rater pair) and every (code, rater vs ground
// truth). Needs two raters, or one rater plus ground truth.
AgreementReport agreement_report(const std::vector<RaterSet>& raters, const GroundTruth* gt,
                                 const Codebook& cb);

std::string report_csv(const AgreementReport& report, const Codebook& cb);
std::string report_markdown(const AgreementReport& report, const Codebook& cb);
nlohmann::json to_json(const AgreementReport& report);

}  // namespace frameloom
