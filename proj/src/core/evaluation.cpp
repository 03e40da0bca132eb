#include "frameloom/evaluation.hpp"

#include <cstdio>
#include <sstream>

#include "frameloom/error.hpp"
#include "frameloom/util.hpp"

using nlohmann::json;

namespace frameloom {

RaterSet rater_set_from_records(const std::string& rater_id,
                                const std::vector<AnnotationRecord>& records) {
  RaterSet rs;
  rs.rater_id = rater_id;
  for (const auto& r : records) {
    if (r.rater_id != rater_id) continue;
    rs.set(r.unit_id, r.code_id,
           r.parsed.status == ParseStatus::Unparseable ? std::nullopt : r.parsed.value);
  }
  return rs;
}

int64_t percent_hundredths(int64_t n_agree, int64_t n_units) {
  if (n_units <= 0) throw Error(ErrorCode::NoOverlap, "empty denominator");
  return (20000 * n_agree + n_units) / (2 * n_units);
}

std::string format_percent(int64_t hundredths) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(hundredths / 100),
                static_cast<long long>(hundredths % 100));
  return buf;
}

namespace {

bool same_value(const std::optional<std::string>& a, const std::optional<std::string>& b) {
  return a && b && *a == *b;
}

}  // namespace

Agreement percentage_agreement(const RaterSet& a, const RaterSet& b, const std::string& code_id) {
  Agreement out;
  for (const auto& [key, value] : a.records) {
    if (key.second != code_id) continue;
    auto it = b.records.find(key);
    if (it == b.records.end()) continue;
    ++out.n_units;
    if (same_value(value, it->second)) ++out.n_agree;
  }
  if (out.n_units == 0) {
    throw Error(ErrorCode::NoOverlap, "raters '" + a.rater_id + "' and '" + b.rater_id +
                                          "' share no units for code '" + code_id + "'");
  }
  out.percent_hundredths = percent_hundredths(out.n_agree, out.n_units);
  return out;
}

std::vector<Disagreement> list_disagreements(const RaterSet& a, const RaterSet& b) {
  // std::map iteration already yields (unit_id, code_id) order.
  std::vector<Disagreement> out;
  for (const auto& [key, value] : a.records) {
    auto it = b.records.find(key);
    if (it == b.records.end()) continue;
    if (!same_value(value, it->second)) out.push_back({key.first, key.second, value, it->second});
  }
  return out;
}

json to_json(const Resolution& r) {
  return json{{"unit_id", r.unit_id},
              {"code_id", r.code_id},
              {"value", r.value},
              {"resolver_id", r.resolver_id},
              {"created_at", r.created_at}};
}

Resolution resolution_from_json(const json& j) {
  return Resolution{j.at("unit_id").get<std::string>(), j.at("code_id").get<std::string>(),
                    j.at("value").get<std::string>(), j.value("resolver_id", std::string{}),
                    j.value("created_at", std::string{})};
}

RaterSet GroundTruth::as_rater_set() const {
  RaterSet rs;
  rs.rater_id = kGroundTruthId;
  for (const auto& [key, e] : entries) rs.records[key] = e.value;
  return rs;
}

GroundTruth build_ground_truth(const RaterSet& a, const RaterSet& b,
                               const std::map<UnitCode, Resolution>& resolutions,
                               const Codebook& cb) {
  GroundTruth gt;
  std::vector<UnitCode> missing;
  size_t used = 0;
  for (const auto& [key, value] : a.records) {
    auto it = b.records.find(key);
    if (it == b.records.end()) continue;
    if (same_value(value, it->second)) {
      gt.entries[key] = GroundTruthEntry{*value, Provenance::Agreed, {}};
      continue;
    }
    auto res = resolutions.find(key);
    if (res == resolutions.end()) {
      missing.push_back(key);
      continue;
    }
    ++used;
    const Code* code = cb.find(key.second);
    auto canonical = code ? code->domain.lookup(res->second.value) : std::nullopt;
    if (!canonical) {
      throw Error(ErrorCode::DomainViolation, "resolution value '" + res->second.value +
                                                  "' is outside the domain of code '" +
                                                  key.second + "'");
    }
    gt.entries[key] = GroundTruthEntry{*canonical, Provenance::Reconciled, res->second.resolver_id};
  }
  if (used != resolutions.size()) {
    for (const auto& [key, r] : resolutions) {
      auto ia = a.records.find(key);
      auto ib = b.records.find(key);
      bool is_disagreement = ia != a.records.end() && ib != b.records.end() &&
                             !same_value(ia->second, ib->second);
      if (!is_disagreement) {
        throw Error(ErrorCode::SpuriousResolution, "resolution for unit '" + key.first +
                                                       "', code '" + key.second +
                                                       "' does not match a disagreement");
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " unresolved disagreement(s):";
    for (const auto& [u, c] : missing) msg += " " + u + "/" + c;
    throw Error(ErrorCode::Unresolved, msg);
  }
  return gt;
}

AgreementReport agreement_report(const std::vector<RaterSet>& raters, const GroundTruth* gt,
                                 const Codebook& cb) {
  if (raters.empty() || (raters.size() < 2 && !gt)) {
    throw Error(ErrorCode::InvalidArgument, "report requires a comparison target");
  }
  std::vector<std::pair<const RaterSet*, const RaterSet*>> pairs;
  for (size_t i = 0; i < raters.size(); ++i) {
    for (size_t j = i + 1; j < raters.size(); ++j) pairs.emplace_back(&raters[i], &raters[j]);
  }
  RaterSet truth;
  if (gt) {
    truth = gt->as_rater_set();
    for (const auto& r : raters) pairs.emplace_back(&r, &truth);
  }

  AgreementReport report;
  for (const auto& [a, b] : pairs) report.pair_labels.push_back(a->rater_id + " vs " + b->rater_id);
  for (const auto& code : cb.codes) {
    for (size_t p = 0; p < pairs.size(); ++p) {
      const auto& [a, b] = pairs[p];
      Agreement ag;
      try {
        ag = percentage_agreement(*a, *b, code.id);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NoOverlap) continue;
        throw;
      }
      report.rows.push_back(ReportRow{code.id, report.pair_labels[p], a->rater_id, b->rater_id,
                                      ag.n_units, ag.n_agree, ag.percent_hundredths,
                                      ag.percent_hundredths >= kAcceptableHundredths});
    }
  }
  return report;
}

std::string report_csv(const AgreementReport& report, const Codebook& cb) {
  std::string out =
      "code_type,code_id,code_name,pair,rater_a,rater_b,n_units,n_agree,percent,acceptable\n";
  for (const auto& r : report.rows) {
    const Code& c = cb.at(r.code_id);
    out += std::string(code_type_label(c.type)) + "," + csv_escape(c.id) + "," +
           csv_escape(c.name) + "," + csv_escape(r.pair_label) + "," + csv_escape(r.rater_a) +
           "," + csv_escape(r.rater_b) + "," + std::to_string(r.n_units) + "," +
           std::to_string(r.n_agree) + "," + format_percent(r.percent_hundredths) + "," +
           (r.acceptable ? "true" : "false") + "\n";
  }
  return out;
}

std::string report_markdown(const AgreementReport& report, const Codebook& cb) {
  std::ostringstream out;
  out << "# Intercoder reliability (percentage method)\n\n";
  out << "| Code Type | Code Name |";
  for (const auto& label : report.pair_labels) out << " " << label << " |";
  out << "\n|---|---|";
  for (size_t i = 0; i < report.pair_labels.size(); ++i) out << "---:|";
  out << "\n";
  for (const auto& code : cb.codes) {
    out << "| " << code_type_label(code.type) << " | " << code.name << " |";
    for (const auto& label : report.pair_labels) {
      const ReportRow* row = nullptr;
      for (const auto& r : report.rows) {
        if (r.code_id == code.id && r.pair_label == label) row = &r;
      }
      if (!row) {
        out << " n/a |";
      } else {
        auto pct = format_percent(row->percent_hundredths) + "%";
        if (row->acceptable) pct = "**" + pct + "**";
        out << " " << pct << " (" << row->n_agree << "/" << row->n_units << ") |";
      }
    }
    out << "\n";
  }
  out << "\nPercentages count agreements over units coded by both sides of each pair "
         "(units either side skipped are excluded; unparseable answers never agree). "
         "Bold marks values of at least 75.00%, the acceptability threshold. "
         "Rounded half-up to two decimals.\n";
  return out.str();
}

json to_json(const AgreementReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"code_id", r.code_id},
                    {"pair", r.pair_label},
                    {"rater_a", r.rater_a},
                    {"rater_b", r.rater_b},
                    {"n_units", r.n_units},
                    {"n_agree", r.n_agree},
                    {"percent", format_percent(r.percent_hundredths)},
                    {"acceptable", r.acceptable}});
  }
  return json{{"pairs", report.pair_labels}, {"rows", rows}};
}

}  // namespace frameloom
