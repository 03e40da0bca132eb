#include "frameloom/annotation.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "frameloom/error.hpp"
#include "frameloom/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace frameloom {

const char* parse_status_name(ParseStatus s) {
  switch (s) {
    case ParseStatus::Exact: return "exact";
    case ParseStatus::Normalized: return "normalized";
    case ParseStatus::Unparseable: return "unparseable";
  }
  return "unparseable";
}

ParseStatus parse_status_from_name(std::string_view s) {
  if (s == "exact") return ParseStatus::Exact;
  if (s == "normalized") return ParseStatus::Normalized;
  if (s == "unparseable") return ParseStatus::Unparseable;
  throw Error(ErrorCode::InvalidArgument, "unknown parse status '" + std::string(s) + "'");
}

namespace {

// Whitespace, then at most one terminal period, then whitespace again.
std::string_view exact_form(std::string_view raw) {
  auto t = trim(raw);
  if (!t.empty() && t.back() == '.') t = trim(t.substr(0, t.size() - 1));
  return t;
}

bool starts_with_any(std::string_view s, const std::vector<std::string_view>& prefixes,
                     size_t& len) {
  for (auto p : prefixes) {
    if (s.starts_with(p)) {
      len = p.size();
      return true;
    }
  }
  return false;
}

bool ends_with_any(std::string_view s, const std::vector<std::string_view>& suffixes,
                   size_t& len) {
  for (auto p : suffixes) {
    if (s.ends_with(p)) {
      len = p.size();
      return true;
    }
  }
  return false;
}

// Strips whitespace, periods and quote marks (ASCII and typographic) from
// both ends until nothing more comes off.
std::string_view strip_decoration(std::string_view s) {
  static const std::vector<std::string_view> marks = {
      " ", "\t", "\r", "\n", ".", "'", "\"", "`",
      "\xE2\x80\x98", "\xE2\x80\x99", "\xE2\x80\x9C", "\xE2\x80\x9D"};
  size_t len = 0;
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    if (starts_with_any(s, marks, len)) {
      s.remove_prefix(len);
      changed = true;
    }
    if (!s.empty() && ends_with_any(s, marks, len)) {
      s.remove_suffix(len);
      changed = true;
    }
  }
  return s;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

struct IntToken {
  size_t pos;
  std::string_view text;
  bool negative;
};

// Maximal digit runs not glued to letters or other digits.
std::vector<IntToken> integer_tokens(std::string_view s) {
  std::vector<IntToken> out;
  size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i])) {
      ++i;
      continue;
    }
    size_t start = i;
    while (i < s.size() && is_digit(s[i])) ++i;
    bool left_ok = start == 0 || !is_word_byte(static_cast<unsigned char>(s[start - 1]));
    bool right_ok = i == s.size() || !is_word_byte(static_cast<unsigned char>(s[i]));
    if (left_ok && right_ok) {
      out.push_back({start, s.substr(start, i - start), start > 0 && s[start - 1] == '-'});
    }
  }
  return out;
}

std::optional<int> count_value(const IntToken& t) {
  if (t.negative || t.text.size() > 6) return std::nullopt;
  int n = 0;
  std::from_chars(t.text.data(), t.text.data() + t.text.size(), n);
  if (n < kCountMin || n > kCountMax) return std::nullopt;
  return n;
}

bool is_canonical_count(std::string_view s) {
  if (s.empty() || s.size() > 3) return false;
  if (!std::all_of(s.begin(), s.end(), is_digit)) return false;
  return s.size() == 1 || s[0] != '0';
}

}  // namespace

std::optional<std::string> match_normalized(std::string_view raw, const ValueDomain& vd) {
  if (!vd.is_categorical()) {
    auto tokens = integer_tokens(raw);
    if (tokens.size() != 1) return std::nullopt;
    auto n = count_value(tokens.front());
    if (!n) return std::nullopt;
    return std::to_string(*n);
  }

  auto stripped = ascii_lower(strip_decoration(raw));
  for (const auto& v : vd.allowed_values) {
    if (!stripped.empty() && stripped == ascii_lower(strip_decoration(v))) return v;
  }
  const std::string* found = nullptr;
  for (const auto& v : vd.allowed_values) {
    auto needle = trim(v);
    if (find_whole_word(raw, needle, /*case_insensitive=*/true) != std::string_view::npos) {
      if (found) return std::nullopt;
      found = &v;
    }
  }
  if (found) return *found;
  return std::nullopt;
}

ParsedValue parse_value(std::string_view raw, const ValueDomain& vd) {
  ParsedValue out;
  out.raw = std::string(raw);
  auto ef = exact_form(raw);
  if (vd.is_categorical()) {
    for (const auto& v : vd.allowed_values) {
      if (ef == v) {
        out.status = ParseStatus::Exact;
        out.value = v;
        return out;
      }
    }
  } else if (is_canonical_count(ef)) {
    out.status = ParseStatus::Exact;
    out.value = std::string(ef);
    return out;
  }
  if (auto v = match_normalized(raw, vd)) {
    out.status = ParseStatus::Normalized;
    out.value = std::move(v);
    return out;
  }
  out.status = ParseStatus::Unparseable;
  return out;
}

std::string_view first_sentence(std::string_view text) {
  text = trim(text);
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
      return text.substr(0, i + 1);
    }
  }
  return text;
}

std::optional<std::string> leading_stance(std::string_view explanation, const ValueDomain& vd) {
  auto sentence = first_sentence(explanation);
  if (!vd.is_categorical()) {
    for (const auto& t : integer_tokens(sentence)) {
      if (auto n = count_value(t)) return std::to_string(*n);
    }
    return std::nullopt;
  }

  size_t best_pos = std::string_view::npos;
  size_t best_len = 0;
  const std::string* best = nullptr;
  for (const auto& v : vd.allowed_values) {
    auto needle = trim(v);
    auto pos = find_whole_word(sentence, needle, /*case_insensitive=*/false);
    if (pos == std::string_view::npos) continue;
    if (pos < best_pos || (pos == best_pos && needle.size() > best_len)) {
      best_pos = pos;
      best_len = needle.size();
      best = &v;
    }
  }
  if (best_pos != 0 && vd.is_yes_no()) {
    // Sentence-initial yes/no in any casing.
    size_t end = 0;
    while (end < sentence.size() && is_word_byte(static_cast<unsigned char>(sentence[end]))) ++end;
    auto word = ascii_lower(sentence.substr(0, end));
    if (word == "yes" || word == "no") return vd.lookup(word);
  }
  if (best) return *best;
  return std::nullopt;
}

bool detect_conflict(const ParsedValue& parsed, std::string_view explanation,
                     const ValueDomain& vd) {
  if (parsed.status == ParseStatus::Unparseable || !parsed.value) return false;
  if (trim(explanation).empty()) return false;
  auto stance = leading_stance(explanation, vd);
  if (!stance) return false;
  return canonicalize_value(*stance) != canonicalize_value(*parsed.value);
}

// ---- records ---------------------------------------------------------------

json to_json(const AnnotationRecord& r) {
  return json{{"unit_id", r.unit_id},
              {"code_id", r.code_id},
              {"rater_id", r.rater_id},
              {"status", parse_status_name(r.parsed.status)},
              {"value", r.parsed.value ? json(*r.parsed.value) : json(nullptr)},
              {"raw", r.parsed.raw},
              {"explanation", r.explanation ? json(*r.explanation) : json(nullptr)},
              {"conflict", r.conflict},
              {"created_at", r.created_at}};
}

AnnotationRecord annotation_from_json(const json& j) {
  AnnotationRecord r;
  r.unit_id = j.at("unit_id").get<std::string>();
  r.code_id = j.at("code_id").get<std::string>();
  r.rater_id = j.at("rater_id").get<std::string>();
  r.parsed.status = parse_status_from_name(j.at("status").get<std::string>());
  if (j.contains("value") && !j["value"].is_null()) r.parsed.value = j["value"].get<std::string>();
  r.parsed.raw = j.value("raw", std::string{});
  if (j.contains("explanation") && !j["explanation"].is_null()) {
    r.explanation = j["explanation"].get<std::string>();
  }
  r.conflict = j.value("conflict", false);
  r.created_at = j.value("created_at", std::string{});
  return r;
}

AnnotationStore::AnnotationStore(fs::path path, Codebook codebook)
    : codebook_(std::move(codebook)), file_(std::move(path)) {
  refresh();
}

void AnnotationStore::apply(const json& line, size_t line_no) {
  std::lock_guard lock(mu_);
  RecordKey key{line.at("unit_id").get<std::string>(), line.at("code_id").get<std::string>(),
                line.at("rater_id").get<std::string>()};
  if (line.value("deleted", false)) {
    live_.erase(key);
  } else {
    live_[key] = {line_no, annotation_from_json(line)};
  }
}

void AnnotationStore::refresh() {
  file_.read_new([this](const json& l, size_t n) { apply(l, n); });
}

void AnnotationStore::check(const AnnotationRecord& rec) const {
  if (rec.unit_id.empty() || rec.code_id.empty() || rec.rater_id.empty()) {
    throw Error(ErrorCode::InvalidArgument, "record needs unit_id, code_id and rater_id");
  }
  const Code* code = codebook_.find(rec.code_id);
  if (!code) throw Error(ErrorCode::NotFound, "unknown code '" + rec.code_id + "'");
  const auto& p = rec.parsed;
  if (p.status == ParseStatus::Unparseable) {
    if (p.value) throw Error(ErrorCode::InvalidArgument, "unparseable record must not carry a value");
  } else {
    if (!p.value) throw Error(ErrorCode::InvalidArgument, "parsed record needs a value");
    auto canonical = code->domain.lookup(*p.value);
    if (!canonical || *canonical != *p.value) {
      throw Error(ErrorCode::DomainViolation,
                  "value '" + *p.value + "' is outside the domain of code '" + code->id + "'");
    }
  }
  if (rec.conflict && !rec.explanation) {
    throw Error(ErrorCode::InvalidArgument, "conflict flag requires an explanation");
  }
}

Receipt AnnotationStore::append(const AnnotationRecord& rec, bool overwrite) {
  check(rec);
  AnnotationRecord stored = rec;
  if (stored.created_at.empty()) stored.created_at = utc_now_iso();
  RecordKey key{stored.unit_id, stored.code_id, stored.rater_id};

  bool replaced = false;
  size_t first = file_.transact([this](const json& l, size_t n) { apply(l, n); },
                                [&]() -> std::vector<json> {
                                  std::lock_guard lock(mu_);
                                  if (live_.count(key)) {
                                    if (!overwrite) {
                                      throw Error(ErrorCode::Duplicate,
                                                  "record already exists for unit '" +
                                                      stored.unit_id + "', code '" +
                                                      stored.code_id + "', rater '" +
                                                      stored.rater_id + "'");
                                    }
                                    replaced = true;
                                    return {json{{"deleted", true},
                                                 {"unit_id", stored.unit_id},
                                                 {"code_id", stored.code_id},
                                                 {"rater_id", stored.rater_id},
                                                 {"created_at", stored.created_at}},
                                            to_json(stored)};
                                  }
                                  return {to_json(stored)};
                                });
  return Receipt{replaced ? first + 1 : first};
}

std::vector<AnnotationRecord> AnnotationStore::records() {
  refresh();
  std::lock_guard lock(mu_);
  std::vector<std::pair<size_t, const AnnotationRecord*>> ordered;
  ordered.reserve(live_.size());
  for (const auto& [key, entry] : live_) ordered.emplace_back(entry.first, &entry.second);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<AnnotationRecord> out;
  out.reserve(ordered.size());
  for (const auto& [line, rec] : ordered) out.push_back(*rec);
  return out;
}

std::optional<AnnotationRecord> AnnotationStore::find(std::string_view unit,
                                                      std::string_view code,
                                                      std::string_view rater) {
  refresh();
  std::lock_guard lock(mu_);
  auto it = live_.find(RecordKey{std::string(unit), std::string(code), std::string(rater)});
  if (it == live_.end()) return std::nullopt;
  return it->second.second;
}

std::string export_csv(const std::vector<AnnotationRecord>& records) {
  std::string out = "unit_id,code_id,rater_id,status,value,raw,explanation,conflict,created_at\n";
  for (const auto& r : records) {
    out += csv_escape(r.unit_id) + "," + csv_escape(r.code_id) + "," + csv_escape(r.rater_id) +
           "," + parse_status_name(r.parsed.status) + "," +
           csv_escape(r.parsed.value.value_or("")) + "," + csv_escape(r.parsed.raw) + "," +
           csv_escape(r.explanation.value_or("")) + "," + (r.conflict ? "true" : "false") + "," +
           csv_escape(r.created_at) + "\n";
  }
  return out;
}

}  // namespace frameloom
