#include "frameloom/codebook.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <set>

#include "frameloom/util.hpp"

namespace frameloom {

const char* code_type_name(CodeType t) {
  switch (t) {
    case CodeType::Object: return "object";
    case CodeType::Behavior: return "behavior";
    case CodeType::Genre: return "genre";
    case CodeType::Emotion: return "emotion";
  }
  return "object";
}

const char* code_type_label(CodeType t) {
  switch (t) {
    case CodeType::Object: return "Object";
    case CodeType::Behavior: return "Behavior";
    case CodeType::Genre: return "Genre";
    case CodeType::Emotion: return "Emotion";
  }
  return "Object";
}

std::optional<CodeType> parse_code_type(std::string_view s) {
  auto v = ascii_lower(trim(s));
  if (v == "object") return CodeType::Object;
  if (v == "behavior") return CodeType::Behavior;
  if (v == "genre") return CodeType::Genre;
  if (v == "emotion") return CodeType::Emotion;
  return std::nullopt;
}

std::string canonicalize_value(std::string_view v) { return ascii_lower(trim(v)); }

ValueDomain ValueDomain::categorical(std::vector<std::string> values) {
  return ValueDomain{Kind::Categorical, std::move(values)};
}

ValueDomain ValueDomain::count() { return ValueDomain{Kind::CountNumeric, {}}; }

std::optional<std::string> ValueDomain::lookup(std::string_view v) const {
  if (kind == Kind::CountNumeric) {
    auto t = trim(v);
    if (t.empty() || t.size() > 3) return std::nullopt;
    int n = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), n);
    if (ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
    if (n < kCountMin || n > kCountMax) return std::nullopt;
    return std::to_string(n);
  }
  auto key = canonicalize_value(v);
  for (const auto& a : allowed_values) {
    if (canonicalize_value(a) == key) return a;
  }
  return std::nullopt;
}

bool ValueDomain::is_yes_no() const {
  return is_categorical() && lookup("yes") && lookup("no");
}

const Code* Codebook::find(std::string_view id) const {
  for (const auto& c : codes) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

const Code& Codebook::at(std::string_view id) const {
  if (auto* c = find(id)) return *c;
  throw Error(ErrorCode::NotFound, "unknown code '" + std::string(id) + "'");
}

namespace {

// Field tags let parse-time "missing field" diagnostics suppress the
// corresponding validation diagnostic.
struct TaggedDiagnostic {
  Diagnostic diag;
  std::string field;
};

bool valid_id_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c == '-' || c == '.';
}

std::vector<TaggedDiagnostic> validate_tagged(const Codebook& cb) {
  std::vector<TaggedDiagnostic> out;
  if (cb.codes.empty()) {
    out.push_back({{"", -1, "codebook must contain at least one code"}, "codes"});
  }
  std::set<std::string> seen;
  for (size_t i = 0; i < cb.codes.size(); ++i) {
    const auto& c = cb.codes[i];
    int pos = static_cast<int>(i);
    auto add = [&](std::string msg, std::string field) {
      out.push_back({{c.id, pos, std::move(msg)}, std::move(field)});
    };
    if (c.id.empty()) {
      add("empty id", "id");
    } else {
      if (!std::all_of(c.id.begin(), c.id.end(), valid_id_char)) {
        add("id may only contain letters, digits, '_', '-' and '.'", "id");
      }
      if (!seen.insert(c.id).second) add("duplicate id '" + c.id + "'", "id_dup");
    }
    if (trim(c.name).empty()) add("empty name", "name");
    if (trim(c.definition).empty()) add("empty definition", "definition");
    if (trim(c.question).empty()) add("empty question", "question");
    if (c.prompt_definition && trim(*c.prompt_definition).empty()) {
      add("empty prompt_definition", "prompt_definition");
    }
    if (c.domain.is_categorical()) {
      if (c.domain.allowed_values.size() < 2) {
        add("categorical domain needs \xE2\x89\xA5" "2 values", "values");
      }
      std::set<std::string> canon;
      for (const auto& v : c.domain.allowed_values) {
        if (trim(v).empty()) {
          add("empty value", "values");
        } else if (!canon.insert(canonicalize_value(v)).second) {
          add("duplicate value '" + v + "'", "values");
        }
      }
    } else if (!c.domain.allowed_values.empty()) {
      add("numeric domain must not list values", "values");
    }
  }
  return out;
}

std::string scalar(const YAML::Node& n) { return n.as<std::string>(); }

}  // namespace

std::vector<Diagnostic> validate_codebook(const Codebook& cb) {
  std::vector<Diagnostic> out;
  for (auto& t : validate_tagged(cb)) out.push_back(std::move(t.diag));
  std::stable_sort(out.begin(), out.end(),
                   [](const Diagnostic& a, const Diagnostic& b) { return a.position < b.position; });
  return out;
}

Codebook parse_codebook(std::string_view document) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(document));
  } catch (const YAML::ParserException& e) {
    throw SyntaxError(e.mark.line + 1, e.mark.column + 1, e.msg);
  }

  Codebook cb;
  std::vector<TaggedDiagnostic> diags;
  std::set<std::pair<int, std::string>> missing;

  auto top = [&](std::string msg) { diags.push_back({{"", -1, std::move(msg)}, "top"}); };

  if (!root.IsMap()) {
    top("document must be a mapping with 'version' and 'codes'");
    throw SchemaError({diags.front().diag});
  }
  if (!root["version"]) {
    top("missing field 'version'");
  } else if (!root["version"].IsScalar()) {
    top("'version' must be a scalar");
  } else {
    cb.version = scalar(root["version"]);
    if (cb.version != "1") top("unsupported version '" + cb.version + "'");
  }

  YAML::Node codes = root["codes"];
  if (codes && !codes.IsSequence() && !codes.IsNull()) {
    top("'codes' must be a list");
  } else if (codes && codes.IsSequence()) {
    int pos = 0;
    for (const auto& node : codes) {
      Code c;
      auto add = [&](std::string msg, std::string field) {
        diags.push_back({{c.id, pos, std::move(msg)}, std::move(field)});
      };
      if (!node.IsMap()) {
        add("code entry must be a mapping", "entry");
        cb.codes.push_back(std::move(c));
        ++pos;
        continue;
      }
      auto text = [&](const char* key, std::string& dst) {
        auto v = node[key];
        if (!v) {
          missing.insert({pos, key});
          add(std::string("missing field '") + key + "'", key);
        } else if (!v.IsScalar()) {
          missing.insert({pos, key});
          add(std::string("field '") + key + "' must be a string", key);
        } else {
          dst = scalar(v);
        }
      };
      text("id", c.id);
      // Diagnostics recorded before the id was read still name the code.
      for (auto& d : diags) {
        if (d.diag.position == pos) d.diag.code_id = c.id;
      }
      std::string type;
      text("type", type);
      if (node["type"] && node["type"].IsScalar()) {
        if (auto t = parse_code_type(type)) {
          c.type = *t;
        } else {
          add("unknown type '" + type + "' (expected object|behavior|genre|emotion)", "type");
        }
      }
      text("name", c.name);
      text("definition", c.definition);
      text("question", c.question);
      if (auto pd = node["prompt_definition"]) {
        if (pd.IsScalar()) {
          c.prompt_definition = scalar(pd);
        } else {
          add("field 'prompt_definition' must be a string", "prompt_definition");
        }
      }

      auto values = node["values"];
      auto numeric = node["numeric"];
      if (values && numeric) {
        missing.insert({pos, "values"});
        add("code must have either 'values' or 'numeric', not both", "values");
      } else if (!values && !numeric) {
        missing.insert({pos, "values"});
        add("missing field 'values' or 'numeric'", "values");
      } else if (numeric) {
        if (!numeric.IsScalar() || scalar(numeric) != "count") {
          add("'numeric' must be 'count'", "values");
        }
        c.domain = ValueDomain::count();
      } else if (!values.IsSequence()) {
        missing.insert({pos, "values"});
        add("'values' must be a list", "values");
      } else {
        c.domain.kind = ValueDomain::Kind::Categorical;
        for (const auto& v : values) {
          if (!v.IsScalar()) {
            add("allowed values must be strings", "values");
            continue;
          }
          c.domain.allowed_values.push_back(scalar(v));
        }
      }
      cb.codes.push_back(std::move(c));
      ++pos;
    }
  }

  for (auto& t : validate_tagged(cb)) {
    if (missing.count({t.diag.position, t.field})) continue;
    diags.push_back(std::move(t));
  }
  if (!diags.empty()) {
    std::vector<Diagnostic> out;
    for (auto& t : diags) out.push_back(std::move(t.diag));
    std::stable_sort(out.begin(), out.end(), [](const Diagnostic& a, const Diagnostic& b) {
      return a.position < b.position;
    });
    throw SchemaError(std::move(out));
  }
  return cb;
}

Codebook load_codebook(const std::string& path) { return parse_codebook(read_file(path)); }

std::string serialize_codebook(const Codebook& cb) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "version" << YAML::Value << YAML::DoubleQuoted << cb.version;
  out << YAML::Key << "codes" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : cb.codes) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << YAML::DoubleQuoted << c.id;
    out << YAML::Key << "type" << YAML::Value << code_type_name(c.type);
    out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << c.name;
    out << YAML::Key << "definition" << YAML::Value << YAML::DoubleQuoted << c.definition;
    if (c.prompt_definition) {
      out << YAML::Key << "prompt_definition" << YAML::Value << YAML::DoubleQuoted
          << *c.prompt_definition;
    }
    out << YAML::Key << "question" << YAML::Value << YAML::DoubleQuoted << c.question;
    if (c.domain.is_categorical()) {
      out << YAML::Key << "values" << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (const auto& v : c.domain.allowed_values) out << YAML::DoubleQuoted << v;
      out << YAML::EndSeq;
    } else {
      out << YAML::Key << "numeric" << YAML::Value << "count";
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace frameloom
