#include "frameloom/promptgen.hpp"

#include "frameloom/util.hpp"

namespace frameloom {

namespace {

std::string single_quoted(std::string_view v) {
  std::string out = "'";
  for (char c : v) {
    if (c == '\'') out += '\'';
    out += c;
  }
  out += '\'';
  return out;
}

std::string stem(const Code& c) {
  return std::string(trim(c.definition_for_prompt())) + " " + std::string(trim(c.question));
}

}  // namespace

std::string render_value_command(const ValueDomain& vd) {
  if (!vd.is_categorical()) return kCountCommand;

  const auto& values = vd.allowed_values;
  std::string out = "Please only respond ";
  if (values.size() == 2) {
    out += single_quoted(values[0]) + " or " + single_quoted(values[1]);
  } else {
    for (size_t i = 0; i < values.size(); ++i) {
      if (i > 0) out += ", ";
      if (i + 1 == values.size() && values.size() > 1) out += "or ";
      out += single_quoted(values[i]);
    }
  }
  out += ".";
  return out;
}

std::string compile_annotation_prompt(const Code& c) {
  return stem(c) + " " + render_value_command(c.domain);
}

std::string compile_explanation_prompt(const Code& c) {
  return stem(c) + " " + kExplanationClause;
}

PromptPair compile_prompt_pair(const Code& c) {
  return PromptPair{c.id, compile_annotation_prompt(c), compile_explanation_prompt(c)};
}

std::vector<PromptPair> compile_prompts(const Codebook& cb) {
  std::vector<PromptPair> out;
  out.reserve(cb.codes.size());
  for (const auto& c : cb.codes) out.push_back(compile_prompt_pair(c));
  return out;
}

}  // namespace frameloom
