#pragma once

#include <string>
#include <vector>

#include "frameloom/codebook.hpp"

namespace frameloom {

inline constexpr const char* kExplanationClause = "Please answer this question with an explanation.";
inline constexpr const char* kCountCommand = "Please only respond with Arabic numerals.";

struct PromptPair {
  std::string code_id;
  std::string annotation_prompt;
  std::string explanation_prompt;
};

// "Please only respond 'A', 'B', or 'C'." with each value single-quoted
// (embedded quotes doubled). Two values render as "'A' or 'B'".
std::string render_value_command(const ValueDomain& vd);

// "<definition> <question> <value command>"
std::string compile_annotation_prompt(const Code& c);

// "<definition> <question> Please answer this question with an explanation."
std::string compile_explanation_prompt(const Code& c);

PromptPair compile_prompt_pair(const Code& c);
std::vector<PromptPair> compile_prompts(const Codebook& cb);

}  // namespace frameloom
