#pragma once

#include <string>
#include <vector>

#include "frameloom/annotation.hpp"
#include "frameloom/codebook.hpp"

namespace fltest {

const frameloom::ValueDomain& yes_no_domain();
const frameloom::ValueDomain& valence_domain();
const frameloom::ValueDomain& count_domain();

struct ParseCase {
  const frameloom::ValueDomain* domain;
  const char* raw;
  frameloom::ParseStatus status;
  const char* value;  // nullptr when unparseable
};

// Hand-labelled raw model answers.
const std::vector<ParseCase>& parse_corpus();

struct AgreeingExplanation {
  const frameloom::ValueDomain* domain;
  std::string annotation;
  std::string explanation;  // opens with the annotation value
};

// Explanations whose first sentence restates the annotation, padded with
// filler that mentions other values later on.
std::vector<AgreeingExplanation> agreeing_explanations(int n, unsigned seed);

}  // namespace fltest
