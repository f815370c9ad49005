#pragma once

#include <string>
#include <vector>

#include "tagforge/corpus.hpp"

namespace tagforge::prompts {

// Raw templates, frozen byte-for-byte (golden files under tests/golden pin
// them). Slots: {instruction}, {query}, {tags}, {tag}, {instructions},
// <query-to-tag>, <tagging-results>.
const std::string& tagging_template();
const std::string& precision_judge_template();
const std::string& consistency_judge_template();
const std::string& distill_template();

// Substitutes the first occurrence of the slot literally; braces inside the
// substituted text are left untouched.
std::string render_tagging_prompt(const std::string& instruction);

// tags are numbered "[tag i]: <tag>" lines, i from 0.
std::string render_precision_prompt(const std::string& query,
                                    const std::vector<std::string>& tags);

// instructions are numbered "[instruction i]: <text>" lines, i from 0.
std::string render_consistency_prompt(const std::string& tag,
                                      const std::vector<std::string>& instructions);

// One distillation record: the fixed instruction text with the query at
// <query-to-tag> and the JSON tag+explanation list at <tagging-results>.
std::string render_distill_text(const std::string& query,
                                const std::vector<TagAnnotation>& tags);

}  // namespace tagforge::prompts
