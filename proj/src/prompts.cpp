#include "tagforge/prompts.hpp"

#include <algorithm>
#include <initializer_list>
#include <utility>
#include <vector>

#include "json.hpp"

namespace tagforge::prompts {

namespace {

struct Slot {
  std::size_t pos;
  std::size_t len;
  const std::string* value;
};

// Replaces each slot's first occurrence in the template in one left-to-right
// pass over the original text. Substituted values are never rescanned, so a
// slot token appearing literally inside a value stays untouched.
std::string render_slots(const std::string& tmpl,
                         std::initializer_list<std::pair<const char*, const std::string*>>
                             slots) {
  std::vector<Slot> found;
  for (const auto& [token, value] : slots) {
    const std::size_t pos = tmpl.find(token);
    if (pos != std::string::npos) {
      found.push_back({pos, std::string(token).size(), value});
    }
  }
  std::sort(found.begin(), found.end(), [](const Slot& a, const Slot& b) { return a.pos < b.pos; });
  std::string out;
  std::size_t cursor = 0;
  for (const Slot& s : found) {
    out.append(tmpl, cursor, s.pos - cursor);
    out.append(*s.value);
    cursor = s.pos + s.len;
  }
  out.append(tmpl, cursor, std::string::npos);
  return out;
}

}  // namespace

const std::string& tagging_template() {
  static const std::string t =
      "You are a tagging system that provides useful tags for instruction intentions to "
      "distinguish instructions for a helpful AI assistant. Below is an instruction:\n"
      "\n"
      "[begin]\n"
      "\n"
      "{instruction}\n"
      "\n"
      "[end]\n"
      "\n"
      "Please provide coarse-grained tags, such as \"Spelling and Grammar Check\" and "
      "\"Cosplay\", to identify main intentions of above instruction.\n"
      "Your answer should be a list including titles of tags and a brief explanation of each "
      "tag.\n"
      "Your response have to strictly follow this JSON format: [{\"tag\": str, "
      "\"explanation\": str}].\n"
      "Please response in English.";
  return t;
}

const std::string& precision_judge_template() {
  static const std::string t =
      "You are an experienced judge for intention tags of instructions. You will be provided "
      "a query and a list of tags describing intentions of the query as followed:\n"
      "\n"
      "[query]: {query}\n"
      "\n"
      "{tags}\n"
      "\n"
      "Please provide feedback about whether all tags precisely describe an intention of the "
      "instruction. Please identify all incorrect tags and provide their indices in the JSON "
      "format as your response.\n"
      "The JSON format for your response is a list of JSON dictionary and the JSON dictionary "
      "has only one key to identify the index of each incorrect tag: [{\"idx\": int}].\n"
      "For example, if [tag 0] and [tag 2] are incorrect, you should response as [{\"idx\": "
      "0}, {\"idx\", 2}]. If all tags are correct, please response an empty list as [].";
  return t;
}

const std::string& consistency_judge_template() {
  static const std::string t =
      "You are an experienced judge for consistency of intention tags for instructions. You "
      "will be provided a tag and a list of instructions labeled with this tag as followed:\n"
      "\n"
      "[tag]: {tag}\n"
      "\n"
      "{instructions}\n"
      "\n"
      "Please provide feedback about whether the meaning of this tag is consistent among all "
      "instructions. Please identify all inconsistent instructions and provide their indices "
      "in the JSON format as your response.\n"
      "The JSON format for your response is a list of JSON dictionary: [{\"idx\": int}].\n"
      "For example, if the meaning of tags in [instruction 0] and [instruction 2] are "
      "inconsistent, you should response as [{\"idx\": 0}, {\"idx\": 2}]. If the meaning of "
      "tag is consistent in all instructions, please response an empty list as [].";
  return t;
}

const std::string& distill_template() {
  static const std::string t =
      "You are a helpful assistant. Please identify tags of user intentions in the following "
      "user query and provide an explanation for each tag. Please respond in the JSON format "
      "{\"tag\": str, \"explanation\": str}. Query: <query-to-tag> Assistant: "
      "<tagging-results>";
  return t;
}

std::string render_tagging_prompt(const std::string& instruction) {
  return render_slots(tagging_template(), {{"{instruction}", &instruction}});
}

std::string render_precision_prompt(const std::string& query,
                                    const std::vector<std::string>& tags) {
  std::string tag_block;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (i > 0) tag_block += '\n';
    tag_block += "[tag " + std::to_string(i) + "]: " + tags[i];
  }
  return render_slots(precision_judge_template(), {{"{query}", &query}, {"{tags}", &tag_block}});
}

std::string render_consistency_prompt(const std::string& tag,
                                      const std::vector<std::string>& instructions) {
  std::string block;
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    if (i > 0) block += '\n';
    block += "[instruction " + std::to_string(i) + "]: " + instructions[i];
  }
  return render_slots(consistency_judge_template(),
                      {{"{tag}", &tag}, {"{instructions}", &block}});
}

std::string render_distill_text(const std::string& query,
                                const std::vector<TagAnnotation>& tags) {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const TagAnnotation& a : tags) {
    nlohmann::ordered_json item;
    item["tag"] = a.tag;
    item["explanation"] = a.explanation;
    list.push_back(std::move(item));
  }
  const std::string results = list.dump();
  return render_slots(distill_template(),
                      {{"<query-to-tag>", &query}, {"<tagging-results>", &results}});
}

}  // namespace tagforge::prompts
