#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tagforge/corpus.hpp"
#include "tagforge/embedding.hpp"
#include "tagforge/rules.hpp"

namespace tagforge {

struct NormalizationConfig {
  std::uint64_t alpha = 20;        // minimum raw occurrences to survive filtering
  double eps = 0.05;               // semantic merge radius (cosine distance)
  int min_pts = 2;                 // density threshold, the tag itself counts
  std::uint64_t min_support = 40;  // association rule support floor
  double min_confidence = 0.99;    // association rule confidence floor
};

// Total map over the input vocabulary: raw tag -> normalized tag, or nullopt
// for tags dropped by filtering or an empty rule key. Applying the mapping to
// any of its own output values is the identity.
struct TagMapping {
  std::map<std::string, std::optional<std::string>> mapping;
  // raw tag -> stages that changed it ("frequency_filter", "rule_aggregation",
  // "semantic_aggregation"); untouched tags have no entry.
  std::map<std::string, std::vector<std::string>> stage_log;
  std::vector<AssociationRule> rules;
  NormalizationConfig config;
};

// Occurrences of each trimmed raw tag across all annotated queries.
std::map<std::string, std::uint64_t> tag_frequencies(const Dataset& dataset);

// Keeps tags with count >= alpha. alpha == 0 keeps everything.
std::map<std::string, std::uint64_t> frequency_filter(
    const std::map<std::string, std::uint64_t>& frequencies, std::uint64_t alpha,
    std::vector<std::string>* dropped = nullptr);

// Lowercase (ASCII), non-alphanumeric -> space, collapse space runs, trim.
// Bytes >= 0x80 pass through so non-English tags survive.
std::string clean_tag(const std::string& tag);

// clean_tag, then Porter-stem each pure [a-z] token. Grouping key only; never
// displayed. May be empty (tag had no alphanumeric content).
std::string rule_key(const std::string& tag);

struct RuleAggregationResult {
  // raw tag -> canonical surface form (the cleaned spelling of the group's
  // most frequent member, ties broken by lexicographically smallest raw).
  std::map<std::string, std::string> mapping;
  // canonical -> summed count of all members.
  std::map<std::string, std::uint64_t> counts;
  // tags whose rule key was empty; they map to null downstream.
  std::vector<std::string> dropped;
};

RuleAggregationResult rule_aggregate(const std::map<std::string, std::uint64_t>& vocabulary);

// Collapses each cluster cell to its most frequent member (ties: lex
// smallest). Returns member -> survivor for every clustered tag.
std::map<std::string, std::string> semantic_aggregate(
    const std::vector<std::vector<std::string>>& cells,
    const std::map<std::string, std::uint64_t>& counts);

struct NormalizeResult {
  Dataset dataset;
  TagMapping tag_mapping;
  std::size_t queries_with_empty_tags = 0;  // annotated queries left with no tags
  // Vocabulary size after each stage, starting with the raw input:
  // input, frequency_filter, rule_aggregation, semantic_aggregation,
  // association_aggregation. Non-increasing.
  std::vector<std::pair<std::string, std::size_t>> stage_sizes;
};

// Full four-stage normalization: frequency filter, rule aggregation, semantic
// aggregation (clustering over `embedder` vectors), association aggregation
// (rules mined from per-query tag sets, consequents dropped to fixpoint).
// Populates normalized_tags on every annotated query.
NormalizeResult normalize(const Dataset& dataset, const NormalizationConfig& config,
                          CachedEmbedder& embedder);

// JSON export/import: {"mapping": {raw: str|null}, "rules": [...], "config": {...}}.
std::string mapping_to_json(const TagMapping& mapping);
TagMapping mapping_from_json(const std::string& json_text);

}  // namespace tagforge
