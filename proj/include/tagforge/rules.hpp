#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagforge/corpus.hpp"

namespace tagforge {

// X => Y: whenever every tag in X is present, the tags in Y are (almost)
// always present too, so Y is redundant given X. Sides are sorted, non-empty,
// disjoint. support counts transactions containing X ∪ Y.
struct AssociationRule {
  std::vector<std::string> antecedent;
  std::vector<std::string> consequent;
  std::uint64_t support = 0;
  double confidence = 0.0;

  bool operator==(const AssociationRule&) const = default;
};

// FP-growth over per-query tag sets. Emits every rule X => Y with
// support(X ∪ Y) >= min_support and confidence support(X∪Y)/support(X) >=
// min_confidence, ordered by (support desc, antecedent lex, consequent lex).
// Transactions are deduplicated internally; empty input yields no rules.
std::vector<AssociationRule> mine_association_rules(
    const std::vector<std::vector<std::string>>& transactions, std::uint64_t min_support,
    double min_confidence);

// Applies rules to one tag set: scan rules in mined order; whenever
// antecedent ∪ consequent is contained in the current set, drop the
// consequent tags; repeat passes until a full pass changes nothing (at most
// |tags| passes, since each non-final pass removes a tag). Survivors keep
// their input order.
std::vector<std::string> apply_rules(const std::vector<std::string>& tags,
                                     const std::vector<AssociationRule>& rules);

// apply_rules over every query's normalized tags, in place.
void association_aggregate(Dataset& dataset, const std::vector<AssociationRule>& rules);

}  // namespace tagforge
