#include "tagforge/rules.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <set>

#include "tagforge/error.hpp"

namespace tagforge {

namespace {

struct FpNode {
  int item = -1;
  std::uint64_t count = 0;
  FpNode* parent = nullptr;
  std::map<int, std::unique_ptr<FpNode>> children;
  FpNode* next = nullptr;  // header chain
};

struct FpTree {
  FpNode root;
  std::map<int, FpNode*> header;       // item -> first node in chain
  std::map<int, std::uint64_t> counts; // item -> total support in this tree
};

void insert_path(FpTree& tree, const std::vector<int>& items, std::uint64_t count) {
  FpNode* node = &tree.root;
  for (int item : items) {
    auto it = node->children.find(item);
    if (it == node->children.end()) {
      auto child = std::make_unique<FpNode>();
      child->item = item;
      child->parent = node;
      child->next = tree.header.count(item) ? tree.header[item] : nullptr;
      tree.header[item] = child.get();
      it = node->children.emplace(item, std::move(child)).first;
    }
    it->second->count += count;
    node = it->second.get();
  }
}

// Builds a tree from (itemset, count) pairs, keeping only items with total
// support >= min_support and ordering each path by (support desc, item asc).
FpTree build_tree(const std::vector<std::pair<std::vector<int>, std::uint64_t>>& rows,
                  std::uint64_t min_support) {
  FpTree tree;
  std::map<int, std::uint64_t> totals;
  for (const auto& [items, count] : rows) {
    for (int item : items) totals[item] += count;
  }
  for (const auto& [item, total] : totals) {
    if (total >= min_support) tree.counts[item] = total;
  }
  for (const auto& [items, count] : rows) {
    std::vector<int> kept;
    for (int item : items) {
      if (tree.counts.count(item)) kept.push_back(item);
    }
    std::sort(kept.begin(), kept.end(), [&](int a, int b) {
      if (tree.counts.at(a) != tree.counts.at(b)) return tree.counts.at(a) > tree.counts.at(b);
      return a < b;
    });
    if (!kept.empty()) insert_path(tree, kept, count);
  }
  return tree;
}

// Standard FP-growth recursion: for every item in the tree, record
// suffix ∪ {item} as frequent, then recurse on its conditional tree.
void mine_tree(const FpTree& tree, std::uint64_t min_support, std::vector<int>& suffix,
               std::map<std::vector<int>, std::uint64_t>& out) {
  for (const auto& [item, support] : tree.counts) {
    std::vector<int> itemset = suffix;
    itemset.push_back(item);
    std::sort(itemset.begin(), itemset.end());
    out[itemset] = support;

    std::vector<std::pair<std::vector<int>, std::uint64_t>> conditional;
    for (FpNode* node = tree.header.at(item); node != nullptr; node = node->next) {
      std::vector<int> path;
      for (FpNode* p = node->parent; p != nullptr && p->item != -1; p = p->parent) {
        path.push_back(p->item);
      }
      std::reverse(path.begin(), path.end());
      if (!path.empty()) conditional.emplace_back(std::move(path), node->count);
    }
    FpTree cond = build_tree(conditional, min_support);
    if (!cond.counts.empty()) {
      suffix.push_back(item);
      mine_tree(cond, min_support, suffix, out);
      suffix.pop_back();
    }
  }
}

}  // namespace

std::vector<AssociationRule> mine_association_rules(
    const std::vector<std::vector<std::string>>& transactions, std::uint64_t min_support,
    double min_confidence) {
  if (min_support == 0) throw ArgumentError("mine_association_rules: min_support must be >= 1");
  if (min_confidence < 0.0 || min_confidence > 1.0) {
    throw ArgumentError("mine_association_rules: min_confidence must be in [0, 1]");
  }

  // Intern tags; deduplicate within each transaction.
  std::map<std::string, int> ids;
  std::vector<std::string> names;
  std::vector<std::pair<std::vector<int>, std::uint64_t>> rows;
  for (const auto& txn : transactions) {
    std::set<int> items;
    for (const std::string& tag : txn) {
      auto it = ids.find(tag);
      if (it == ids.end()) {
        it = ids.emplace(tag, static_cast<int>(names.size())).first;
        names.push_back(tag);
      }
      items.insert(it->second);
    }
    if (!items.empty()) rows.emplace_back(std::vector<int>(items.begin(), items.end()), 1);
  }

  FpTree tree = build_tree(rows, min_support);
  std::map<std::vector<int>, std::uint64_t> frequent;
  std::vector<int> suffix;
  mine_tree(tree, min_support, suffix, frequent);

  std::vector<AssociationRule> rules;
  for (const auto& [itemset, support] : frequent) {
    const std::size_t k = itemset.size();
    if (k < 2 || k >= 31) continue;
    // Every non-empty proper subset is frequent, so its support is recorded.
    for (std::uint32_t mask = 1; mask + 1 < (1u << k); ++mask) {
      std::vector<int> antecedent;
      std::vector<int> consequent;
      for (std::size_t i = 0; i < k; ++i) {
        if (mask & (1u << i)) {
          antecedent.push_back(itemset[i]);
        } else {
          consequent.push_back(itemset[i]);
        }
      }
      const std::uint64_t ant_support = frequent.at(antecedent);
      const double confidence =
          static_cast<double>(support) / static_cast<double>(ant_support);
      if (confidence < min_confidence) continue;
      AssociationRule rule;
      for (int id : antecedent) rule.antecedent.push_back(names[id]);
      for (int id : consequent) rule.consequent.push_back(names[id]);
      std::sort(rule.antecedent.begin(), rule.antecedent.end());
      std::sort(rule.consequent.begin(), rule.consequent.end());
      rule.support = support;
      rule.confidence = confidence;
      rules.push_back(std::move(rule));
    }
  }

  std::sort(rules.begin(), rules.end(), [](const AssociationRule& a, const AssociationRule& b) {
    if (a.support != b.support) return a.support > b.support;
    if (a.antecedent != b.antecedent) return a.antecedent < b.antecedent;
    return a.consequent < b.consequent;
  });
  return rules;
}

std::vector<std::string> apply_rules(const std::vector<std::string>& tags,
                                     const std::vector<AssociationRule>& rules) {
  std::set<std::string> current(tags.begin(), tags.end());
  bool changed = true;
  while (changed) {
    changed = false;
    for (const AssociationRule& rule : rules) {
      auto contains_all = [&](const std::vector<std::string>& side) {
        for (const std::string& t : side) {
          if (!current.count(t)) return false;
        }
        return true;
      };
      if (!contains_all(rule.antecedent) || !contains_all(rule.consequent)) continue;
      for (const std::string& t : rule.consequent) current.erase(t);
      changed = true;
    }
  }
  std::vector<std::string> out;
  for (const std::string& t : tags) {
    if (current.count(t)) {
      out.push_back(t);
      current.erase(t);  // keep first occurrence only
    }
  }
  return out;
}

void association_aggregate(Dataset& dataset, const std::vector<AssociationRule>& rules) {
  for (Session& s : dataset.sessions) {
    for (Query& q : s.queries) {
      if (q.normalized_tags) *q.normalized_tags = apply_rules(*q.normalized_tags, rules);
    }
  }
}

}  // namespace tagforge
