#include "tagforge/normalizer.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tagforge/cluster.hpp"
#include "tagforge/error.hpp"
#include "tagforge/stemmer.hpp"
#include "tagforge/util.hpp"

namespace tagforge {

using ordered_json = nlohmann::ordered_json;

std::map<std::string, std::uint64_t> tag_frequencies(const Dataset& dataset) {
  std::map<std::string, std::uint64_t> freq;
  for (const Session& s : dataset.sessions) {
    for (const Query& q : s.queries) {
      if (!q.raw_tags) continue;
      for (const TagAnnotation& a : *q.raw_tags) ++freq[trim(a.tag)];
    }
  }
  freq.erase("");
  return freq;
}

std::map<std::string, std::uint64_t> frequency_filter(
    const std::map<std::string, std::uint64_t>& frequencies, std::uint64_t alpha,
    std::vector<std::string>* dropped) {
  std::map<std::string, std::uint64_t> kept;
  for (const auto& [tag, count] : frequencies) {
    if (count >= alpha) {
      kept.emplace(tag, count);
    } else if (dropped != nullptr) {
      dropped->push_back(tag);
    }
  }
  return kept;
}

std::string clean_tag(const std::string& tag) {
  std::string out;
  out.reserve(tag.size());
  bool pending_space = false;
  for (unsigned char c : tag) {
    bool keep;
    char mapped = static_cast<char>(c);
    if (c >= 0x80) {
      keep = true;  // non-ASCII passes through
    } else if (c >= 'A' && c <= 'Z') {
      keep = true;
      mapped = static_cast<char>(c - 'A' + 'a');
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      keep = true;
    } else {
      keep = false;  // every other ASCII byte acts as a separator
    }
    if (keep) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(mapped);
    } else {
      pending_space = true;
    }
  }
  return out;
}

std::string rule_key(const std::string& tag) {
  const std::string cleaned = clean_tag(tag);
  std::string out;
  std::size_t pos = 0;
  while (pos < cleaned.size()) {
    std::size_t end = cleaned.find(' ', pos);
    if (end == std::string::npos) end = cleaned.size();
    const std::string token = cleaned.substr(pos, end - pos);
    if (!token.empty()) {
      if (!out.empty()) out.push_back(' ');
      out += porter_stem(token);
    }
    pos = end + 1;
  }
  return out;
}

RuleAggregationResult rule_aggregate(const std::map<std::string, std::uint64_t>& vocabulary) {
  struct Group {
    std::string best;  // highest count, ties to lexicographically smallest raw
    std::uint64_t best_count = 0;
    std::uint64_t total = 0;
    std::vector<std::string> members;
  };
  std::map<std::string, Group> groups;
  RuleAggregationResult result;

  for (const auto& [raw, count] : vocabulary) {
    const std::string key = rule_key(raw);
    if (key.empty()) {
      result.dropped.push_back(raw);
      continue;
    }
    Group& g = groups[key];
    g.members.push_back(raw);
    g.total += count;
    // map iteration is lex order, so later equal counts never displace.
    if (count > g.best_count) {
      g.best_count = count;
      g.best = raw;
    }
  }

  for (const auto& [key, g] : groups) {
    const std::string canonical = clean_tag(g.best);
    for (const std::string& member : g.members) result.mapping[member] = canonical;
    result.counts[canonical] += g.total;
  }
  return result;
}

std::map<std::string, std::string> semantic_aggregate(
    const std::vector<std::vector<std::string>>& cells,
    const std::map<std::string, std::uint64_t>& counts) {
  std::map<std::string, std::string> mapping;
  for (const auto& cell : cells) {
    if (cell.empty()) continue;
    std::string survivor = cell.front();
    std::uint64_t best = 0;
    for (const std::string& member : cell) {
      auto it = counts.find(member);
      const std::uint64_t c = it == counts.end() ? 0 : it->second;
      // cells are lex-sorted, so strict > keeps the lex-smallest on ties
      if (c > best) {
        best = c;
        survivor = member;
      }
    }
    for (const std::string& member : cell) mapping[member] = survivor;
  }
  return mapping;
}

NormalizeResult normalize(const Dataset& dataset, const NormalizationConfig& config,
                          CachedEmbedder& embedder) {
  NormalizeResult result;
  result.dataset = dataset;
  result.tag_mapping.config = config;

  // Stage 1: frequency filtering.
  const auto freq = tag_frequencies(dataset);
  std::vector<std::string> dropped_rare;
  const auto survivors = frequency_filter(freq, config.alpha, &dropped_rare);

  auto& mapping = result.tag_mapping.mapping;
  auto& stage_log = result.tag_mapping.stage_log;
  for (const std::string& tag : dropped_rare) {
    mapping[tag] = std::nullopt;
    stage_log[tag].push_back("frequency_filter");
  }

  // Stage 2: rule aggregation (stemmed keys group, cleaned best member wins).
  const RuleAggregationResult rule_result = rule_aggregate(survivors);
  for (const std::string& tag : rule_result.dropped) {
    mapping[tag] = std::nullopt;
    stage_log[tag].push_back("rule_aggregation");
  }

  // Stage 3: semantic aggregation over the post-rule vocabulary.
  std::vector<std::string> canonical_tags;
  for (const auto& [canonical, count] : rule_result.counts) canonical_tags.push_back(canonical);
  std::map<std::string, std::vector<double>> vectors;
  if (!canonical_tags.empty()) {
    const auto embedded = embedder.embed(canonical_tags);
    for (std::size_t i = 0; i < canonical_tags.size(); ++i) {
      vectors[canonical_tags[i]] = embedded[i];
    }
  }
  ClusterConfig cluster_config;
  cluster_config.eps = config.eps;
  cluster_config.min_pts = config.min_pts;
  const auto cells = semantic_cluster(vectors, cluster_config);
  const auto semantic_map = semantic_aggregate(cells, rule_result.counts);

  for (const auto& [raw, canonical] : rule_result.mapping) {
    const std::string& final_tag = semantic_map.at(canonical);
    mapping[raw] = final_tag;
    if (canonical != raw) stage_log[raw].push_back("rule_aggregation");
    if (final_tag != canonical) stage_log[raw].push_back("semantic_aggregation");
  }
  // Idempotence: every output value maps to itself, even when the same
  // surface form also occurred as a raw tag that an earlier stage dropped —
  // the surviving vocabulary entry wins.
  std::vector<std::string> outputs;
  for (const auto& [raw, value] : mapping) {
    if (value) {
      auto it = mapping.find(*value);
      if (it == mapping.end() || it->second != *value) outputs.push_back(*value);
    }
  }
  for (const std::string& v : outputs) {
    mapping[v] = v;
    stage_log.erase(v);
  }

  // Rewrite queries with the composed mapping.
  for (Session& s : result.dataset.sessions) {
    for (Query& q : s.queries) {
      if (!q.raw_tags) continue;
      std::vector<std::string> tags;
      std::set<std::string> seen;
      for (const TagAnnotation& a : *q.raw_tags) {
        const std::string raw = trim(a.tag);
        auto it = mapping.find(raw);
        if (it == mapping.end() || !it->second) continue;
        if (seen.insert(*it->second).second) tags.push_back(*it->second);
      }
      q.normalized_tags = std::move(tags);
    }
  }

  // Stage 4: association aggregation over per-query tag sets.
  std::vector<std::vector<std::string>> transactions;
  for (const Session& s : result.dataset.sessions) {
    for (const Query& q : s.queries) {
      if (q.normalized_tags && !q.normalized_tags->empty()) {
        transactions.push_back(*q.normalized_tags);
      }
    }
  }
  result.tag_mapping.rules =
      mine_association_rules(transactions, config.min_support, config.min_confidence);
  association_aggregate(result.dataset, result.tag_mapping.rules);

  for (const Session& s : result.dataset.sessions) {
    for (const Query& q : s.queries) {
      if (q.normalized_tags && q.normalized_tags->empty()) ++result.queries_with_empty_tags;
    }
  }

  result.stage_sizes = {
      {"input", freq.size()},
      {"frequency_filter", survivors.size()},
      {"rule_aggregation", rule_result.counts.size()},
      {"semantic_aggregation", cells.size()},
      {"association_aggregation", dataset_tag_set(result.dataset).size()},
  };
  return result;
}

std::string mapping_to_json(const TagMapping& mapping) {
  ordered_json j;
  j["mapping"] = ordered_json::object();
  for (const auto& [raw, value] : mapping.mapping) {
    if (value) {
      j["mapping"][raw] = *value;
    } else {
      j["mapping"][raw] = nullptr;
    }
  }
  j["rules"] = ordered_json::array();
  for (const AssociationRule& r : mapping.rules) {
    ordered_json rule;
    rule["antecedent"] = r.antecedent;
    rule["consequent"] = r.consequent;
    rule["support"] = r.support;
    rule["confidence"] = r.confidence;
    j["rules"].push_back(std::move(rule));
  }
  j["config"] = {{"alpha", mapping.config.alpha},
                 {"eps", mapping.config.eps},
                 {"min_pts", mapping.config.min_pts},
                 {"min_support", mapping.config.min_support},
                 {"min_confidence", mapping.config.min_confidence}};
  return j.dump(2) + "\n";
}

TagMapping mapping_from_json(const std::string& json_text) {
  ordered_json j = ordered_json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("mapping") || !j.contains("rules") ||
      !j.contains("config")) {
    throw SchemaError("tag mapping JSON must contain mapping, rules and config");
  }
  TagMapping out;
  for (const auto& [raw, value] : j["mapping"].items()) {
    if (value.is_null()) {
      out.mapping[raw] = std::nullopt;
    } else if (value.is_string()) {
      out.mapping[raw] = value.get<std::string>();
    } else {
      throw SchemaError("mapping values must be strings or null");
    }
  }
  for (const auto& r : j["rules"]) {
    AssociationRule rule;
    rule.antecedent = r.at("antecedent").get<std::vector<std::string>>();
    rule.consequent = r.at("consequent").get<std::vector<std::string>>();
    rule.support = r.at("support").get<std::uint64_t>();
    rule.confidence = r.at("confidence").get<double>();
    out.rules.push_back(std::move(rule));
  }
  const auto& c = j["config"];
  out.config.alpha = c.at("alpha").get<std::uint64_t>();
  out.config.eps = c.at("eps").get<double>();
  out.config.min_pts = c.at("min_pts").get<int>();
  out.config.min_support = c.at("min_support").get<std::uint64_t>();
  out.config.min_confidence = c.at("min_confidence").get<double>();
  return out;
}

}  // namespace tagforge
