#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tagforge/corpus.hpp"
#include "tagforge/embedding.hpp"
#include "tagforge/error.hpp"
#include "tagforge/normalizer.hpp"
#include "test_support.hpp"

using namespace tagforge;

TEST_CASE("clean_tag lowercases, strips punctuation, collapses spaces") {
  CHECK(clean_tag("Information_Retrieval!") == "information retrieval");
  CHECK(clean_tag("  Spelling & Grammar   Check  ") == "spelling grammar check");
  CHECK(clean_tag("C++ (advanced)") == "c advanced");
  CHECK(clean_tag("math-problem") == "math problem");
  CHECK(clean_tag("2d graphics") == "2d graphics");
  CHECK(clean_tag("!!!") == "");
  CHECK(clean_tag("数学") == "数学");  // bytes >= 0x80 pass through
}

TEST_CASE("rule_key stems each alphabetic token") {
  CHECK(rule_key("Information Retrieval") == "inform retriev");
  CHECK(rule_key("information_retrieval") == "inform retriev");
  CHECK(rule_key("infomation retrieve") == "infom retriev");
  CHECK(rule_key("request for information") == "request for inform");
  CHECK(rule_key("specific information request") == "specif inform request");
  CHECK(rule_key("loops") == "loop");
  CHECK(rule_key("2d graphics") == "2d graphic");  // mixed token left unstemmed
  CHECK(rule_key("###") == "");
}

TEST_CASE("tag_frequencies counts trimmed raw tags across annotated queries") {
  Dataset d;
  d.dataset_id = "ds";
  d.sessions.push_back(testsup::raw_session("s1", "q1", {"alpha", "beta"}));
  d.sessions.push_back(testsup::raw_session("s2", "q2", {" alpha ", "  "}));
  Session unannotated;
  unannotated.session_id = "s3";
  unannotated.dataset_id = "ds";
  unannotated.queries.push_back({"q3", 0, std::nullopt, std::nullopt});
  d.sessions.push_back(unannotated);

  const auto freq = tag_frequencies(d);
  REQUIRE(freq.size() == 2);
  CHECK(freq.at("alpha") == 2);  // trimmed merge
  CHECK(freq.at("beta") == 1);
}

TEST_CASE("frequency_filter keeps exactly count >= alpha") {
  std::map<std::string, std::uint64_t> freq = {{"at", 20}, {"below", 19}, {"above", 21}};
  std::vector<std::string> dropped;
  const auto kept = frequency_filter(freq, 20, &dropped);
  CHECK(kept.size() == 2);
  CHECK(kept.count("at") == 1);
  CHECK(kept.count("above") == 1);
  CHECK(dropped == std::vector<std::string>{"below"});
  CHECK(frequency_filter(freq, 0).size() == 3);
}

TEST_CASE("rule_aggregate groups by stem key and keeps the heaviest surface") {
  std::map<std::string, std::uint64_t> vocab = {
      {"Information Retrieval", 30}, {"information_retrieval", 25}, {"mathematics", 7},
      {"!!!", 5}};
  const auto result = rule_aggregate(vocab);
  CHECK(result.mapping.at("Information Retrieval") == "information retrieval");
  CHECK(result.mapping.at("information_retrieval") == "information retrieval");
  CHECK(result.mapping.at("mathematics") == "mathematics");
  CHECK(result.counts.at("information retrieval") == 55);
  CHECK(result.counts.at("mathematics") == 7);
  CHECK(result.dropped == std::vector<std::string>{"!!!"});
}

TEST_CASE("rule_aggregate breaks count ties by lexicographically smallest raw") {
  std::map<std::string, std::uint64_t> vocab = {{"Dogs", 5}, {"dog", 5}};
  const auto result = rule_aggregate(vocab);
  // "Dogs" sorts before "dog" (ASCII), so its cleaned surface wins the tie.
  CHECK(result.mapping.at("Dogs") == "dogs");
  CHECK(result.mapping.at("dog") == "dogs");
  CHECK(result.counts.at("dogs") == 10);
}

TEST_CASE("semantic_aggregate collapses cells to the most frequent member") {
  std::vector<std::vector<std::string>> cells = {{"alpha", "beta", "gamma"}, {"solo"}};
  std::map<std::string, std::uint64_t> counts = {
      {"alpha", 5}, {"beta", 9}, {"gamma", 9}, {"solo", 3}};
  const auto survivors = semantic_aggregate(cells, counts);
  // beta and gamma tie at 9; beta is lexicographically smaller and wins.
  CHECK(survivors.at("alpha") == "beta");
  CHECK(survivors.at("beta") == "beta");
  CHECK(survivors.at("gamma") == "beta");
  CHECK(survivors.at("solo") == "solo");
}

namespace {

NormalizeResult run_showcase(const testsup::ShowcaseFixture& fx, const testsup::TempDir& tmp,
                             const std::string& cache_name = "emb.jsonl") {
  CachedEmbedder embedder(fx.embedder, tmp.path(cache_name));
  NormalizationConfig config;  // defaults: alpha 20, eps 0.05, min_pts 2, 40, 0.99
  return normalize(fx.corpus, config, embedder);
}

}  // namespace

TEST_CASE("normalize resolves lexical, semantic, and co-occurrence variants") {
  auto fx = testsup::make_showcase_fixture();
  testsup::TempDir tmp;
  const auto result = run_showcase(fx, tmp);
  const auto& mapping = result.tag_mapping.mapping;

  // Lexical variants collapse to the cleaned dominant spelling; the typo
  // arrives by the semantic pass.
  CHECK(*mapping.at("Information Retrieval") == "information retrieval");
  CHECK(*mapping.at("information_retrieval") == "information retrieval");
  CHECK(*mapping.at("infomation retrieve") == "information retrieval");

  // Granularity variants collapse to the most frequent phrasing.
  for (const char* variant :
       {"information request", "request for information", "request for additional information",
        "request for more information", "additional information request",
        "specific information request"}) {
    CHECK(*mapping.at(variant) == "information request");
  }

  // Stage attribution.
  const auto& log = result.tag_mapping.stage_log;
  CHECK(log.at("Information Retrieval") == std::vector<std::string>{"rule_aggregation"});
  CHECK(log.at("infomation retrieve") == std::vector<std::string>{"semantic_aggregation"});
  CHECK(log.count("information request") == 0);  // survivor untouched

  // Exactly the two one-directional co-occurrence rules, support-descending.
  const auto& rules = result.tag_mapping.rules;
  REQUIRE(rules.size() == 2);
  CHECK(rules[0].antecedent == std::vector<std::string>{"mathematics"});
  CHECK(rules[0].consequent == std::vector<std::string>{"math problem"});
  CHECK(rules[0].support == 50);
  CHECK(rules[0].confidence == 1.0);
  CHECK(rules[1].antecedent == std::vector<std::string>{"for loop"});
  CHECK(rules[1].consequent == std::vector<std::string>{"loop"});
  CHECK(rules[1].support == 45);
  CHECK(rules[1].confidence == 1.0);

  // Queries that carried both pair members keep only the antecedent side.
  std::size_t pair_math = 0, pair_loop = 0;
  for (const auto& session : result.dataset.sessions) {
    const auto& tags = *session.queries[0].normalized_tags;
    if (tags == std::vector<std::string>{"mathematics"}) ++pair_math;
    if (tags == std::vector<std::string>{"for loop"}) ++pair_loop;
  }
  CHECK(pair_math == 50);
  CHECK(pair_loop == 45);

  // Stage sizes: 13 raw -> 13 -> 12 -> 6 -> 6.
  REQUIRE(result.stage_sizes.size() == 5);
  CHECK(result.stage_sizes[0] == std::pair<std::string, std::size_t>{"input", 13});
  CHECK(result.stage_sizes[1] == std::pair<std::string, std::size_t>{"frequency_filter", 13});
  CHECK(result.stage_sizes[2] == std::pair<std::string, std::size_t>{"rule_aggregation", 12});
  CHECK(result.stage_sizes[3] == std::pair<std::string, std::size_t>{"semantic_aggregation", 6});
  CHECK(result.stage_sizes[4] ==
        std::pair<std::string, std::size_t>{"association_aggregation", 6});
  CHECK(result.queries_with_empty_tags == 0);
}

TEST_CASE("normalize is idempotent and reruns hit the embedding cache") {
  auto fx = testsup::make_showcase_fixture();
  testsup::TempDir tmp;
  const auto first = run_showcase(fx, tmp);

  CachedEmbedder embedder(fx.embedder, tmp.path("emb.jsonl"));
  NormalizationConfig config;
  const auto second = normalize(first.dataset, config, embedder);
  CHECK(serialize_dataset(second.dataset) == serialize_dataset(first.dataset));
  CHECK(second.tag_mapping.mapping == first.tag_mapping.mapping);
  CHECK(second.tag_mapping.rules == first.tag_mapping.rules);
  CHECK(embedder.cache_hits() > 0);
  CHECK(embedder.cache_misses() == 0);  // everything came from disk

  // The mapping is the identity on its own outputs.
  for (const auto& [raw, target] : first.tag_mapping.mapping) {
    if (!target) continue;
    auto self = first.tag_mapping.mapping.find(*target);
    REQUIRE(self != first.tag_mapping.mapping.end());
    REQUIRE(self->second.has_value());
    CHECK(*self->second == *target);
  }
}

TEST_CASE("filtered tags map to null and empty queries are counted") {
  Dataset d;
  d.dataset_id = "ds";
  for (int i = 0; i < 25; ++i) {
    d.sessions.push_back(testsup::raw_session("common-" + std::to_string(i),
                                              "common query " + std::to_string(i), {"common"}));
  }
  d.sessions.push_back(testsup::raw_session("rare", "rare query", {"one-off tag"}));

  auto provider = std::make_shared<testsup::FixedEmbedder>(4);
  testsup::TempDir tmp;
  CachedEmbedder embedder(provider, tmp.path("emb.jsonl"));
  NormalizationConfig config;  // alpha = 20
  const auto result = normalize(d, config, embedder);

  CHECK(!result.tag_mapping.mapping.at("one-off tag").has_value());
  CHECK(result.tag_mapping.stage_log.at("one-off tag") ==
        std::vector<std::string>{"frequency_filter"});
  CHECK(result.queries_with_empty_tags == 1);
  const auto& rare = result.dataset.sessions.back();
  REQUIRE(rare.queries[0].normalized_tags.has_value());
  CHECK(rare.queries[0].normalized_tags->empty());
}

TEST_CASE("a filtered raw tag identical to a surviving canonical self-maps") {
  Dataset d;
  d.dataset_id = "ds";
  for (int i = 0; i < 30; ++i) {
    d.sessions.push_back(
        testsup::raw_session("big-" + std::to_string(i), "big " + std::to_string(i),
                             {"Information Retrieval"}));
  }
  for (int i = 0; i < 5; ++i) {  // below alpha, but equal to the canonical output
    d.sessions.push_back(
        testsup::raw_session("small-" + std::to_string(i), "small " + std::to_string(i),
                             {"information retrieval"}));
  }
  auto provider = std::make_shared<testsup::FixedEmbedder>(4);
  testsup::TempDir tmp;
  CachedEmbedder embedder(provider, tmp.path("emb.jsonl"));
  NormalizationConfig config;
  const auto result = normalize(d, config, embedder);

  const auto& mapping = result.tag_mapping.mapping;
  CHECK(*mapping.at("Information Retrieval") == "information retrieval");
  CHECK(*mapping.at("information retrieval") == "information retrieval");  // resurrected
  CHECK(result.tag_mapping.stage_log.count("information retrieval") == 0);
  CHECK(result.queries_with_empty_tags == 0);
}

TEST_CASE("tag mapping JSON round-trips") {
  auto fx = testsup::make_showcase_fixture();
  testsup::TempDir tmp;
  const auto result = run_showcase(fx, tmp);

  const std::string json_text = mapping_to_json(result.tag_mapping);
  CHECK(json_text.back() == '\n');
  const TagMapping loaded = mapping_from_json(json_text);
  CHECK(loaded.mapping == result.tag_mapping.mapping);
  CHECK(loaded.rules == result.tag_mapping.rules);
  CHECK(loaded.config.alpha == result.tag_mapping.config.alpha);
  CHECK(loaded.config.eps == result.tag_mapping.config.eps);
  CHECK(loaded.config.min_pts == result.tag_mapping.config.min_pts);
  CHECK(loaded.config.min_support == result.tag_mapping.config.min_support);
  CHECK(loaded.config.min_confidence == result.tag_mapping.config.min_confidence);

  CHECK_THROWS_AS(mapping_from_json("{not json"), Error);
  CHECK_THROWS_AS(mapping_from_json(R"({"mapping": 3})"), SchemaError);
}
