#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tagforge/chat_client.hpp"
#include "tagforge/corpus.hpp"

namespace tagforge {

struct AnnotationJob {
  std::string model_name;
  int parallelism = 1;            // in-flight request bound
  int max_retries = 3;
  int requests_per_minute = 600;
  std::string cache_path;         // append-only JSONL response cache
};

struct AnnotationFailure {
  std::string session_id;
  int turn_index = 0;
  std::string error;
};

struct AnnotationReport {
  std::size_t annotated_queries = 0;   // queries that gained raw tags this run
  std::size_t cache_hits = 0;
  std::size_t requests_attempted = 0;  // work items sent to the endpoint
  std::size_t missing_explanations = 0;
  std::vector<AnnotationFailure> failures;
};

struct ParsedTags {
  std::vector<TagAnnotation> annotations;
  std::size_t missing_explanations = 0;
};

// Extracts the first JSON array of {"tag","explanation"} objects from model
// output, tolerating surrounding prose and code fences. Order preserved.
// Wrong-shaped elements raise ParseFailure naming the offending index; a
// missing explanation becomes "" and is counted, not an error.
ParsedTags parse_tag_response(const std::string& raw);

// Cache key for one (model, query) pair.
std::string annotation_cache_key(const std::string& model_name, const std::string& query_text);

// Annotates every unannotated query with one endpoint request each (sessions
// are never concatenated into one prompt). Responses are cached on disk, so
// reruns and crashes skip completed queries; cache writes are serialized and
// appended in query order regardless of parallelism. A query failing all
// retries is recorded in the report and skipped; auth failures abort.
AnnotationReport annotate_dataset(Dataset& dataset, const AnnotationJob& job,
                                  ChatClient& client);

}  // namespace tagforge
