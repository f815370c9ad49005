#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tagforge {

// One open-set intention tag with its free-text justification.
// tag is non-empty after trimming; explanation may be empty only when the
// upstream response omitted it (surfaced as a warning at parse time).
struct TagAnnotation {
  std::string tag;
  std::string explanation;

  bool operator==(const TagAnnotation&) const = default;
};

// One user turn. raw_tags is absent until annotation, normalized_tags absent
// until normalization; normalized_tags never contains duplicates.
struct Query {
  std::string text;
  int turn_index = 0;
  std::optional<std::vector<TagAnnotation>> raw_tags;
  std::optional<std::vector<std::string>> normalized_tags;

  bool operator==(const Query&) const = default;
};

// A conversation session: queries ordered by turn, optional aligned responses.
struct Session {
  std::string session_id;
  std::string dataset_id;
  std::vector<Query> queries;
  std::vector<std::string> responses;  // empty, or one per query

  bool operator==(const Session&) const = default;
};

struct Dataset {
  std::string dataset_id;
  std::vector<Session> sessions;
  std::map<std::string, std::string> source_meta;

  bool operator==(const Dataset&) const = default;
};

// One rejected input line.
struct LineError {
  std::size_t line_number = 0;  // 1-based
  std::string message;
};

struct LoadResult {
  Dataset dataset;
  std::vector<LineError> errors;
};

// Loads a JSONL corpus. Malformed lines are collected into the error report;
// if more than 10% of non-blank lines are malformed the whole load fails with
// a SchemaError listing the first 20 offending line numbers. Unreadable file
// throws IoError.
LoadResult load_dataset(const std::string& path, const std::string& dataset_id);

// Serializes a dataset to canonical JSONL: one session per line, LF endings,
// fixed key order, so save/load round-trips byte-identically.
std::string serialize_dataset(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::string& path);

// Concatenates datasets in input order under one id. Session ids are
// rewritten "<dataset_id>/<session_id>" unless already so prefixed (keeps
// pooling associative). Duplicate input dataset ids are fatal.
Dataset pool_datasets(const std::vector<Dataset>& datasets,
                      const std::string& pooled_id = "pool");

// Union of the session's per-query normalized tags, sorted, deduplicated.
std::vector<std::string> session_tag_set(const Session& session);

// Union of all sessions' tag sets.
std::set<std::string> dataset_tag_set(const Dataset& dataset);

}  // namespace tagforge
