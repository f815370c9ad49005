#include "tagforge/corpus.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tagforge/error.hpp"
#include "tagforge/util.hpp"

namespace tagforge {

using ordered_json = nlohmann::ordered_json;

namespace {

// Parses one JSONL record into a Session. Throws SchemaError on any
// contract violation; the caller turns that into a LineError.
Session parse_session_line(const std::string& line, const std::string& dataset_id) {
  ordered_json j = ordered_json::parse(line, nullptr, false);
  if (j.is_discarded()) throw SchemaError("invalid JSON");
  if (!j.is_object()) throw SchemaError("record is not an object");

  if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
    throw SchemaError("missing or empty \"id\"");
  }
  if (!j.contains("queries") || !j["queries"].is_array() || j["queries"].empty()) {
    throw SchemaError("missing or empty \"queries\"");
  }

  Session s;
  s.session_id = j["id"].get<std::string>();
  s.dataset_id = dataset_id;
  if (j.contains("dataset") && !j["dataset"].is_null()) {
    // Round-tripped artifacts keep their source dataset; raw corpora without
    // the field inherit the configured id.
    if (!j["dataset"].is_string() || j["dataset"].get<std::string>().empty()) {
      throw SchemaError("\"dataset\" must be a non-empty string");
    }
    s.dataset_id = j["dataset"].get<std::string>();
  }

  int turn = 0;
  for (const auto& q : j["queries"]) {
    if (!q.is_string()) throw SchemaError("query is not a string");
    Query query;
    query.text = q.get<std::string>();
    if (is_blank(query.text)) throw SchemaError("query text is blank");
    query.turn_index = turn++;
    s.queries.push_back(std::move(query));
  }

  if (j.contains("responses") && !j["responses"].is_null()) {
    if (!j["responses"].is_array()) throw SchemaError("\"responses\" is not an array");
    if (j["responses"].size() != s.queries.size()) {
      throw SchemaError("\"responses\" length does not match \"queries\"");
    }
    for (const auto& r : j["responses"]) {
      if (!r.is_string()) throw SchemaError("response is not a string");
      s.responses.push_back(r.get<std::string>());
    }
  }

  if (j.contains("tags") && !j["tags"].is_null()) {
    if (!j["tags"].is_array() || j["tags"].size() != s.queries.size()) {
      throw SchemaError("\"tags\" must align with \"queries\"");
    }
    for (std::size_t i = 0; i < s.queries.size(); ++i) {
      const auto& t = j["tags"][i];
      if (t.is_null()) continue;  // query not annotated
      if (!t.is_array()) throw SchemaError("per-query tags must be a list");
      std::vector<TagAnnotation> anns;
      for (const auto& a : t) {
        if (!a.is_object() || !a.contains("tag") || !a["tag"].is_string()) {
          throw SchemaError("tag entry must be {\"tag\": str, \"explanation\": str}");
        }
        TagAnnotation ann;
        ann.tag = a["tag"].get<std::string>();
        if (trim(ann.tag).empty()) throw SchemaError("tag is empty after trimming");
        if (a.contains("explanation")) {
          if (!a["explanation"].is_string()) throw SchemaError("explanation must be a string");
          ann.explanation = a["explanation"].get<std::string>();
        }
        anns.push_back(std::move(ann));
      }
      s.queries[i].raw_tags = std::move(anns);
    }
  }

  if (j.contains("normalized_tags") && !j["normalized_tags"].is_null()) {
    if (!j["normalized_tags"].is_array() || j["normalized_tags"].size() != s.queries.size()) {
      throw SchemaError("\"normalized_tags\" must align with \"queries\"");
    }
    for (std::size_t i = 0; i < s.queries.size(); ++i) {
      const auto& t = j["normalized_tags"][i];
      if (t.is_null()) continue;
      if (!t.is_array()) throw SchemaError("per-query normalized tags must be a list");
      std::vector<std::string> tags;
      std::set<std::string> seen;
      for (const auto& a : t) {
        if (!a.is_string()) throw SchemaError("normalized tag must be a string");
        std::string tag = a.get<std::string>();
        if (!seen.insert(tag).second) throw SchemaError("duplicate normalized tag");
        tags.push_back(std::move(tag));
      }
      s.queries[i].normalized_tags = std::move(tags);
    }
  }

  return s;
}

}  // namespace

LoadResult load_dataset(const std::string& path, const std::string& dataset_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus file: " + path);

  LoadResult result;
  result.dataset.dataset_id = dataset_id;

  std::string line;
  std::size_t line_number = 0;
  std::size_t record_lines = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    ++record_lines;
    try {
      result.dataset.sessions.push_back(parse_session_line(line, dataset_id));
    } catch (const SchemaError& e) {
      result.errors.push_back({line_number, e.what()});
    }
  }
  if (in.bad()) throw IoError("read failed: " + path);

  if (record_lines > 0 && result.errors.size() * 10 > record_lines) {
    std::ostringstream msg;
    msg << path << ": " << result.errors.size() << " of " << record_lines
        << " lines malformed (>10%); first offending lines:";
    const std::size_t limit = std::min<std::size_t>(result.errors.size(), 20);
    for (std::size_t i = 0; i < limit; ++i) msg << ' ' << result.errors[i].line_number;
    throw SchemaError(msg.str());
  }
  return result;
}

std::string serialize_dataset(const Dataset& dataset) {
  std::string out;
  for (const Session& s : dataset.sessions) {
    ordered_json j;
    j["id"] = s.session_id;
    j["dataset"] = s.dataset_id;
    j["queries"] = ordered_json::array();
    for (const Query& q : s.queries) j["queries"].push_back(q.text);
    if (!s.responses.empty()) j["responses"] = s.responses;

    bool any_raw = false;
    bool any_norm = false;
    for (const Query& q : s.queries) {
      any_raw = any_raw || q.raw_tags.has_value();
      any_norm = any_norm || q.normalized_tags.has_value();
    }
    if (any_raw) {
      ordered_json tags = ordered_json::array();
      for (const Query& q : s.queries) {
        if (!q.raw_tags) {
          tags.push_back(nullptr);
          continue;
        }
        ordered_json per_query = ordered_json::array();
        for (const TagAnnotation& a : *q.raw_tags) {
          ordered_json ann;
          ann["tag"] = a.tag;
          ann["explanation"] = a.explanation;
          per_query.push_back(std::move(ann));
        }
        tags.push_back(std::move(per_query));
      }
      j["tags"] = std::move(tags);
    }
    if (any_norm) {
      ordered_json tags = ordered_json::array();
      for (const Query& q : s.queries) {
        if (!q.normalized_tags) {
          tags.push_back(nullptr);
        } else {
          tags.push_back(*q.normalized_tags);
        }
      }
      j["normalized_tags"] = std::move(tags);
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  write_file(path, serialize_dataset(dataset));
}

Dataset pool_datasets(const std::vector<Dataset>& datasets, const std::string& pooled_id) {
  std::set<std::string> ids;
  for (const Dataset& d : datasets) {
    if (!ids.insert(d.dataset_id).second) {
      throw ArgumentError("pool_datasets: duplicate dataset id \"" + d.dataset_id + "\"");
    }
  }
  Dataset pooled;
  pooled.dataset_id = pooled_id;
  for (const Dataset& d : datasets) {
    for (Session s : d.sessions) {
      const std::string prefix = s.dataset_id + "/";
      if (s.session_id.rfind(prefix, 0) != 0) s.session_id = prefix + s.session_id;
      pooled.sessions.push_back(std::move(s));
    }
  }
  return pooled;
}

std::vector<std::string> session_tag_set(const Session& session) {
  std::set<std::string> tags;
  for (const Query& q : session.queries) {
    if (!q.normalized_tags) continue;
    tags.insert(q.normalized_tags->begin(), q.normalized_tags->end());
  }
  return {tags.begin(), tags.end()};
}

std::set<std::string> dataset_tag_set(const Dataset& dataset) {
  std::set<std::string> tags;
  for (const Session& s : dataset.sessions) {
    for (const Query& q : s.queries) {
      if (!q.normalized_tags) continue;
      tags.insert(q.normalized_tags->begin(), q.normalized_tags->end());
    }
  }
  return tags;
}

}  // namespace tagforge
