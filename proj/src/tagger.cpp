#include "tagforge/tagger.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <thread>

#include "json.hpp"
#include "tagforge/error.hpp"
#include "tagforge/prompts.hpp"
#include "tagforge/util.hpp"

namespace tagforge {

using ordered_json = nlohmann::ordered_json;

namespace {

ParsedTags validate_tag_array(const ordered_json& arr) {
  ParsedTags out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& item = arr[i];
    if (!item.is_object() || !item.contains("tag") || !item["tag"].is_string()) {
      throw ParseFailure("tag element at index " + std::to_string(i) +
                         " is not {\"tag\": str, \"explanation\": str}");
    }
    TagAnnotation ann;
    ann.tag = item["tag"].get<std::string>();
    if (trim(ann.tag).empty()) {
      throw ParseFailure("tag element at index " + std::to_string(i) + " has an empty tag");
    }
    if (item.contains("explanation")) {
      if (!item["explanation"].is_string()) {
        throw ParseFailure("tag element at index " + std::to_string(i) +
                           " has a non-string explanation");
      }
      ann.explanation = item["explanation"].get<std::string>();
    } else {
      ++out.missing_explanations;
    }
    out.annotations.push_back(std::move(ann));
  }
  return out;
}

}  // namespace

ParsedTags parse_tag_response(const std::string& raw) {
  std::optional<ParseFailure> first_shape_error;
  for (std::size_t pos = raw.find('['); pos != std::string::npos;
       pos = raw.find('[', pos + 1)) {
    const std::size_t end = find_json_array_end(raw, pos);
    if (end == std::string::npos) continue;
    ordered_json candidate = ordered_json::parse(raw.substr(pos, end - pos), nullptr, false);
    if (candidate.is_discarded() || !candidate.is_array()) continue;
    try {
      return validate_tag_array(candidate);
    } catch (const ParseFailure& e) {
      if (!first_shape_error) first_shape_error = e;
    }
  }
  if (first_shape_error) throw *first_shape_error;
  throw ParseFailure("no JSON tag array found in response");
}

std::string annotation_cache_key(const std::string& model_name,
                                 const std::string& query_text) {
  return model_name + ":" + sha256_hex(query_text);
}

AnnotationReport annotate_dataset(Dataset& dataset, const AnnotationJob& job,
                                  ChatClient& client) {
  AnnotationReport report;

  // Load the response cache; torn trailing lines (crash artifacts) are skipped.
  std::map<std::string, std::string> cache;
  if (!job.cache_path.empty()) {
    std::ifstream in(job.cache_path, std::ios::binary);
    std::string line;
    while (in && std::getline(in, line)) {
      if (line.empty()) continue;
      ordered_json j = ordered_json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("key") || !j.contains("response")) {
        continue;
      }
      cache[j["key"].get<std::string>()] = j["response"].get<std::string>();
    }
  }

  struct WorkItem {
    std::size_t session = 0;
    std::size_t query = 0;
    std::string key;
    std::string prompt;
  };
  std::vector<WorkItem> work;
  for (std::size_t si = 0; si < dataset.sessions.size(); ++si) {
    Session& s = dataset.sessions[si];
    for (std::size_t qi = 0; qi < s.queries.size(); ++qi) {
      Query& q = s.queries[qi];
      if (q.raw_tags) continue;  // already annotated: rerun is a no-op
      const std::string key = annotation_cache_key(job.model_name, q.text);
      auto it = cache.find(key);
      if (it != cache.end()) {
        try {
          ParsedTags parsed = parse_tag_response(it->second);
          q.raw_tags = std::move(parsed.annotations);
          report.missing_explanations += parsed.missing_explanations;
          ++report.cache_hits;
          ++report.annotated_queries;
          continue;
        } catch (const ParseFailure&) {
          // stale unusable entry: fall through and refetch
        }
      }
      work.push_back({si, qi, key, prompts::render_tagging_prompt(q.text)});
    }
  }

  std::ofstream cache_out;
  if (!job.cache_path.empty() && !work.empty()) {
    cache_out.open(job.cache_path, std::ios::binary | std::ios::app);
    if (!cache_out) throw IoError("cannot open annotation cache: " + job.cache_path);
  }

  struct ItemResult {
    bool ok = false;
    std::string response;
    std::string error;
  };

  const std::size_t width = std::max(1, job.parallelism);
  for (std::size_t base = 0; base < work.size(); base += width) {
    const std::size_t batch = std::min(width, work.size() - base);
    std::vector<ItemResult> results(batch);
    std::vector<std::thread> threads;

    auto run_one = [&](std::size_t offset) {
      const WorkItem& item = work[base + offset];
      ChatRequest request{job.model_name, item.prompt};
      try {
        results[offset].response =
            client.complete(request, [](const std::string& content) {
              parse_tag_response(content);  // throws ParseFailure to trigger retry
            });
        results[offset].ok = true;
      } catch (const AuthError&) {
        throw;  // propagate: annotation aborts on credential failures
      } catch (const Error& e) {
        results[offset].error = e.what();
      }
    };

    if (batch == 1) {
      run_one(0);
    } else {
      std::exception_ptr auth_failure;
      std::mutex auth_mu;
      for (std::size_t t = 0; t < batch; ++t) {
        threads.emplace_back([&, t] {
          try {
            run_one(t);
          } catch (...) {
            std::lock_guard<std::mutex> lock(auth_mu);
            if (!auth_failure) auth_failure = std::current_exception();
          }
        });
      }
      for (auto& th : threads) th.join();
      if (auth_failure) std::rethrow_exception(auth_failure);
    }

    // Cache appends happen here, on one thread, in work order: artifacts are
    // byte-identical no matter the parallelism.
    for (std::size_t offset = 0; offset < batch; ++offset) {
      const WorkItem& item = work[base + offset];
      ItemResult& r = results[offset];
      ++report.requests_attempted;
      Session& s = dataset.sessions[item.session];
      if (!r.ok) {
        report.failures.push_back(
            {s.session_id, s.queries[item.query].turn_index, r.error});
        continue;
      }
      ParsedTags parsed = parse_tag_response(r.response);  // validated, cannot throw now
      s.queries[item.query].raw_tags = std::move(parsed.annotations);
      report.missing_explanations += parsed.missing_explanations;
      ++report.annotated_queries;
      if (cache_out.is_open()) {
        ordered_json entry;
        entry["key"] = item.key;
        entry["response"] = r.response;
        cache_out << entry.dump() << '\n';
        cache_out.flush();
      }
    }
  }
  return report;
}

}  // namespace tagforge
