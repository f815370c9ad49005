#include "tagforge/metrics.hpp"

#include <set>

#include "json.hpp"
#include "tagforge/error.hpp"
#include "tagforge/util.hpp"

namespace tagforge {

DatasetMetrics compute_metrics(const Dataset& dataset, std::size_t global_vocabulary_size) {
  if (dataset.sessions.empty()) {
    throw ArgumentError("compute_metrics: dataset \"" + dataset.dataset_id + "\" is empty");
  }
  if (global_vocabulary_size == 0) {
    throw ArgumentError("compute_metrics: global vocabulary is empty");
  }
  DatasetMetrics m;
  m.dataset_id = dataset.dataset_id;
  m.sample_count = dataset.sessions.size();

  std::set<std::string> vocab;
  std::size_t session_tag_total = 0;
  std::size_t query_tag_total = 0;
  std::size_t query_count = 0;
  for (const Session& s : dataset.sessions) {
    const auto tags = session_tag_set(s);
    session_tag_total += tags.size();  // empty-tag sessions add 0, still divide
    vocab.insert(tags.begin(), tags.end());
    for (const Query& q : s.queries) {
      ++query_count;
      if (q.normalized_tags) query_tag_total += q.normalized_tags->size();
    }
  }
  m.unique_tags = vocab.size();
  m.diversity = static_cast<double>(m.unique_tags) / static_cast<double>(global_vocabulary_size);
  m.complexity = static_cast<double>(session_tag_total) / static_cast<double>(m.sample_count);
  m.query_complexity =
      query_count == 0 ? 0.0
                       : static_cast<double>(query_tag_total) / static_cast<double>(query_count);
  return m;
}

RecallMatrix recall_matrix(const std::vector<Dataset>& datasets) {
  if (datasets.size() < 2) {
    throw ArgumentError("recall_matrix: needs at least two datasets");
  }
  std::vector<std::set<std::string>> tag_sets;
  RecallMatrix out;
  for (const Dataset& d : datasets) {
    auto tags = dataset_tag_set(d);
    if (tags.empty()) {
      throw ArgumentError("recall_matrix: dataset \"" + d.dataset_id + "\" has no tags");
    }
    out.ids.push_back(d.dataset_id);
    tag_sets.push_back(std::move(tags));
  }
  out.cells.assign(datasets.size(), std::vector<double>(datasets.size(), 0.0));
  for (std::size_t row = 0; row < datasets.size(); ++row) {
    for (std::size_t col = 0; col < datasets.size(); ++col) {
      if (row == col) {
        out.cells[row][col] = 1.0;
        continue;
      }
      std::size_t inter = 0;
      for (const std::string& t : tag_sets[row]) inter += tag_sets[col].count(t);
      out.cells[row][col] =
          static_cast<double>(inter) / static_cast<double>(tag_sets[row].size());
    }
  }
  return out;
}

std::map<std::string, std::uint64_t> normalized_tag_frequencies(const Dataset& dataset) {
  std::map<std::string, std::uint64_t> freq;
  for (const Session& s : dataset.sessions) {
    for (const Query& q : s.queries) {
      if (!q.normalized_tags) continue;
      for (const std::string& t : *q.normalized_tags) ++freq[t];
    }
  }
  return freq;
}

namespace {

// Commas, quotes and newlines get RFC-4180 quoting.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

}  // namespace

std::string metrics_to_csv(const std::vector<DatasetMetrics>& metrics) {
  std::string out = "dataset_id,sample_count,unique_tags,diversity,complexity,query_complexity\n";
  for (const DatasetMetrics& m : metrics) {
    out += csv_field(m.dataset_id);
    out += ',' + std::to_string(m.sample_count);
    out += ',' + std::to_string(m.unique_tags);
    out += ',' + format_double(m.diversity);
    out += ',' + format_double(m.complexity);
    out += ',' + format_double(m.query_complexity);
    out += '\n';
  }
  return out;
}

std::string recall_to_csv(const RecallMatrix& matrix) {
  std::string out = "dataset_id";
  for (const std::string& id : matrix.ids) out += ',' + csv_field(id);
  out += '\n';
  for (std::size_t row = 0; row < matrix.ids.size(); ++row) {
    out += csv_field(matrix.ids[row]);
    for (double v : matrix.cells[row]) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

std::string frequencies_to_json(const std::map<std::string, std::uint64_t>& frequencies) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [tag, count] : frequencies) j[tag] = count;
  return j.dump(2) + "\n";
}

}  // namespace tagforge
