#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tagforge/corpus.hpp"

namespace tagforge {

struct DatasetMetrics {
  std::string dataset_id;
  std::size_t sample_count = 0;   // sessions
  std::size_t unique_tags = 0;    // distinct normalized tags in the dataset
  double diversity = 0.0;         // unique_tags / global vocabulary size
  double complexity = 0.0;        // mean session tag-set size (union over turns)
  double query_complexity = 0.0;  // mean per-query tag count, informational
};

// global_vocabulary_size is the tag-set size of the reference pool the
// dataset is measured against (>= unique_tags when the dataset is part of
// the pool). Empty dataset or zero vocabulary is fatal.
DatasetMetrics compute_metrics(const Dataset& dataset, std::size_t global_vocabulary_size);

// cells[row][col] = |tags(col) ∩ tags(row)| / |tags(row)|: how much of the
// row dataset's tag set the column dataset covers. Diagonal is exactly 1.
struct RecallMatrix {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> cells;
};

// Requires >= 2 datasets, each with a non-empty tag set (fatal otherwise,
// naming the offender).
RecallMatrix recall_matrix(const std::vector<Dataset>& datasets);

// Occurrences of each normalized tag across queries.
std::map<std::string, std::uint64_t> normalized_tag_frequencies(const Dataset& dataset);

std::string metrics_to_csv(const std::vector<DatasetMetrics>& metrics);
std::string recall_to_csv(const RecallMatrix& matrix);
std::string frequencies_to_json(const std::map<std::string, std::uint64_t>& frequencies);

}  // namespace tagforge
