#include "tagforge/cluster.hpp"

#include <deque>

#include "tagforge/error.hpp"
#include "tagforge/kernels.hpp"

namespace tagforge {

std::vector<std::vector<std::string>> semantic_cluster(
    const std::map<std::string, std::vector<double>>& embeddings,
    const ClusterConfig& config) {
  if (config.eps < 0.0) throw ArgumentError("semantic_cluster: eps must be >= 0");
  if (config.min_pts < 1) throw ArgumentError("semantic_cluster: min_pts must be >= 1");

  // std::map iteration gives the lexicographic tag order the scan relies on.
  std::vector<std::string> tags;
  tags.reserve(embeddings.size());
  kernels::Matrix m;
  for (const auto& [tag, vec] : embeddings) {
    if (tags.empty()) {
      m.cols = vec.size();
      if (m.cols == 0) throw ArgumentError("semantic_cluster: empty embedding vector");
    } else if (vec.size() != m.cols) {
      throw ArgumentError("semantic_cluster: embedding lengths differ");
    }
    tags.push_back(tag);
    m.data.insert(m.data.end(), vec.begin(), vec.end());
  }
  m.rows = tags.size();
  if (m.rows == 0) return {};

  const auto neighbors = config.parallel_neighbors
                             ? kernels::cosine_neighbors_parallel(m, config.eps)
                             : kernels::cosine_neighbors_serial(m, config.eps);

  constexpr int kUndef = -2;
  constexpr int kNoise = -1;
  std::vector<int> label(m.rows, kUndef);
  int next_cluster = 0;

  for (std::size_t i = 0; i < m.rows; ++i) {
    if (label[i] != kUndef) continue;
    if (neighbors[i].size() < static_cast<std::size_t>(config.min_pts)) {
      label[i] = kNoise;
      continue;
    }
    const int cluster = next_cluster++;
    label[i] = cluster;
    std::deque<std::int32_t> frontier(neighbors[i].begin(), neighbors[i].end());
    while (!frontier.empty()) {
      const std::int32_t j = frontier.front();
      frontier.pop_front();
      if (label[j] == kNoise) {
        label[j] = cluster;  // border point
        continue;
      }
      if (label[j] != kUndef) continue;
      label[j] = cluster;
      if (neighbors[j].size() >= static_cast<std::size_t>(config.min_pts)) {
        frontier.insert(frontier.end(), neighbors[j].begin(), neighbors[j].end());
      }
    }
  }

  std::vector<std::vector<std::string>> cells;
  std::vector<std::vector<std::string>> clusters(static_cast<std::size_t>(next_cluster));
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (label[i] >= 0) {
      clusters[static_cast<std::size_t>(label[i])].push_back(tags[i]);
    } else {
      cells.push_back({tags[i]});  // noise kept as singleton
    }
  }
  for (auto& c : clusters) {
    if (!c.empty()) cells.push_back(std::move(c));  // members already lex-sorted
  }
  std::sort(cells.begin(), cells.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return cells;
}

}  // namespace tagforge
