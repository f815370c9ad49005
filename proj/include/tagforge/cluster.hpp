#pragma once

#include <map>
#include <string>
#include <vector>

namespace tagforge {

struct ClusterConfig {
  double eps = 0.05;    // maximum cosine distance (1 - dot) to count as a neighbor
  int min_pts = 2;      // neighborhood size making a point core; the point itself counts
  bool parallel_neighbors = true;
};

// Deterministic density clustering over unit embedding vectors.
// - A tag is core when its eps-neighborhood (self included) has >= min_pts members.
// - Clusters grow by scanning tags in lexicographic order and fully expanding
//   each cluster before the next starts, so a border tag reachable from
//   several clusters always lands in the cluster whose lexicographically
//   smallest core tag is smallest.
// - Non-core, non-reachable tags come back as singleton cells; nothing is dropped.
// Returns cells with members sorted, cells ordered by first member.
std::vector<std::vector<std::string>> semantic_cluster(
    const std::map<std::string, std::vector<double>>& embeddings, const ClusterConfig& config);

}  // namespace tagforge
