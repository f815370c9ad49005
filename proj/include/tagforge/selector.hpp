#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagforge/corpus.hpp"

namespace tagforge {

struct SelectionReport {
  std::string mode;
  std::vector<std::string> selected_session_ids;  // in selection order
  double coverage = 0.0;  // |selected tag union| / |pool tag union|
  double avg_tags = 0.0;  // mean session tag-set size of the subset
  std::size_t passes = 0; // outer scan passes (complexity modes)
  std::vector<std::string> warnings;
};

struct Selection {
  Dataset subset;
  SelectionReport report;
};

// Complexity-first diverse sampling. Sessions sorted by tag-set size
// descending (stable: pool order breaks ties); repeated passes scan the
// remaining pool in that order, selecting any session that strictly expands
// the pass's working tag set, until n sessions are drawn. A pass that cannot
// select while the subset is short is fatal (sessions with empty tag sets
// are never selectable).
Selection complexity_first_sample(const Dataset& pool, std::size_t n);

// `count` disjoint subsets of size n, drawn by running the same procedure on
// the progressively consumed pool. On pools where tag-set sizes stratify,
// avg_tags is non-increasing across the series.
std::vector<Selection> complexity_series_sample(const Dataset& pool, std::size_t n,
                                                std::size_t count);

// Diversity series: for each coverage rate r (strictly increasing, in (0,1]),
// phase 1 scans the remaining pool in order selecting tag-set-expanding
// sessions until coverage exceeds r (a full scan tops out at the achievable
// maximum, which is how r = 1.0 terminates); phase 2 fills to n with
// non-expanding sessions, preferring the one whose tag count keeps the
// running average closest to target_avg (ties: pool order). Subsets are
// disjoint; an unreachable rate or unfillable subset is fatal, naming the
// phase. |avg_tags - target_avg| > tolerance records a warning.
std::vector<Selection> diversity_series_sample(const Dataset& pool, std::size_t n,
                                               const std::vector<double>& rates,
                                               double target_avg = 5.0,
                                               double tolerance = 0.5);

// Uniform sample without replacement; reproducible from seed (mt19937_64,
// rejection sampling, partial Fisher-Yates; see README). Subset keeps pool
// order.
Selection random_sample(const Dataset& pool, std::size_t n, std::uint64_t seed);

}  // namespace tagforge
