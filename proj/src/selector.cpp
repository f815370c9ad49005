#include "tagforge/selector.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "tagforge/error.hpp"
#include "tagforge/util.hpp"

namespace tagforge {

namespace {

// Pool view with interned tags and per-session bitsets; selection semantics
// stay those of the scan-based procedures, this only speeds up the
// "does this session expand the working set" test.
struct PoolIndex {
  std::vector<std::vector<std::uint64_t>> bits;  // per session
  std::vector<std::size_t> tag_count;
  std::size_t vocab_size = 0;
  std::size_t words = 0;

  explicit PoolIndex(const Dataset& pool) {
    std::map<std::string, std::size_t> ids;
    std::vector<std::vector<std::size_t>> session_tags(pool.sessions.size());
    for (std::size_t i = 0; i < pool.sessions.size(); ++i) {
      for (const std::string& t : session_tag_set(pool.sessions[i])) {
        auto it = ids.find(t);
        if (it == ids.end()) it = ids.emplace(t, ids.size()).first;
        session_tags[i].push_back(it->second);
      }
    }
    vocab_size = ids.size();
    words = (vocab_size + 63) / 64;
    bits.assign(pool.sessions.size(), std::vector<std::uint64_t>(words, 0));
    tag_count.resize(pool.sessions.size());
    for (std::size_t i = 0; i < pool.sessions.size(); ++i) {
      tag_count[i] = session_tags[i].size();
      for (std::size_t id : session_tags[i]) bits[i][id / 64] |= 1ULL << (id % 64);
    }
  }

  bool expands(const std::vector<std::uint64_t>& working, std::size_t i) const {
    for (std::size_t w = 0; w < words; ++w) {
      if (bits[i][w] & ~working[w]) return true;
    }
    return false;
  }

  void merge(std::vector<std::uint64_t>& working, std::size_t i) const {
    for (std::size_t w = 0; w < words; ++w) working[w] |= bits[i][w];
  }

  static std::size_t popcount(const std::vector<std::uint64_t>& v) {
    std::size_t n = 0;
    for (std::uint64_t w : v) n += static_cast<std::size_t>(__builtin_popcountll(w));
    return n;
  }
};

struct DrawState {
  const Dataset* pool;
  PoolIndex index;
  std::vector<char> alive;
  std::vector<std::size_t> sorted_order;  // tag count desc, pool order ties

  explicit DrawState(const Dataset& p) : pool(&p), index(p), alive(p.sessions.size(), 1) {
    sorted_order.resize(p.sessions.size());
    std::iota(sorted_order.begin(), sorted_order.end(), 0);
    std::stable_sort(sorted_order.begin(), sorted_order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return index.tag_count[a] > index.tag_count[b];
                     });
  }
};

Selection make_selection(const Dataset& pool, const std::vector<std::size_t>& picks,
                         const std::string& mode, std::size_t passes,
                         const PoolIndex& index) {
  Selection sel;
  sel.subset.dataset_id = pool.dataset_id + "-" + mode;
  sel.report.mode = mode;
  sel.report.passes = passes;
  std::vector<std::uint64_t> covered(index.words, 0);
  std::size_t tag_total = 0;
  for (std::size_t i : picks) {
    sel.subset.sessions.push_back(pool.sessions[i]);
    sel.report.selected_session_ids.push_back(pool.sessions[i].session_id);
    index.merge(covered, i);
    tag_total += index.tag_count[i];
  }
  sel.report.coverage = index.vocab_size == 0
                            ? 0.0
                            : static_cast<double>(PoolIndex::popcount(covered)) /
                                  static_cast<double>(index.vocab_size);
  sel.report.avg_tags = picks.empty()
                            ? 0.0
                            : static_cast<double>(tag_total) / static_cast<double>(picks.size());
  return sel;
}

// One complexity-first subset drawn from whatever is still alive.
std::vector<std::size_t> draw_complexity_first(DrawState& state, std::size_t n,
                                               std::size_t* passes_out) {
  std::vector<std::size_t> picks;
  std::size_t passes = 0;
  while (picks.size() < n) {
    std::vector<std::uint64_t> working(state.index.words, 0);
    std::size_t selected_this_pass = 0;
    for (std::size_t idx : state.sorted_order) {
      if (!state.alive[idx]) continue;
      if (!state.index.expands(working, idx)) continue;
      state.alive[idx] = 0;
      state.index.merge(working, idx);
      picks.push_back(idx);
      ++selected_this_pass;
      if (picks.size() == n) break;
    }
    ++passes;
    if (picks.size() < n && selected_this_pass == 0) {
      throw SelectionError(
          "complexity-first sampling: pool cannot supply " + std::to_string(n) +
          " sessions with non-empty tag sets (got " + std::to_string(picks.size()) + ")");
    }
  }
  if (passes_out != nullptr) *passes_out = passes;
  return picks;
}

}  // namespace

Selection complexity_first_sample(const Dataset& pool, std::size_t n) {
  if (n > pool.sessions.size()) {
    throw ArgumentError("complexity_first_sample: n exceeds pool size");
  }
  DrawState state(pool);
  std::size_t passes = 0;
  const auto picks = draw_complexity_first(state, n, &passes);
  return make_selection(pool, picks, "complexity-first", passes, state.index);
}

std::vector<Selection> complexity_series_sample(const Dataset& pool, std::size_t n,
                                                std::size_t count) {
  if (n * count > pool.sessions.size()) {
    throw ArgumentError("complexity_series_sample: n * count exceeds pool size");
  }
  DrawState state(pool);
  std::vector<Selection> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t passes = 0;
    const auto picks = draw_complexity_first(state, n, &passes);
    Selection sel = make_selection(pool, picks, "complexity-series-" + std::to_string(i),
                                   passes, state.index);
    out.push_back(std::move(sel));
  }
  return out;
}

std::vector<Selection> diversity_series_sample(const Dataset& pool, std::size_t n,
                                               const std::vector<double>& rates,
                                               double target_avg, double tolerance) {
  if (rates.empty()) throw ArgumentError("diversity_series_sample: no rates given");
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] <= 0.0 || rates[i] > 1.0) {
      throw ArgumentError("diversity_series_sample: rates must lie in (0, 1]");
    }
    if (i > 0 && rates[i] <= rates[i - 1]) {
      throw ArgumentError("diversity_series_sample: rates must be strictly increasing");
    }
  }
  if (n * rates.size() > pool.sessions.size()) {
    throw ArgumentError("diversity_series_sample: n * |rates| exceeds pool size");
  }

  PoolIndex index(pool);
  const double total = static_cast<double>(index.vocab_size);
  if (index.vocab_size == 0) {
    throw SelectionError("diversity series: pool has an empty tag vocabulary");
  }
  std::vector<char> alive(pool.sessions.size(), 1);
  std::vector<Selection> out;

  for (double rate : rates) {
    std::vector<std::size_t> picks;
    std::vector<std::uint64_t> working(index.words, 0);
    std::size_t covered = 0;
    std::size_t tag_total = 0;

    // Phase 1: expand coverage past the rate, scanning pool order.
    for (std::size_t i = 0; i < pool.sessions.size(); ++i) {
      if (!alive[i] || !index.expands(working, i)) continue;
      alive[i] = 0;
      index.merge(working, i);
      covered = PoolIndex::popcount(working);
      picks.push_back(i);
      tag_total += index.tag_count[i];
      if (static_cast<double>(covered) / total > rate) break;
    }
    const double reached = static_cast<double>(covered) / total;
    if (reached <= rate && !(rate == 1.0 && covered == index.vocab_size)) {
      throw SelectionError("diversity series: coverage phase cannot reach rate " +
                           format_double(rate) + " (achieved " + format_double(reached) + ")");
    }
    if (picks.size() > n) {
      throw SelectionError("diversity series: coverage phase needed " +
                           std::to_string(picks.size()) + " sessions, subset size is " +
                           std::to_string(n));
    }

    // Phase 2: fill with non-expanding sessions, steering the average.
    while (picks.size() < n) {
      std::size_t best = pool.sessions.size();
      double best_delta = 0.0;
      for (std::size_t i = 0; i < pool.sessions.size(); ++i) {
        if (!alive[i] || index.expands(working, i)) continue;
        const double new_avg = static_cast<double>(tag_total + index.tag_count[i]) /
                               static_cast<double>(picks.size() + 1);
        const double delta = std::abs(new_avg - target_avg);
        if (best == pool.sessions.size() || delta < best_delta) {
          best = i;
          best_delta = delta;
        }
      }
      if (best == pool.sessions.size()) {
        throw SelectionError("diversity series: fill phase ran out of non-expanding sessions at " +
                             std::to_string(picks.size()) + " of " + std::to_string(n));
      }
      alive[best] = 0;
      picks.push_back(best);
      tag_total += index.tag_count[best];
    }

    std::sort(picks.begin(), picks.end());
    Selection sel =
        make_selection(pool, picks, "diversity-" + format_double(rate), 1, index);
    if (std::abs(sel.report.avg_tags - target_avg) > tolerance) {
      sel.report.warnings.push_back("avg_tags " + format_double(sel.report.avg_tags) +
                                    " misses target " + format_double(target_avg) +
                                    " by more than " + format_double(tolerance));
    }
    out.push_back(std::move(sel));
  }
  return out;
}

Selection random_sample(const Dataset& pool, std::size_t n, std::uint64_t seed) {
  if (n > pool.sessions.size()) throw ArgumentError("random_sample: n exceeds pool size");
  std::mt19937_64 rng(seed);
  auto picks = sample_indices(rng, pool.sessions.size(), n);
  std::sort(picks.begin(), picks.end());
  PoolIndex index(pool);
  return make_selection(pool, picks, "random", 1, index);
}

}  // namespace tagforge
