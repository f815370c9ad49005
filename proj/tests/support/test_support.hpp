// Shared test scaffolding: temp directories, corpus builders, a scripted chat
// transport, a fixture embedding provider with hand-chosen vectors, and the
// synthetic pools reused by both the module tests and the acceptance gate.
#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tagforge/chat_client.hpp"
#include "tagforge/corpus.hpp"
#include "tagforge/embedding.hpp"
#include "tagforge/util.hpp"

namespace testsup {

// ---------------------------------------------------------------------------
// Filesystem helpers
// ---------------------------------------------------------------------------

// Self-deleting temp directory under the system temp root.
class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "tagforge-test-XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    dir_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& dir() const { return dir_; }
  std::string path() const { return dir_.string(); }
  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

 private:
  std::filesystem::path dir_;
};

// Restores the working directory on scope exit.
class CwdGuard {
 public:
  explicit CwdGuard(const std::filesystem::path& go_to) : old_(std::filesystem::current_path()) {
    std::filesystem::current_path(go_to);
  }
  ~CwdGuard() {
    std::error_code ec;
    std::filesystem::current_path(old_, ec);
  }

 private:
  std::filesystem::path old_;
};

// Relative path -> file bytes for every regular file under root.
inline std::map<std::string, std::string> dir_snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    out[std::filesystem::relative(entry.path(), root).string()] =
        tagforge::read_file(entry.path().string());
  }
  return out;
}

inline std::string golden_path(const std::string& name) {
  return std::string(TAGFORGE_TEST_GOLDEN_DIR) + "/" + name;
}

inline std::string read_golden(const std::string& name) {
  return tagforge::read_file(golden_path(name));
}

// ---------------------------------------------------------------------------
// Corpus builders
// ---------------------------------------------------------------------------

// Single-turn session whose query already carries normalized tags.
inline tagforge::Session tag_session(std::string id, std::vector<std::string> tags,
                                     std::string dataset = "ds", std::string text = "") {
  tagforge::Session s;
  s.session_id = std::move(id);
  s.dataset_id = dataset;
  tagforge::Query q;
  q.text = text.empty() ? "query for " + s.session_id : std::move(text);
  q.turn_index = 0;
  q.normalized_tags = std::move(tags);
  s.queries.push_back(std::move(q));
  return s;
}

// Single-turn session annotated with raw tags (explanations filled in).
inline tagforge::Session raw_session(std::string id, std::string text,
                                     std::vector<std::string> tags,
                                     std::string dataset = "ds") {
  tagforge::Session s;
  s.session_id = std::move(id);
  s.dataset_id = std::move(dataset);
  tagforge::Query q;
  q.text = std::move(text);
  q.turn_index = 0;
  std::vector<tagforge::TagAnnotation> annotations;
  for (auto& tag : tags) annotations.push_back({tag, "about " + tag});
  q.raw_tags = std::move(annotations);
  s.queries.push_back(std::move(q));
  return s;
}

// Pool of single-turn normalized sessions named s0, s1, ...
inline tagforge::Dataset pool_of(const std::vector<std::vector<std::string>>& tag_sets,
                                 std::string dataset_id = "pool") {
  tagforge::Dataset d;
  d.dataset_id = std::move(dataset_id);
  for (std::size_t i = 0; i < tag_sets.size(); ++i) {
    d.sessions.push_back(tag_session("s" + std::to_string(i), tag_sets[i], d.dataset_id));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Scripted chat transport
// ---------------------------------------------------------------------------

inline tagforge::ChatOutcome ok_outcome(std::string content) {
  tagforge::ChatOutcome o;
  o.ok = true;
  o.content = std::move(content);
  return o;
}

inline tagforge::ChatOutcome retryable_outcome(std::string error = "status 503") {
  tagforge::ChatOutcome o;
  o.error = std::move(error);
  o.retryable = true;
  return o;
}

inline tagforge::ChatOutcome fatal_outcome(std::string error = "status 404") {
  tagforge::ChatOutcome o;
  o.error = std::move(error);
  return o;
}

inline tagforge::ChatOutcome auth_outcome() {
  tagforge::ChatOutcome o;
  o.error = "status 401";
  o.auth_failure = true;
  return o;
}

// Replays a fixed outcome script, or answers via a handler when set. Records
// every request. Thread-safe so parallel annotation can share one instance.
class ScriptedTransport : public tagforge::ChatTransport {
 public:
  std::function<tagforge::ChatOutcome(const tagforge::ChatRequest&)> handler;

  void push(tagforge::ChatOutcome outcome) { script_.push_back(std::move(outcome)); }

  tagforge::ChatOutcome complete(const tagforge::ChatRequest& request) override {
    std::lock_guard<std::mutex> lock(mu_);
    requests_.push_back(request);
    if (handler) return handler(request);
    if (script_.empty()) throw std::runtime_error("ScriptedTransport: script exhausted");
    tagforge::ChatOutcome out = std::move(script_.front());
    script_.pop_front();
    return out;
  }

  std::vector<tagforge::ChatRequest> requests() {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_;
  }
  std::size_t request_count() {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_.size();
  }

 private:
  std::mutex mu_;
  std::deque<tagforge::ChatOutcome> script_;
  std::vector<tagforge::ChatRequest> requests_;
};

// Collects sleep durations instead of sleeping.
struct SleepRecorder {
  std::vector<double> calls;
  tagforge::RateLimiter::Sleeper fn() {
    return [this](double s) { calls.push_back(s); };
  }
};

// ---------------------------------------------------------------------------
// Fixture embedding provider
// ---------------------------------------------------------------------------

// Returns hand-assigned unit vectors for known texts and hands out fresh
// basis vectors for anything else (stable per text). Throws when the basis
// runs out so an under-dimensioned fixture fails loudly instead of aliasing.
class FixedEmbedder : public tagforge::EmbeddingProvider {
 public:
  explicit FixedEmbedder(std::size_t dim, std::size_t first_free_axis = 0)
      : dim_(dim), next_axis_(first_free_axis) {}

  void set(const std::string& text, std::vector<double> v) {
    v.resize(dim_, 0.0);
    assigned_[text] = std::move(v);
  }

  std::string id() const override { return "fixture-d" + std::to_string(dim_); }
  std::size_t dim() const override { return dim_; }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    std::vector<std::vector<double>> out;
    for (const auto& text : texts) {
      auto it = assigned_.find(text);
      if (it == assigned_.end()) {
        if (next_axis_ >= dim_) {
          throw std::runtime_error("FixedEmbedder: basis exhausted for '" + text + "'");
        }
        std::vector<double> v(dim_, 0.0);
        v[next_axis_++] = 1.0;
        it = assigned_.emplace(text, std::move(v)).first;
      }
      out.push_back(it->second);
    }
    return out;
  }

 private:
  std::size_t dim_;
  std::size_t next_axis_;
  std::map<std::string, std::vector<double>> assigned_;
};

// ---------------------------------------------------------------------------
// Canonical normalization showcase fixture
// ---------------------------------------------------------------------------
/// A corpus exercising all three aggregation failure modes at once:
//   - lexical variants   ("Information Retrieval", "information_retrieval",
//                          and the typo "infomation retrieve")
//   - granularity variants (six phrasings of asking for information)
//   - co-occurring pairs  (mathematics + math problem; loop + for loop)
// Counts are chosen so every raw tag survives the default frequency filter
// (alpha = 20) and both tag pairs clear the default association thresholds
// (support >= 40, confidence >= 0.99) in exactly one direction.

struct ShowcaseFixture {
  tagforge::Dataset corpus;
  std::shared_ptr<FixedEmbedder> embedder;
};

inline ShowcaseFixture make_showcase_fixture() {
  ShowcaseFixture fx;
  fx.corpus.dataset_id = "showcase";
  std::size_t next = 0;
  auto add = [&](const std::vector<std::string>& tags, std::size_t copies) {
    for (std::size_t i = 0; i < copies; ++i) {
      tagforge::Session s;
      s.session_id = "sess-" + std::to_string(next);
      s.dataset_id = fx.corpus.dataset_id;
      tagforge::Query q;
      q.text = "query number " + std::to_string(next);
      q.turn_index = 0;
      std::vector<tagforge::TagAnnotation> annotations;
      for (const auto& tag : tags) annotations.push_back({tag, "explains " + tag});
      q.raw_tags = std::move(annotations);
      s.queries.push_back(std::move(q));
      fx.corpus.sessions.push_back(std::move(s));
      ++next;
    }
  };

  // Lexical variants: the first two share the stem key "inform retriev" and
  // merge in rule aggregation; the typo merges semantically.
  add({"Information Retrieval"}, 30);
  add({"information_retrieval"}, 25);
  add({"infomation retrieve"}, 21);

  // Granularity variants: six distinct stem keys, one semantic cluster. The
  // plain phrasing has the highest count and survives.
  add({"information request"}, 50);
  add({"request for information"}, 30);
  add({"request for additional information"}, 21);
  add({"request for more information"}, 22);
  add({"additional information request"}, 23);
  add({"specific information request"}, 24);

  // Co-occurring pairs. 50 of 50 mathematics queries also carry math problem
  // (confidence 1.0 -> mined); math problem appears alone 5 more times, so
  // the reverse direction is 50/55 and stays unmined. Same shape for loops.
  add({"mathematics", "math problem"}, 50);
  add({"math problem"}, 5);
  add({"loop", "for loop"}, 45);
  add({"loop"}, 3);

  // Hand-assigned embeddings for the twelve canonical surfaces. The lexical
  // survivor and the typo share an axis (cosine distance 0 < eps), the six
  // request phrasings share another, everything else is pairwise orthogonal.
  auto emb = std::make_shared<FixedEmbedder>(16, /*first_free_axis=*/8);
  auto axis = [](std::size_t i) {
    std::vector<double> v(16, 0.0);
    v[i] = 1.0;
    return v;
  };
  emb->set("information retrieval", axis(0));
  emb->set("infomation retrieve", axis(0));
  emb->set("information request", axis(1));
  emb->set("request for information", axis(1));
  emb->set("request for additional information", axis(1));
  emb->set("request for more information", axis(1));
  emb->set("additional information request", axis(1));
  emb->set("specific information request", axis(1));
  emb->set("mathematics", axis(2));
  emb->set("math problem", axis(3));
  emb->set("loop", axis(4));
  emb->set("for loop", axis(5));
  fx.embedder = std::move(emb);
  return fx;
}

// ---------------------------------------------------------------------------
// Synthetic pools
// ---------------------------------------------------------------------------

// Heavy-tailed pool: ~90% of sessions carry 1-3 tags, ~10% carry 10-40, tags
// drawn from a vocabulary of `vocab_size`. Used for covering-sampler checks.
inline tagforge::Dataset heavy_tail_pool(std::mt19937_64& rng, std::size_t n_sessions,
                                         std::size_t vocab_size) {
  std::vector<std::vector<std::string>> tag_sets;
  for (std::size_t i = 0; i < n_sessions; ++i) {
    const bool heavy = tagforge::uniform_below(rng, 10) == 0;
    const std::size_t want =
        heavy ? 10 + tagforge::uniform_below(rng, 31) : 1 + tagforge::uniform_below(rng, 3);
    std::set<std::string> tags;
    while (tags.size() < std::min(want, vocab_size)) {
      tags.insert("tag-" + std::to_string(tagforge::uniform_below(rng, vocab_size)));
    }
    tag_sets.emplace_back(tags.begin(), tags.end());
  }
  return pool_of(tag_sets);
}

// Stratified pool: `strata` groups over disjoint vocabularies; sessions in
// stratum k carry (strata - k) * 2 tags, `per_stratum` sessions each, richest
// first. Draws over it have strictly decreasing average tag counts.
inline tagforge::Dataset stratified_pool(std::size_t strata, std::size_t per_stratum) {
  std::vector<std::vector<std::string>> tag_sets;
  for (std::size_t k = 0; k < strata; ++k) {
    const std::size_t width = (strata - k) * 2;
    for (std::size_t s = 0; s < per_stratum; ++s) {
      std::vector<std::string> tags;
      for (std::size_t t = 0; t < width; ++t) {
        tags.push_back("s" + std::to_string(k) + "-v" + std::to_string(s) + "-t" +
                       std::to_string(t));
      }
      tag_sets.push_back(std::move(tags));
    }
  }
  return pool_of(tag_sets);
}

// Coverage-ladder pool: the vocabulary splits into `blocks` blocks of five
// tags; every session carries one full block, `copies` sessions per block,
// interleaved block 0, 1, ..., blocks-1, 0, 1, ... Every session has exactly
// five tags, so any subset averages exactly 5.0, and a coverage phase picks
// ceil(rate * blocks) sessions.
inline tagforge::Dataset block_pool(std::size_t blocks, std::size_t copies) {
  std::vector<std::vector<std::string>> tag_sets;
  for (std::size_t c = 0; c < copies; ++c) {
    for (std::size_t b = 0; b < blocks; ++b) {
      std::vector<std::string> tags;
      for (std::size_t t = 0; t < 5; ++t) {
        tags.push_back("b" + std::to_string(b) + "-t" + std::to_string(t));
      }
      tag_sets.push_back(std::move(tags));
    }
  }
  return pool_of(tag_sets);
}

}  // namespace testsup
