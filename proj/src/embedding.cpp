#include "tagforge/embedding.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "tagforge/error.hpp"
#include "tagforge/kernels.hpp"

namespace tagforge {

using ordered_json = nlohmann::ordered_json;

LocalNgramProvider::LocalNgramProvider(std::size_t dim, std::uint64_t seed, bool parallel)
    : dim_(dim), seed_(seed), parallel_(parallel) {
  if (dim_ == 0) throw ArgumentError("LocalNgramProvider: dim must be positive");
}

std::string LocalNgramProvider::id() const {
  return "local-ngram-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
}

std::vector<std::vector<double>> LocalNgramProvider::embed(
    const std::vector<std::string>& texts) {
  kernels::Matrix m;
  if (parallel_) {
    kernels::embed_ngrams_parallel(texts, seed_, dim_, m);
  } else {
    kernels::embed_ngrams_serial(texts, seed_, dim_, m);
  }
  std::vector<std::vector<double>> out(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out[i].assign(m.row(i), m.row(i) + dim_);
  }
  return out;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string base_url, std::string model,
                                                 std::string api_key, std::size_t dim,
                                                 int max_retries,
                                                 std::function<void(double)> sleep_seconds)
    : base_url_(std::move(base_url)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      dim_(dim),
      max_retries_(max_retries),
      sleep_seconds_(std::move(sleep_seconds)) {
  if (!sleep_seconds_) {
    sleep_seconds_ = [](double s) {
      std::this_thread::sleep_for(std::chrono::duration<double>(s));
    };
  }
}

std::string RemoteEmbeddingProvider::id() const { return "remote-" + model_; }

std::vector<std::vector<double>> RemoteEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
  if (texts.empty()) return {};
  ordered_json body;
  body["model"] = model_;
  body["input"] = texts;
  const std::string payload = body.dump();

  double backoff = 1.0;
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    if (attempt > 0) {
      sleep_seconds_(backoff);
      backoff = std::min(backoff * 2.0, 60.0);
    }
    httplib::Client client(base_url_);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post("/v1/embeddings", headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw AuthError("embedding endpoint rejected credentials (HTTP " +
                      std::to_string(res->status) + ")");
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    ordered_json j = ordered_json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("data") || !j["data"].is_array() ||
        j["data"].size() != texts.size()) {
      last_error = "malformed embedding response";
      continue;
    }
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    bool ok = true;
    for (const auto& item : j["data"]) {
      if (!item.is_object() || !item.contains("embedding") || !item["embedding"].is_array()) {
        ok = false;
        break;
      }
      std::vector<double> v = item["embedding"].get<std::vector<double>>();
      if (v.size() != dim_) {
        ok = false;
        break;
      }
      double sq = 0.0;
      for (double x : v) sq += x * x;
      if (sq <= 0.0) {
        ok = false;
        break;
      }
      const double inv = 1.0 / std::sqrt(sq);
      for (double& x : v) x *= inv;
      out.push_back(std::move(v));
    }
    if (!ok) {
      last_error = "malformed embedding vector";
      continue;
    }
    return out;
  }
  throw Error("embedding request failed after retries: " + last_error);
}

CachedEmbedder::CachedEmbedder(std::shared_ptr<EmbeddingProvider> provider,
                               std::string cache_path)
    : provider_(std::move(provider)), cache_path_(std::move(cache_path)) {}

void CachedEmbedder::load() {
  loaded_ = true;
  std::ifstream in(cache_path_, std::ios::binary);
  if (!in) return;  // no cache yet
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("provider") || !j.contains("tag") ||
        !j.contains("vector")) {
      continue;  // ignore torn/foreign lines
    }
    cache_[j["provider"].get<std::string>() + '\n' + j["tag"].get<std::string>()] =
        j["vector"].get<std::vector<double>>();
  }
}

std::vector<std::vector<double>> CachedEmbedder::embed(const std::vector<std::string>& tags) {
  if (!loaded_) load();
  const std::string pid = provider_->id();

  std::vector<std::string> missing;
  for (const std::string& t : tags) {
    if (cache_.find(pid + '\n' + t) == cache_.end()) missing.push_back(t);
  }
  // Dedupe while preserving first-seen order so the provider sees each tag once.
  std::vector<std::string> unique_missing;
  {
    std::map<std::string, bool> seen;
    for (const std::string& t : missing) {
      if (!seen[t]) {
        seen[t] = true;
        unique_missing.push_back(t);
      }
    }
  }
  if (!unique_missing.empty()) {
    const auto vectors = provider_->embed(unique_missing);
    std::ofstream out(cache_path_, std::ios::binary | std::ios::app);
    for (std::size_t i = 0; i < unique_missing.size(); ++i) {
      cache_[pid + '\n' + unique_missing[i]] = vectors[i];
      if (out) {
        ordered_json j;
        j["provider"] = pid;
        j["tag"] = unique_missing[i];
        j["vector"] = vectors[i];
        out << j.dump() << '\n';
      }
    }
    misses_ += unique_missing.size();
  }

  std::vector<std::vector<double>> out;
  out.reserve(tags.size());
  for (const std::string& t : tags) {
    auto it = cache_.find(pid + '\n' + t);
    if (it == cache_.end()) throw Error("embedding cache miss after fill: " + t);
    out.push_back(it->second);
  }
  hits_ += tags.size() - missing.size();
  return out;
}

}  // namespace tagforge
