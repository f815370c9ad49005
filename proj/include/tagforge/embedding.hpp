#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace tagforge {

// All providers return one unit-L2-norm vector per input, same order, equal
// lengths within one provider.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Stable identity string; part of the disk cache key.
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

// Deterministic offline embedder: seeded character-trigram feature hashing,
// L2-normalized. Same input -> bit-identical output on any platform.
class LocalNgramProvider : public EmbeddingProvider {
 public:
  explicit LocalNgramProvider(std::size_t dim = 64, std::uint64_t seed = 1,
                              bool parallel = true);
  std::string id() const override;
  std::size_t dim() const override { return dim_; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  bool parallel_;
};

// HTTP embedding endpoint (POST {base_url}/v1/embeddings, bearer auth).
// Responses are L2-normalized on arrival. Transient failures retry with
// exponential backoff (1s doubling, capped at 60s); auth failures are fatal.
class RemoteEmbeddingProvider : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(std::string base_url, std::string model, std::string api_key,
                          std::size_t dim, int max_retries = 3,
                          std::function<void(double)> sleep_seconds = {});
  std::string id() const override;
  std::size_t dim() const override { return dim_; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  std::string base_url_;
  std::string model_;
  std::string api_key_;
  std::size_t dim_;
  int max_retries_;
  std::function<void(double)> sleep_seconds_;
};

// Write-through disk cache keyed by (provider id, tag). The cache file is
// append-only JSONL; a tag queried twice yields bit-identical vectors even
// across processes. Misses are appended in request order.
class CachedEmbedder {
 public:
  CachedEmbedder(std::shared_ptr<EmbeddingProvider> provider, std::string cache_path);

  // Embeds `tags`, serving hits from cache. Returns vectors in input order.
  std::vector<std::vector<double>> embed(const std::vector<std::string>& tags);

  std::size_t cache_hits() const { return hits_; }
  std::size_t cache_misses() const { return misses_; }
  const EmbeddingProvider& provider() const { return *provider_; }

 private:
  void load();

  std::shared_ptr<EmbeddingProvider> provider_;
  std::string cache_path_;
  std::map<std::string, std::vector<double>> cache_;  // key: provider id + '\n' + tag
  bool loaded_ = false;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace tagforge
