#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace lapis {

struct EmbeddingVector {
  std::vector<double> values;
  std::string provider_id;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Stable identifier; encodes every parameter that changes the output.
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  // Throws TransportError on provider failure.
  virtual std::vector<double> compute(const std::string& text) = 0;
};

// Signed feature hashing over lowercase word tokens, L2-normalized.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dim = 256);
  std::string id() const override;
  std::size_t dim() const override { return dim_; }
  std::vector<double> compute(const std::string& text) override;

 private:
  std::size_t dim_;
};

struct RemoteEmbeddingConfig {
  std::string endpoint;  // base URL, e.g. "http://localhost:8000"
  std::string path = "/v1/embeddings";
  std::string model;
  std::size_t dim = 0;
  std::string api_key;  // from LAPIS_PROVIDER_KEY
  std::chrono::seconds timeout{30};
};

// OpenAI-compatible embeddings endpoint.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit RemoteEmbeddingProvider(RemoteEmbeddingConfig config);
  std::string id() const override;
  std::size_t dim() const override { return config_.dim; }
  std::vector<double> compute(const std::string& text) override;

 private:
  RemoteEmbeddingConfig config_;
};

// Builds a provider from a name ("hash", "remote") or a recorded provider id
// ("hash-v1:dim=64").
std::shared_ptr<EmbeddingProvider> make_provider(const std::string& name_or_id, std::size_t dim,
                                                 const RemoteEmbeddingConfig& remote = {});

// Keyed by (provider_id, sha256(text)). Concurrent reads, serialized writes.
class EmbeddingCache {
 public:
  std::optional<std::vector<double>> get(const std::string& provider_id,
                                         const std::string& text_hash) const;
  void put(const std::string& provider_id, const std::string& text_hash,
           std::vector<double> values);
  std::size_t size() const;

  void load(const std::filesystem::path& file);
  void save(const std::filesystem::path& file) const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::pair<std::string, std::string>, std::vector<double>> entries_;
};

class Embedder {
 public:
  explicit Embedder(std::shared_ptr<EmbeddingProvider> provider,
                    std::shared_ptr<EmbeddingCache> cache = std::make_shared<EmbeddingCache>());

  // Empty or whitespace-only text -> InvalidInput. Provider failures
  // propagate as TransportError.
  EmbeddingVector embed(const std::string& text);

  const EmbeddingProvider& provider() const { return *provider_; }
  EmbeddingCache& cache() { return *cache_; }
  std::size_t provider_calls() const { return provider_calls_.load(); }

 private:
  std::shared_ptr<EmbeddingProvider> provider_;
  std::shared_ptr<EmbeddingCache> cache_;
  std::atomic<std::size_t> provider_calls_{0};
};

}  // namespace lapis
