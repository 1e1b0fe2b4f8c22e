#pragma once

#include <atomic>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lapis/embedding.hpp"
#include "lapis/error.hpp"
#include "lapis/knowledgebase.hpp"

namespace lapis {

struct IndexEntry {
  std::string paragraph_id;
  std::vector<double> values;
};

struct SearchHit {
  std::string paragraph_id;
  double score = 0.0;
  bool operator==(const SearchHit&) const = default;
};

// Cosine similarity with a zero-norm side scoring 0.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Exact top-k cosine search. Immutable after construction; search() is safe
// to call concurrently.
class VectorIndex {
 public:
  VectorIndex(std::string provider_id, std::size_t dim, std::vector<IndexEntry> entries);
  VectorIndex(const VectorIndex& other);

  const std::string& provider_id() const { return provider_id_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<IndexEntry>& entries() const { return entries_; }

  // Scores sorted descending, ties by ascending paragraph_id; min(k, size())
  // hits. Query dim must equal dim(); k must be >= 1.
  std::vector<SearchHit> search(std::span<const double> query, std::size_t k) const;
  std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t k) const {
    return search(query.values, k);
  }

  // Number of search() calls served so far.
  std::size_t search_count() const { return searches_.load(); }

  // meta.json {provider_id, dim, count} + entries.jsonl.
  void save(const std::filesystem::path& dir) const;
  static VectorIndex load(const std::filesystem::path& dir);

 private:
  std::string provider_id_;
  std::size_t dim_;
  std::vector<IndexEntry> entries_;
  std::vector<double> norms_;
  mutable std::atomic<std::size_t> searches_{0};
};

// Provider failed mid-build. Embeddings computed so far stay in the cache, so
// rerunning resumes from `completed`.
struct IndexBuildError : TransportError {
  IndexBuildError(std::size_t completed, std::size_t total, const std::string& cause)
      : TransportError("index build stopped after " + std::to_string(completed) + "/" +
                       std::to_string(total) + " paragraphs: " + cause),
        completed(completed) {}
  std::size_t completed;
};

VectorIndex build_index(const KnowledgeBase& kb, Embedder& embedder);

// Builds against the corpus stored in dir, reusing and updating
// dir/embedding_cache.jsonl. Errors with Conflict when dir already holds an
// index of another dim.
VectorIndex build_index_in(const std::filesystem::path& dir, Embedder& embedder);

}  // namespace lapis
