#include "lapis/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lapis/io.hpp"

namespace lapis {

namespace {

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine_with_norms(std::span<const double> a, double na, std::span<const double> b,
                         double nb) {
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("dimension mismatch");
  return cosine_with_norms(a, l2_norm(a), b, l2_norm(b));
}

VectorIndex::VectorIndex(std::string provider_id, std::size_t dim, std::vector<IndexEntry> entries)
    : provider_id_(std::move(provider_id)), dim_(dim), entries_(std::move(entries)) {
  if (dim_ == 0) throw InvalidInput("index dim must be positive");
  norms_.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (e.values.size() != dim_)
      throw InvalidInput("entry " + e.paragraph_id + " has dim " + std::to_string(e.values.size()) +
                         ", index dim is " + std::to_string(dim_));
    for (double x : e.values)
      if (!std::isfinite(x)) throw InvalidInput("entry " + e.paragraph_id + " is not finite");
    norms_.push_back(l2_norm(e.values));
  }
}

VectorIndex::VectorIndex(const VectorIndex& other)
    : provider_id_(other.provider_id_),
      dim_(other.dim_),
      entries_(other.entries_),
      norms_(other.norms_) {}

std::vector<SearchHit> VectorIndex::search(std::span<const double> query, std::size_t k) const {
  if (k == 0) throw InvalidInput("k must be >= 1");
  if (query.size() != dim_)
    throw InvalidInput("query dim " + std::to_string(query.size()) + " != index dim " +
                       std::to_string(dim_));
  searches_.fetch_add(1);
  if (entries_.empty()) return {};

  const double qn = l2_norm(query);
  std::vector<double> scores(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i)
    scores[i] = cosine_with_norms(query, qn, entries_[i].values, norms_[i]);

  std::vector<std::size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return entries_[a].paragraph_id < entries_[b].paragraph_id;
                    });
  std::vector<SearchHit> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    hits.push_back({entries_[order[i]].paragraph_id, scores[order[i]]});
  return hits;
}

void VectorIndex::save(const std::filesystem::path& dir) const {
  json meta = {{"provider_id", provider_id_}, {"dim", dim_}, {"count", entries_.size()}};
  std::string entries;
  for (const auto& e : entries_)
    entries += json{{"paragraph_id", e.paragraph_id}, {"vector", e.values}}.dump() + "\n";
  write_file_atomic(dir / "entries.jsonl", entries);
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

VectorIndex VectorIndex::load(const std::filesystem::path& dir) {
  json meta;
  try {
    meta = json::parse(read_file(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("meta.json: ") + e.what());
  }
  std::vector<IndexEntry> entries;
  for (const auto& rec : read_jsonl(dir / "entries.jsonl")) {
    try {
      entries.push_back({rec.value.at("paragraph_id").get<std::string>(),
                         rec.value.at("vector").get<std::vector<double>>()});
    } catch (const json::exception& e) {
      throw ParseError(rec.line, e.what());
    }
  }
  if (entries.size() != meta.value("count", std::size_t{0}))
    throw InvalidInput("index count mismatch in " + dir.string());
  return VectorIndex(meta.at("provider_id").get<std::string>(), meta.at("dim").get<std::size_t>(),
                     std::move(entries));
}

VectorIndex build_index(const KnowledgeBase& kb, Embedder& embedder) {
  std::vector<IndexEntry> entries;
  entries.reserve(kb.paragraphs().size());
  const auto total = kb.paragraphs().size();
  for (const auto& p : kb.paragraphs()) {
    try {
      entries.push_back({p.id, embedder.embed(p.text).values});
    } catch (const TransportError& e) {
      throw IndexBuildError(entries.size(), total, e.what());
    }
  }
  return VectorIndex(embedder.provider().id(), embedder.provider().dim(), std::move(entries));
}

VectorIndex build_index_in(const std::filesystem::path& dir, Embedder& embedder) {
  const auto meta_path = dir / "meta.json";
  if (std::filesystem::exists(meta_path)) {
    auto meta = json::parse(read_file(meta_path));
    auto existing_dim = meta.at("dim").get<std::size_t>();
    if (existing_dim != embedder.provider().dim())
      throw Conflict("index in " + dir.string() + " has dim " + std::to_string(existing_dim) +
                     ", provider produces " + std::to_string(embedder.provider().dim()));
  }
  auto kb = KnowledgeBase::load(dir);
  const auto cache_path = dir / "embedding_cache.jsonl";
  embedder.cache().load(cache_path);
  try {
    auto index = build_index(*kb, embedder);
    embedder.cache().save(cache_path);
    index.save(dir);
    return index;
  } catch (const IndexBuildError&) {
    embedder.cache().save(cache_path);
    throw;
  }
}

}  // namespace lapis
