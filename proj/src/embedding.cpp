#include "lapis/embedding.hpp"

#include <cmath>
#include <mutex>

#include "httplib.h"
#include "lapis/error.hpp"
#include "lapis/io.hpp"
#include "lapis/text.hpp"

namespace lapis {

namespace {

bool has_word_char(const std::string& tok) {
  for (unsigned char c : tok)
    if (std::isalnum(c) || c >= 0x80) return true;
  return false;
}

}  // namespace

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw InvalidInput("embedding dim must be positive");
}

std::string HashingEmbedder::id() const { return "hash-v1:dim=" + std::to_string(dim_); }

std::vector<double> HashingEmbedder::compute(const std::string& text) {
  auto tokens = default_tokenizer()->tokenize(normalize_text(text));
  std::vector<std::string> words;
  for (auto& t : tokens)
    if (has_word_char(t)) words.push_back(to_lower_ascii(t));
  if (words.empty()) words = std::move(tokens);

  std::vector<double> v(dim_, 0.0);
  for (const auto& w : words) {
    auto h = fnv1a64(w);
    double sign = (h >> 63) ? -1.0 : 1.0;
    v[h % dim_] += sign;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    // every feature cancelled; fall back to a fixed unit vector
    v[fnv1a64(text) % dim_] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config)
    : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw InvalidInput("remote provider needs an endpoint");
  if (config_.dim == 0) throw InvalidInput("remote provider needs a positive dim");
}

std::string RemoteEmbeddingProvider::id() const {
  return "remote:" + config_.model + ":dim=" + std::to_string(config_.dim);
}

std::vector<double> RemoteEmbeddingProvider::compute(const std::string& text) {
  httplib::Client client(config_.endpoint);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  json body = {{"model", config_.model}, {"input", text}};
  auto res = client.Post(config_.path, headers, body.dump(), "application/json");
  if (!res) throw TransportError("embedding request failed: " + httplib::to_string(res.error()));
  if (res->status >= 500 || res->status == 429)
    throw TransportError("embedding provider returned HTTP " + std::to_string(res->status));
  if (res->status != 200)
    throw InvalidInput("embedding provider rejected input: HTTP " + std::to_string(res->status));
  std::vector<double> values;
  try {
    values = json::parse(res->body).at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed embedding response: ") + e.what());
  }
  if (values.size() != config_.dim)
    throw InvalidInput("provider returned dim " + std::to_string(values.size()) + ", expected " +
                       std::to_string(config_.dim));
  return values;
}

std::shared_ptr<EmbeddingProvider> make_provider(const std::string& name_or_id, std::size_t dim,
                                                 const RemoteEmbeddingConfig& remote) {
  if (name_or_id == "hash") return std::make_shared<HashingEmbedder>(dim);
  if (name_or_id.rfind("hash-v1:dim=", 0) == 0)
    return std::make_shared<HashingEmbedder>(std::stoul(name_or_id.substr(12)));
  if (name_or_id == "remote" || name_or_id.rfind("remote:", 0) == 0) {
    auto cfg = remote;
    if (cfg.dim == 0) cfg.dim = dim;
    return std::make_shared<RemoteEmbeddingProvider>(cfg);
  }
  throw InvalidInput("unknown embedding provider '" + name_or_id + "'");
}

std::optional<std::vector<double>> EmbeddingCache::get(const std::string& provider_id,
                                                       const std::string& text_hash) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find({provider_id, text_hash});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(const std::string& provider_id, const std::string& text_hash,
                         std::vector<double> values) {
  std::unique_lock lock(mu_);
  entries_[{provider_id, text_hash}] = std::move(values);
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

void EmbeddingCache::load(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) return;
  auto records = read_jsonl(file);
  std::unique_lock lock(mu_);
  for (const auto& rec : records) {
    try {
      entries_[{rec.value.at("provider_id").get<std::string>(),
                rec.value.at("sha256").get<std::string>()}] =
          rec.value.at("values").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw ParseError(rec.line, e.what());
    }
  }
}

void EmbeddingCache::save(const std::filesystem::path& file) const {
  std::string out;
  {
    std::shared_lock lock(mu_);
    for (const auto& [key, values] : entries_)
      out += json{{"provider_id", key.first}, {"sha256", key.second}, {"values", values}}.dump() +
             "\n";
  }
  write_file_atomic(file, out);
}

Embedder::Embedder(std::shared_ptr<EmbeddingProvider> provider,
                   std::shared_ptr<EmbeddingCache> cache)
    : provider_(std::move(provider)), cache_(std::move(cache)) {
  if (!provider_) throw InvalidInput("embedder needs a provider");
  if (!cache_) cache_ = std::make_shared<EmbeddingCache>();
}

EmbeddingVector Embedder::embed(const std::string& text) {
  if (trim(text).empty()) throw InvalidInput("cannot embed empty text");
  const auto pid = provider_->id();
  const auto key = sha256_hex(text);
  if (auto hit = cache_->get(pid, key)) return {std::move(*hit), pid};

  provider_calls_.fetch_add(1);
  auto values = provider_->compute(text);
  if (values.size() != provider_->dim())
    throw InvalidInput("provider " + pid + " returned wrong dim");
  for (double x : values)
    if (!std::isfinite(x)) throw InvalidInput("provider " + pid + " returned a non-finite value");
  cache_->put(pid, key, values);
  return {std::move(values), pid};
}

}  // namespace lapis
