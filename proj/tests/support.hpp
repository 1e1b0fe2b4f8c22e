#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace lapis::test {

inline std::filesystem::path source_dir() { return LAPIS_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& name) {
  return source_dir() / "data" / "fixtures" / name;
}

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("lapis-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Small deterministic generators for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t size(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

  std::string word() {
    static const char* kWords[] = {"knife",   "witness", "wound",  "arrest", "warrant", "intent",
                                   "victim",  "suspect", "court",  "search", "seizure", "motive",
                                   "quarrel", "bleeding", "heart", "police", "statute", "ruling"};
    return kWords[size(0, std::size(kWords) - 1)];
  }

  std::string sentence(std::size_t min_words = 3, std::size_t max_words = 12) {
    std::string s;
    auto n = size(min_words, max_words);
    for (std::size_t i = 0; i < n; ++i) {
      if (i) s += ' ';
      s += word();
    }
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s + ".";
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace lapis::test

#include "lapis/knowledgebase.hpp"
#include "lapis/retriever.hpp"
#include "lapis/vector_index.hpp"

namespace lapis::test {

inline std::shared_ptr<Retriever> make_retriever(const std::string& corpus_fixture,
                                                 std::size_t dim = 256) {
  auto kb = ingest_corpus(fixture(corpus_fixture));
  auto embedder = std::make_shared<Embedder>(make_provider("hash", dim));
  auto index = std::make_shared<const VectorIndex>(build_index(*kb, *embedder));
  return std::make_shared<Retriever>(kb, index, embedder);
}

}  // namespace lapis::test
