#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lapis/io.hpp"
#include "lapis/text.hpp"

namespace lapis {

enum class SourceKind { textbook, law_article, court_ruling };

inline constexpr SourceKind kAllSourceKinds[] = {SourceKind::textbook, SourceKind::law_article,
                                                 SourceKind::court_ruling};

std::string to_string(SourceKind kind);
std::optional<SourceKind> parse_source_kind(std::string_view s);

struct SourceDocument {
  std::string id;
  SourceKind source_kind = SourceKind::textbook;
  std::string title;
  std::optional<std::string> ref_no;  // court rulings only, e.g. "89do2087"
  std::string body;

  bool operator==(const SourceDocument&) const = default;
};

struct Paragraph {
  std::string id;  // "<doc_id>#<ordinal>"
  std::string doc_id;
  std::size_t ordinal = 0;
  std::string text;
  std::size_t token_count = 0;

  bool operator==(const Paragraph&) const = default;
};

struct KindStats {
  std::size_t paragraph_count = 0;
  std::size_t token_count = 0;
  bool operator==(const KindStats&) const = default;
};

struct CorpusStats {
  std::map<SourceKind, KindStats> per_kind;
  KindStats total;
  bool operator==(const CorpusStats&) const = default;
};

inline constexpr std::size_t kDefaultMaxTokens = 512;
inline constexpr std::size_t kMinMaxTokens = 32;

// Sections (blank-line separated) are never merged. Inside a section whole
// sentences are packed greedily up to max_tokens; a sentence longer than
// max_tokens becomes a paragraph of its own.
std::vector<Paragraph> chunk_document(const SourceDocument& doc, std::size_t max_tokens,
                                      const Tokenizer& tokenizer = *default_tokenizer());

// Immutable after construction; share via KnowledgeBaseHandle.
class KnowledgeBase {
 public:
  KnowledgeBase(std::vector<SourceDocument> documents, std::vector<Paragraph> paragraphs);

  const std::vector<SourceDocument>& documents() const { return documents_; }
  const std::vector<Paragraph>& paragraphs() const { return paragraphs_; }

  const SourceDocument* find_document(std::string_view id) const;
  const Paragraph* find_paragraph(std::string_view id) const;
  // Document owning a paragraph. The paragraph must belong to this corpus.
  const SourceDocument& document_of(const Paragraph& p) const;

  // documents.jsonl + paragraphs.jsonl under dir.
  void save(const std::filesystem::path& dir) const;
  static std::shared_ptr<const KnowledgeBase> load(const std::filesystem::path& dir);

  std::string serialize_documents() const;
  std::string serialize_paragraphs() const;

 private:
  std::vector<SourceDocument> documents_;
  std::vector<Paragraph> paragraphs_;
  std::map<std::string, std::size_t, std::less<>> doc_by_id_;
  std::map<std::string, std::size_t, std::less<>> para_by_id_;
};

using KnowledgeBaseHandle = std::shared_ptr<const KnowledgeBase>;

// Parses one corpus record. Throws ParseError naming line.
SourceDocument parse_source_document(const json& record, std::size_t line);
json to_json(const SourceDocument& doc);
json to_json(const Paragraph& p);

KnowledgeBaseHandle ingest_corpus(const std::filesystem::path& path,
                                  std::size_t max_tokens = kDefaultMaxTokens,
                                  const Tokenizer& tokenizer = *default_tokenizer());

CorpusStats corpus_statistics(const KnowledgeBase& kb);
json to_json(const CorpusStats& stats);

}  // namespace lapis
