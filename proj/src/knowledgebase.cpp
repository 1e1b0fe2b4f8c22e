#include "lapis/knowledgebase.hpp"

#include <set>

#include "lapis/error.hpp"

namespace lapis {

std::string to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::textbook: return "textbook";
    case SourceKind::law_article: return "law_article";
    case SourceKind::court_ruling: return "court_ruling";
  }
  return "textbook";
}

std::optional<SourceKind> parse_source_kind(std::string_view s) {
  for (auto k : kAllSourceKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::vector<Paragraph> chunk_document(const SourceDocument& doc, std::size_t max_tokens,
                                      const Tokenizer& tokenizer) {
  if (max_tokens < kMinMaxTokens)
    throw InvalidInput("max_tokens must be >= " + std::to_string(kMinMaxTokens));

  std::vector<std::string> texts;
  for (const auto& section : split_sections(doc.body)) {
    std::string current;
    for (auto& sentence : split_sentences(normalize_text(section))) {
      if (current.empty()) {
        current = std::move(sentence);
        continue;
      }
      std::string candidate = current + " " + sentence;
      if (tokenizer.count(candidate) <= max_tokens) {
        current = std::move(candidate);
      } else {
        texts.push_back(std::move(current));
        current = std::move(sentence);
      }
    }
    if (!current.empty()) texts.push_back(std::move(current));
  }
  if (texts.empty()) texts.push_back(normalize_text(doc.body));

  std::vector<Paragraph> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Paragraph p;
    p.doc_id = doc.id;
    p.ordinal = i;
    p.id = doc.id + "#" + std::to_string(i);
    p.token_count = tokenizer.count(texts[i]);
    p.text = std::move(texts[i]);
    out.push_back(std::move(p));
  }
  return out;
}

KnowledgeBase::KnowledgeBase(std::vector<SourceDocument> documents,
                             std::vector<Paragraph> paragraphs)
    : documents_(std::move(documents)), paragraphs_(std::move(paragraphs)) {
  for (std::size_t i = 0; i < documents_.size(); ++i)
    if (!doc_by_id_.emplace(documents_[i].id, i).second)
      throw Conflict("duplicate document id " + documents_[i].id);
  for (std::size_t i = 0; i < paragraphs_.size(); ++i) {
    const auto& p = paragraphs_[i];
    if (!doc_by_id_.count(p.doc_id))
      throw InvalidInput("paragraph " + p.id + " references unknown document " + p.doc_id);
    if (!para_by_id_.emplace(p.id, i).second) throw Conflict("duplicate paragraph id " + p.id);
  }
}

const SourceDocument* KnowledgeBase::find_document(std::string_view id) const {
  auto it = doc_by_id_.find(id);
  return it == doc_by_id_.end() ? nullptr : &documents_[it->second];
}

const Paragraph* KnowledgeBase::find_paragraph(std::string_view id) const {
  auto it = para_by_id_.find(id);
  return it == para_by_id_.end() ? nullptr : &paragraphs_[it->second];
}

const SourceDocument& KnowledgeBase::document_of(const Paragraph& p) const {
  return documents_[doc_by_id_.find(p.doc_id)->second];
}

json to_json(const SourceDocument& doc) {
  json j = {{"id", doc.id},
            {"source_kind", to_string(doc.source_kind)},
            {"title", doc.title},
            {"body", doc.body}};
  if (doc.ref_no) j["ref_no"] = *doc.ref_no;
  return j;
}

json to_json(const Paragraph& p) {
  return {{"id", p.id},
          {"doc_id", p.doc_id},
          {"ordinal", p.ordinal},
          {"text", p.text},
          {"token_count", p.token_count}};
}

SourceDocument parse_source_document(const json& record, std::size_t line) {
  auto require_string = [&](const char* key) -> std::string {
    auto it = record.find(key);
    if (it == record.end()) throw ParseError(line, std::string("missing field '") + key + "'");
    if (!it->is_string()) throw ParseError(line, std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
  };
  SourceDocument doc;
  doc.id = require_string("id");
  if (trim(doc.id).empty()) throw ParseError(line, "empty id");
  auto kind = parse_source_kind(require_string("source_kind"));
  if (!kind) throw ParseError(line, "unknown source_kind");
  doc.source_kind = *kind;
  doc.title = require_string("title");
  doc.body = require_string("body");
  if (trim(doc.body).empty()) throw ParseError(line, "empty body");
  if (auto it = record.find("ref_no"); it != record.end() && !it->is_null()) {
    if (!it->is_string() || trim(it->get<std::string>()).empty())
      throw ParseError(line, "ref_no must be a non-empty string");
    doc.ref_no = trim(it->get<std::string>());
  }
  if (doc.ref_no.has_value() != (doc.source_kind == SourceKind::court_ruling))
    throw ParseError(line, "ref_no is required for court rulings and only for them");
  return doc;
}

KnowledgeBaseHandle ingest_corpus(const std::filesystem::path& path, std::size_t max_tokens,
                                  const Tokenizer& tokenizer) {
  if (!std::filesystem::exists(path)) throw NotFound("corpus not found: " + path.string());
  auto records = read_jsonl(path);
  if (records.empty()) throw InvalidInput("corpus is empty: " + path.string());

  std::vector<SourceDocument> docs;
  std::vector<Paragraph> paragraphs;
  std::set<std::string, std::less<>> seen;
  for (const auto& rec : records) {
    auto doc = parse_source_document(rec.value, rec.line);
    if (!seen.insert(doc.id).second) throw ParseError(rec.line, "duplicate id '" + doc.id + "'");
    for (auto& p : chunk_document(doc, max_tokens, tokenizer)) paragraphs.push_back(std::move(p));
    docs.push_back(std::move(doc));
  }
  return std::make_shared<const KnowledgeBase>(std::move(docs), std::move(paragraphs));
}

std::string KnowledgeBase::serialize_documents() const {
  std::string out;
  for (const auto& d : documents_) out += to_json(d).dump() + "\n";
  return out;
}

std::string KnowledgeBase::serialize_paragraphs() const {
  std::string out;
  for (const auto& p : paragraphs_) out += to_json(p).dump() + "\n";
  return out;
}

void KnowledgeBase::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "documents.jsonl", serialize_documents());
  write_file_atomic(dir / "paragraphs.jsonl", serialize_paragraphs());
}

std::shared_ptr<const KnowledgeBase> KnowledgeBase::load(const std::filesystem::path& dir) {
  std::vector<SourceDocument> docs;
  for (const auto& rec : read_jsonl(dir / "documents.jsonl"))
    docs.push_back(parse_source_document(rec.value, rec.line));
  std::vector<Paragraph> paragraphs;
  for (const auto& rec : read_jsonl(dir / "paragraphs.jsonl")) {
    try {
      Paragraph p;
      p.id = rec.value.at("id").get<std::string>();
      p.doc_id = rec.value.at("doc_id").get<std::string>();
      p.ordinal = rec.value.at("ordinal").get<std::size_t>();
      p.text = rec.value.at("text").get<std::string>();
      p.token_count = rec.value.at("token_count").get<std::size_t>();
      paragraphs.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(rec.line, e.what());
    }
  }
  return std::make_shared<const KnowledgeBase>(std::move(docs), std::move(paragraphs));
}

CorpusStats corpus_statistics(const KnowledgeBase& kb) {
  CorpusStats stats;
  for (auto k : kAllSourceKinds) stats.per_kind[k] = {};
  for (const auto& p : kb.paragraphs()) {
    auto& ks = stats.per_kind[kb.document_of(p).source_kind];
    ks.paragraph_count += 1;
    ks.token_count += p.token_count;
  }
  for (const auto& [kind, ks] : stats.per_kind) {
    stats.total.paragraph_count += ks.paragraph_count;
    stats.total.token_count += ks.token_count;
  }
  return stats;
}

json to_json(const CorpusStats& stats) {
  json j = json::object();
  for (const auto& [kind, ks] : stats.per_kind)
    j[to_string(kind)] = {{"paragraphs", ks.paragraph_count}, {"tokens", ks.token_count}};
  j["total"] = {{"paragraphs", stats.total.paragraph_count}, {"tokens", stats.total.token_count}};
  return j;
}

}  // namespace lapis
