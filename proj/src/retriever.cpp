#include "lapis/retriever.hpp"

#include "lapis/error.hpp"

namespace lapis {

std::string serialize_query(const RetrievalQuery& query) {
  auto context = trim(query.context.text);
  auto hypothesis = trim(query.hypothesis.text);
  if (context.empty()) return hypothesis;
  return context + "\n\n" + hypothesis;
}

std::string format_premises(const PremiseSet& premises) {
  if (premises.empty()) return std::string(kNoPremisesMarker);
  std::string out;
  for (std::size_t i = 0; i < premises.size(); ++i) {
    const auto& p = premises[i];
    if (i) out += "\n";
    out += std::to_string(i + 1) + ". " + p.text + " ";
    switch (p.source_kind) {
      case SourceKind::court_ruling: out += "(Ref No: " + p.ref_no.value_or("") + ")"; break;
      case SourceKind::textbook: out += "(textbook)"; break;
      case SourceKind::law_article: out += "(law article)"; break;
    }
  }
  return out;
}

json to_json(const Premise& p) {
  json j = {{"paragraph_id", p.paragraph_id},
            {"source_kind", to_string(p.source_kind)},
            {"text", p.text},
            {"score", p.score},
            {"rank", p.rank}};
  j["ref_no"] = p.ref_no ? json(*p.ref_no) : json(nullptr);
  return j;
}

Premise premise_from_json(const json& j) {
  Premise p;
  p.paragraph_id = j.at("paragraph_id").get<std::string>();
  auto kind = parse_source_kind(j.at("source_kind").get<std::string>());
  if (!kind) throw InvalidInput("unknown source_kind in premise");
  p.source_kind = *kind;
  if (j.contains("ref_no") && !j["ref_no"].is_null()) p.ref_no = j["ref_no"].get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.score = j.at("score").get<double>();
  p.rank = j.at("rank").get<std::size_t>();
  return p;
}

json to_json(const PremiseSet& ps) {
  json arr = json::array();
  for (const auto& p : ps) arr.push_back(to_json(p));
  return arr;
}

PremiseSet premise_set_from_json(const json& j) {
  PremiseSet ps;
  for (const auto& item : j) ps.push_back(premise_from_json(item));
  return ps;
}

Retriever::Retriever(KnowledgeBaseHandle kb, std::shared_ptr<const VectorIndex> index,
                     std::shared_ptr<Embedder> embedder)
    : kb_(std::move(kb)), index_(std::move(index)), embedder_(std::move(embedder)) {
  if (!kb_ || !index_ || !embedder_) throw InvalidInput("retriever needs kb, index and embedder");
  if (embedder_->provider().id() != index_->provider_id())
    throw Conflict("index was built with " + index_->provider_id() + ", embedder is " +
                   embedder_->provider().id());
}

PremiseSet Retriever::retrieve(const RetrievalQuery& query) const {
  if (trim(query.hypothesis.text).empty()) throw InvalidInput("hypothesis text is empty");
  if (query.k == 0) throw InvalidInput("k must be >= 1");
  auto vec = embedder_->embed(serialize_query(query));
  auto hits = index_->search(vec, query.k);
  PremiseSet out;
  out.reserve(hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const auto* para = kb_->find_paragraph(hits[i].paragraph_id);
    if (!para) throw NotFound("index references unknown paragraph " + hits[i].paragraph_id);
    const auto& doc = kb_->document_of(*para);
    out.push_back({para->id, doc.source_kind, doc.ref_no, para->text, hits[i].score, i + 1});
  }
  return out;
}

std::shared_ptr<Retriever> open_retriever(const std::filesystem::path& index_dir,
                                          const RemoteEmbeddingConfig& remote) {
  auto kb = KnowledgeBase::load(index_dir);
  auto index = std::make_shared<const VectorIndex>(VectorIndex::load(index_dir));
  auto provider = make_provider(index->provider_id(), index->dim(), remote);
  auto cache = std::make_shared<EmbeddingCache>();
  cache->load(index_dir / "embedding_cache.jsonl");
  auto embedder = std::make_shared<Embedder>(provider, cache);
  return std::make_shared<Retriever>(kb, index, embedder);
}

}  // namespace lapis
