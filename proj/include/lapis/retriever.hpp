#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lapis/domain.hpp"
#include "lapis/embedding.hpp"
#include "lapis/io.hpp"
#include "lapis/knowledgebase.hpp"
#include "lapis/vector_index.hpp"

namespace lapis {

inline constexpr std::size_t kDefaultTopK = 5;

struct RetrievalQuery {
  InvestigationContext context;
  Hypothesis hypothesis;
  std::size_t k = kDefaultTopK;
};

struct Premise {
  std::string paragraph_id;
  SourceKind source_kind = SourceKind::textbook;
  std::optional<std::string> ref_no;
  std::string text;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  bool operator==(const Premise&) const = default;
};

using PremiseSet = std::vector<Premise>;

// Context, one blank line, hypothesis. An empty context yields the
// hypothesis alone.
std::string serialize_query(const RetrievalQuery& query);

inline constexpr std::string_view kNoPremisesMarker = "NO RELEVANT PREMISES FOUND";

// One numbered line per premise with a provenance suffix: "(Ref No: <ref>)"
// for court rulings, "(textbook)" or "(law article)" otherwise.
std::string format_premises(const PremiseSet& premises);

json to_json(const Premise& p);
Premise premise_from_json(const json& j);
json to_json(const PremiseSet& ps);
PremiseSet premise_set_from_json(const json& j);

// CIKR: embeds the serialized query and hydrates the top-k hits from the
// knowledgebase. Stateless over immutable inputs; the embedder cache is the
// only shared mutable state and is internally synchronized.
class Retriever {
 public:
  Retriever(KnowledgeBaseHandle kb, std::shared_ptr<const VectorIndex> index,
            std::shared_ptr<Embedder> embedder);

  PremiseSet retrieve(const RetrievalQuery& query) const;

  const KnowledgeBase& knowledgebase() const { return *kb_; }
  const VectorIndex& index() const { return *index_; }
  Embedder& embedder() const { return *embedder_; }

 private:
  KnowledgeBaseHandle kb_;
  std::shared_ptr<const VectorIndex> index_;
  std::shared_ptr<Embedder> embedder_;
};

inline PremiseSet retrieve_premises(const RetrievalQuery& query, const Retriever& retriever) {
  return retriever.retrieve(query);
}

// Loads corpus + index from an index directory and builds the matching
// provider from the recorded provider id.
std::shared_ptr<Retriever> open_retriever(const std::filesystem::path& index_dir,
                                          const RemoteEmbeddingConfig& remote = {});

}  // namespace lapis
