#pragma once

#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "lapis/domain.hpp"
#include "lapis/generation.hpp"
#include "lapis/prompting.hpp"

namespace lapis {

enum class RationaleType {
  GPT4_VP_ZS,
  GPT4_IRAC_ZS,
  GPT4_IRAC_1S,
  GPT4_CILR_ZS,
  GPT4_CILR_1S,
  GPT4_CILR_3S,
  DEXP_ANN,
  LIVE,
};

inline constexpr RationaleType kAllRationaleTypes[] = {
    RationaleType::GPT4_VP_ZS,   RationaleType::GPT4_IRAC_ZS, RationaleType::GPT4_IRAC_1S,
    RationaleType::GPT4_CILR_ZS, RationaleType::GPT4_CILR_1S, RationaleType::GPT4_CILR_3S,
    RationaleType::DEXP_ANN,     RationaleType::LIVE};

std::string to_string(RationaleType t);
std::optional<RationaleType> parse_rationale_type(std::string_view s);
RationaleType rationale_type_of(const PromptStrategy& s);

struct Rationale {
  std::string text;
  std::vector<std::string> cited_ref_nos;  // "89do2087", ...
  RationaleType rationale_type = RationaleType::LIVE;
  bool operator==(const Rationale&) const = default;
};

// Every "Ref No: <digits>do<digits>" citation, in order of first appearance.
std::vector<std::string> extract_ref_nos(std::string_view text);

enum class ParseStatus { ok, unparseable };

struct ModelResponse {
  std::string raw;
  std::optional<Assessment> assessment;
  std::optional<Rationale> rationale;
  ParseStatus parse_status = ParseStatus::unparseable;

  bool ok() const { return parse_status == ParseStatus::ok; }
  bool operator==(const ModelResponse&) const = default;
};

json to_json(const ModelResponse& r);
ModelResponse model_response_from_json(const json& j);

struct LabelSynonyms {
  std::vector<std::string> true_labels{"true"};
  std::vector<std::string> false_labels{"false"};

  static LabelSynonyms from(const TemplateSet& t) { return {t.true_labels, t.false_labels}; }
};

// Reads the first "ASSESSMENT:" line (case-insensitive; markdown emphasis and
// code fences tolerated) and the text after the first "RATIONALE:" marker
// that follows it. Never throws; failures give parse_status unparseable.
ModelResponse parse_response(std::string raw, const LabelSynonyms& labels = {});

struct EvaluatorOptions {
  GenerationParams params;
  std::size_t retry_cap = 2;  // extra attempts after a transport failure
  std::size_t max_in_flight = 4;
  LabelSynonyms labels;
  RationaleType rationale_type = RationaleType::LIVE;
};

// f: one generation request per call, retrying only transport failures.
class Evaluator {
 public:
  Evaluator(std::shared_ptr<GenerationService> service, EvaluatorOptions options = {});

  // Throws TransportError once retry_cap retries are exhausted.
  ModelResponse assess(const PromptBundle& bundle) const;

  const EvaluatorOptions& options() const { return options_; }
  GenerationService& service() const { return *service_; }

 private:
  std::shared_ptr<GenerationService> service_;
  EvaluatorOptions options_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

inline ModelResponse assess_hypothesis(const PromptBundle& bundle, const Evaluator& evaluator) {
  return evaluator.assess(bundle);
}

}  // namespace lapis
