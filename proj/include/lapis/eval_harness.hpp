#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lapis/dataset.hpp"
#include "lapis/evaluator.hpp"
#include "lapis/prompting.hpp"
#include "lapis/retriever.hpp"

namespace lapis {

enum class F1Mode { binary_true, macro };

struct EvalConfig {
  std::string model = "mock";     // model column of the comparison table
  std::string method = "CILR-FT";  // method column, e.g. "CILR-FT (-DEXP)"
  PromptStrategy strategy = presets::CILR_ZS_CIKR;
  bool uses_cikr = true;
  Split split = Split::test;
  std::string service_id;
  GenerationParams params;
  std::size_t k = kDefaultTopK;
  std::uint64_t exemplar_seed = 0;
  std::vector<std::string> exclusions;  // e.g. "DEXP"
  F1Mode f1_mode = F1Mode::binary_true;
  std::size_t workers = 1;

  // Strategy with uses_cikr applied; non-preset combinations are marked as
  // ablation.
  PromptStrategy effective_strategy() const;
};

json to_json(const EvalConfig& c);
EvalConfig eval_config_from_json(const json& j);

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t unparseable = 0;       // counted in N, never in tp/tn
  std::size_t unparseable_true = 0;  // unparseable with a True ground truth

  std::size_t n() const { return tp + fp + tn + fn + unparseable; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

double accuracy(const ConfusionCounts& c);
// True is the positive class; an unparseable True instance is a miss.
double f1_true(const ConfusionCounts& c);
double f1_false(const ConfusionCounts& c);
double f1(const ConfusionCounts& c, F1Mode mode);

struct Metrics {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  json config;
  std::string dataset_sha256;
  F1Mode f1_mode = F1Mode::binary_true;
  std::map<Subject, Metrics> per_subject;
  Metrics total;
};

json to_json(const EvalReport& r);

using Prediction = std::pair<std::string, ModelResponse>;

// Scores one prediction per instance of `instances`. Unknown, duplicate or
// missing predictions are errors.
EvalReport score(const std::vector<Prediction>& predictions,
                 const std::vector<DataInstance>& instances, F1Mode mode = F1Mode::binary_true,
                 json config_echo = json::object());

std::string dataset_hash(const std::vector<DataInstance>& instances);

struct InstanceArtifact {
  std::string instance_id;
  std::string prompt_sha256;
  std::optional<std::size_t> retrieval_k;  // set iff a retrieval ran
  std::vector<std::string> premise_ids;
  ModelResponse response;
  std::string error;
};

json to_json(const InstanceArtifact& a);

struct EvalRun {
  EvalReport report;
  std::vector<InstanceArtifact> artifacts;  // dataset order
};

// retrieve (if CIKR) -> build prompt -> assess -> score over the configured
// split. Service failures past the retry cap become unparseable predictions.
EvalRun run_evaluation(const EvalConfig& config, const std::vector<DataInstance>& dataset,
                       const Retriever* retriever, const Evaluator& evaluator,
                       const std::vector<Exemplar>& exemplar_pool = {},
                       const TemplateSet& templates = TemplateSet::builtin());

struct AblationRun {
  EvalConfig config;
  std::shared_ptr<GenerationService> service;
  std::size_t retry_cap = 2;
};

struct AblationResult {
  std::vector<EvalReport> reports;  // input order, failed runs skipped
  std::vector<std::pair<std::string, std::string>> failures;  // (method, error)
  std::string table;
};

// Runs every config; a failing run is recorded and the rest continue.
AblationResult ablation_matrix(const std::vector<AblationRun>& runs,
                               const std::vector<DataInstance>& dataset, const Retriever* retriever,
                               const std::vector<Exemplar>& exemplar_pool = {});

// Model / Method / CIKR / per-subject ACC,F1 / Total, rows sorted by total
// accuracy descending (stable).
std::string render_comparison_table(const std::vector<EvalReport>& reports);
// The five standard ablation rows (all without CIKR
// The five ablation rows of the published comparison (all without CIKR
// except -DEXP).
std::vector<EvalConfig> ablation_presets(const std::string& model);

}  // namespace lapis
