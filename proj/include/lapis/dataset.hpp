#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lapis/domain.hpp"
#include "lapis/evaluator.hpp"
#include "lapis/prompting.hpp"
#include "lapis/retriever.hpp"

namespace lapis {

enum class Subject { criminal_law, criminal_procedure_law, crime_investigation };
inline constexpr Subject kAllSubjects[] = {Subject::criminal_law, Subject::criminal_procedure_law,
                                           Subject::crime_investigation};
std::string to_string(Subject s);
std::optional<Subject> parse_subject(std::string_view s);
// Column heading used in report tables.
std::string display_name(Subject s);

enum class Split { train, dev, test };
inline constexpr Split kAllSplits[] = {Split::train, Split::dev, Split::test};
std::string to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

inline constexpr int kFirstExamYear = 2013;
inline constexpr int kLastExamYear = 2023;

struct ExamOption {
  std::string text;
  bool is_true = false;
};

struct ExamQuestion {
  std::string id;
  int year = kFirstExamYear;
  Subject subject = Subject::criminal_law;
  std::string context;
  std::vector<ExamOption> options;
};

ExamQuestion exam_question_from_json(const json& j, std::size_t line = 0);
std::vector<ExamQuestion> load_exam(const std::filesystem::path& file);

// A rationale attached to an instance, with the provenance needed to
// re-check it.
struct StoredRationale {
  std::string id;
  Rationale rationale;
  Assessment predicted = Assessment::True;  // assessment that came with it
  json provenance = json::object();         // strategy, prompt hash, params, curation
  std::vector<std::string> history;         // earlier texts, oldest first

  bool operator==(const StoredRationale&) const = default;
};

struct DataInstance {
  std::string id;
  std::string question_id;
  std::size_t option_index = 0;
  int year = kFirstExamYear;
  Subject subject = Subject::criminal_law;
  InvestigationContext context;
  Hypothesis hypothesis;
  std::optional<PremiseSet> premises;
  Assessment ground_truth = Assessment::True;
  std::vector<StoredRationale> rationales;
  std::optional<Split> split;

  bool operator==(const DataInstance&) const = default;
};

json to_json(const DataInstance& d);
DataInstance data_instance_from_json(const json& j, std::size_t line = 0);
std::vector<DataInstance> load_dataset(const std::filesystem::path& file);
void save_dataset(const std::filesystem::path& file, const std::vector<DataInstance>& instances);

// One instance per option, ids "<question id>-<option number from 1>".
std::vector<DataInstance> explode_mcq(const ExamQuestion& question);

// train 2013-2019, dev 2020, test 2021-2023.
Split split_for_year(int year);
std::vector<DataInstance> split_by_year(std::vector<DataInstance> instances);

struct StrategyResponse {
  PromptStrategy strategy;
  std::string prompt_sha256;
  GenerationParams params;
  std::string service_id;
  std::optional<ModelResponse> response;  // empty when the service failed
  std::string error;
};

json to_json(const StrategyResponse& r);

struct RationaleGenerationOptions {
  std::vector<Exemplar> exemplar_pool;
  std::uint64_t seed = 0;
  std::size_t k = kDefaultTopK;
  const TemplateSet* templates = nullptr;  // builtin "en" when null
};

// One response per strategy. CIKR strategies attach the retrieved premise set
// to the instance. Service failures are recorded per strategy.
std::vector<StrategyResponse> generate_rationales(DataInstance& instance,
                                                  const std::vector<PromptStrategy>& strategies,
                                                  const Retriever* retriever,
                                                  const Evaluator& evaluator,
                                                  const RationaleGenerationOptions& options);

// Keeps parsed responses whose assessment equals the ground truth, tagged
// with the strategy's rationale type.
std::vector<StoredRationale> filter_by_correctness(const DataInstance& instance,
                                                   const std::vector<StrategyResponse>& responses);

// Appends retained rationales not yet present (matched by id).
void attach_rationales(DataInstance& instance, std::vector<StoredRationale> retained);

// Runs generate -> filter -> attach over every train/dev instance, up to
// `workers` instances at a time. Returns every response for auditing.
std::vector<std::pair<std::string, StrategyResponse>> build_rationales(
    std::vector<DataInstance>& instances, const std::vector<PromptStrategy>& strategies,
    const Retriever* retriever, const Evaluator& evaluator,
    const RationaleGenerationOptions& options, std::size_t workers = 1);

enum class CurationOp { revise, annotate };

struct CurationEntry {
  std::string entry_id;
  CurationOp op = CurationOp::annotate;
  std::string instance_id;
  std::string rationale_id;  // revise only
  std::string text;
  std::string curator;
};

std::vector<CurationEntry> load_curation(const std::filesystem::path& file);
CurationEntry curation_entry_from_json(const json& j, std::size_t line = 0);

// Revisions replace text and keep the old text in history; annotations add
// DEXP-ANN rationales. Applying the same entries again changes nothing.
// Validates everything before mutating.
std::vector<DataInstance> merge_expert_curation(std::vector<DataInstance> instances,
                                                const std::vector<CurationEntry>& entries);

// Drops instances holding expert annotations and restores the original text
// of revised rationales.
std::vector<DataInstance> without_expert_curation(std::vector<DataInstance> instances);

struct SftRecord {
  std::string instance_id;
  std::string rationale_id;
  std::string rationale_type;
  std::string input;
  std::string output;
};

json to_json(const SftRecord& r);

// One record per (instance, rationale) of the split; test is refused.
std::vector<SftRecord> export_sft(const std::vector<DataInstance>& instances, Split split,
                                  const TemplateSet& templates = TemplateSet::builtin());

struct StatsCell {
  std::size_t instances = 0;
  std::map<RationaleType, std::size_t> rationales;
  std::size_t rationale_total() const;
  bool operator==(const StatsCell&) const = default;
};

struct DatasetStats {
  std::size_t initial = 0;  // every instance, split or not
  std::map<Subject, std::size_t> initial_by_subject;
  std::map<std::pair<Split, Subject>, StatsCell> cells;
  std::map<Split, StatsCell> split_totals;
  StatsCell total;

  bool operator==(const DatasetStats&) const = default;
};

DatasetStats dataset_statistics(const std::vector<DataInstance>& instances);
json to_json(const DatasetStats& s);
// Text table of instance and rationale counts per subject and split.
std::string render_stats_table(const DatasetStats& s);

}  // namespace lapis
