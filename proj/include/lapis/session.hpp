#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lapis/evaluator.hpp"
#include "lapis/prompting.hpp"
#include "lapis/retriever.hpp"

namespace lapis {

enum class SessionStatus { open, closed };
enum class RecordStatus { ok, unparseable, error };

std::string to_string(SessionStatus s);
std::string to_string(RecordStatus s);

struct HypothesisRecord {
  std::string record_id;
  std::string hypothesis;
  std::string strategy;
  PremiseSet premises;
  ModelResponse response;
  RecordStatus status = RecordStatus::ok;
  std::string error;
  std::string submitted_at;
  std::string completed_at;

  bool operator==(const HypothesisRecord&) const = default;
};

struct TimelineStep {
  std::string step_id;
  std::string context_delta;
  std::string cumulative_context;
  std::string created_at;
  std::vector<HypothesisRecord> hypotheses;

  bool operator==(const TimelineStep&) const = default;
};

struct InvestigationSession {
  std::string session_id;
  std::string title;
  std::string created_at;
  std::vector<TimelineStep> steps;
  SessionStatus status = SessionStatus::open;

  bool operator==(const InvestigationSession&) const = default;
};

json to_json(const HypothesisRecord& r);
json to_json(const TimelineStep& s);
json to_json(const InvestigationSession& s);

// Append-only event log, one JSON event per line, fsynced per append.
// State is rebuilt by replaying the log; a torn final line is ignored.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path file);

  void append(const json& event);
  std::vector<json> replay() const;
  const std::filesystem::path& path() const { return file_; }

 private:
  std::filesystem::path file_;
  std::mutex mu_;
};

using Clock = std::function<std::string()>;
// UTC ISO-8601 with seconds.
std::string utc_now();

struct SessionServiceOptions {
  std::size_t k = kDefaultTopK;
  PromptStrategy default_strategy = presets::CILR_ZS_CIKR;
  std::vector<Exemplar> exemplar_pool;
  std::uint64_t exemplar_seed = 0;
  const TemplateSet* templates = nullptr;
  Clock clock = utc_now;
};

// Sessions hold an evolving context timeline; each hypothesis runs
// retrieve(cumulative context, h) then assess. Operations on one session are
// serialized; different sessions proceed concurrently.
class SessionService {
 public:
  SessionService(std::shared_ptr<SessionStore> store, std::shared_ptr<const Retriever> retriever,
                 std::shared_ptr<const Evaluator> evaluator, SessionServiceOptions options = {});

  InvestigationSession create_session(const std::string& title);
  TimelineStep add_context(const std::string& session_id, const std::string& delta);
  // Service failures produce a stored record with status error.
  HypothesisRecord submit_hypothesis(const std::string& session_id, const std::string& step_id,
                                     const std::string& hypothesis,
                                     std::optional<PromptStrategy> strategy = std::nullopt);
  InvestigationSession close_session(const std::string& session_id);

  InvestigationSession get(const std::string& session_id) const;
  std::vector<InvestigationSession> list() const;

  const Retriever* retriever() const { return retriever_.get(); }

 private:
  void apply(const json& event);
  std::mutex& session_lock(const std::string& session_id);
  InvestigationSession& require(const std::string& session_id);

  std::shared_ptr<SessionStore> store_;
  std::shared_ptr<const Retriever> retriever_;
  std::shared_ptr<const Evaluator> evaluator_;
  SessionServiceOptions options_;

  mutable std::mutex state_mu_;
  std::map<std::string, InvestigationSession> sessions_;
  std::vector<std::string> order_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_mu_;
};

}  // namespace lapis
