#include "lapis/session.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "lapis/error.hpp"

namespace lapis {

std::string to_string(SessionStatus s) { return s == SessionStatus::open ? "open" : "closed"; }

std::string to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::ok: return "ok";
    case RecordStatus::unparseable: return "unparseable";
    case RecordStatus::error: return "error";
  }
  return "error";
}

namespace {

RecordStatus parse_record_status(const std::string& s) {
  if (s == "ok") return RecordStatus::ok;
  if (s == "unparseable") return RecordStatus::unparseable;
  return RecordStatus::error;
}

HypothesisRecord record_from_json(const json& j) {
  HypothesisRecord r;
  r.record_id = j.at("record_id").get<std::string>();
  r.hypothesis = j.at("hypothesis").get<std::string>();
  r.strategy = j.at("strategy").get<std::string>();
  r.premises = premise_set_from_json(j.at("premises"));
  r.response = model_response_from_json(j.at("response"));
  r.status = parse_record_status(j.at("status").get<std::string>());
  r.error = j.value("error", "");
  r.submitted_at = j.value("submitted_at", "");
  r.completed_at = j.value("completed_at", "");
  return r;
}

std::string format_step_id(std::size_t n) { return "step-" + std::to_string(n); }

}  // namespace

json to_json(const HypothesisRecord& r) {
  return {{"record_id", r.record_id},
          {"hypothesis", r.hypothesis},
          {"strategy", r.strategy},
          {"premises", to_json(r.premises)},
          {"response", to_json(r.response)},
          {"status", to_string(r.status)},
          {"error", r.error},
          {"submitted_at", r.submitted_at},
          {"completed_at", r.completed_at}};
}

json to_json(const TimelineStep& s) {
  json hyps = json::array();
  for (const auto& h : s.hypotheses) hyps.push_back(to_json(h));
  return {{"step_id", s.step_id},
          {"context_delta", s.context_delta},
          {"cumulative_context", s.cumulative_context},
          {"created_at", s.created_at},
          {"hypotheses", hyps}};
}

json to_json(const InvestigationSession& s) {
  json steps = json::array();
  for (const auto& st : s.steps) steps.push_back(to_json(st));
  return {{"session_id", s.session_id},
          {"title", s.title},
          {"created_at", s.created_at},
          {"status", to_string(s.status)},
          {"steps", steps}};
}

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------

SessionStore::SessionStore(std::filesystem::path file) : file_(std::move(file)) {
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
}

void SessionStore::append(const json& event) {
  std::lock_guard lock(mu_);
  const std::string line = event.dump() + "\n";
  int fd = ::open(file_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw StorageError("cannot open session store " + file_.string());
  std::size_t written = 0;
  while (written < line.size()) {
    auto n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      ::close(fd);
      throw StorageError("write to session store failed");
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw StorageError("fsync of session store failed");
  }
  ::close(fd);
}

std::vector<json> SessionStore::replay() const {
  std::vector<json> events;
  if (!std::filesystem::exists(file_)) return events;
  const auto contents = read_file(file_);
  std::size_t start = 0, line_no = 0;
  while (start < contents.size()) {
    ++line_no;
    auto nl = contents.find('\n', start);
    const bool terminated = nl != std::string::npos;
    auto line = contents.substr(start, terminated ? nl - start : std::string::npos);
    start = terminated ? nl + 1 : contents.size();
    if (trim(line).empty()) continue;
    try {
      events.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      if (!terminated) break;  // torn final append
      throw ParseError(line_no, std::string("session store: ") + e.what());
    }
  }
  return events;
}

// ---------------------------------------------------------------------------

SessionService::SessionService(std::shared_ptr<SessionStore> store,
                               std::shared_ptr<const Retriever> retriever,
                               std::shared_ptr<const Evaluator> evaluator,
                               SessionServiceOptions options)
    : store_(std::move(store)),
      retriever_(std::move(retriever)),
      evaluator_(std::move(evaluator)),
      options_(std::move(options)) {
  if (!store_ || !evaluator_) throw InvalidInput("session service needs a store and an evaluator");
  if (!options_.clock) options_.clock = utc_now;
  validate(options_.default_strategy);
  for (const auto& e : store_->replay()) apply(e);
}

void SessionService::apply(const json& e) {
  const auto type = e.at("type").get<std::string>();
  const auto sid = e.at("session_id").get<std::string>();
  if (type == "session_created") {
    InvestigationSession s;
    s.session_id = sid;
    s.title = e.at("title").get<std::string>();
    s.created_at = e.at("created_at").get<std::string>();
    if (sessions_.count(sid)) throw Conflict("session " + sid + " created twice");
    sessions_.emplace(sid, std::move(s));
    order_.push_back(sid);
    session_mu_.emplace(sid, std::make_unique<std::mutex>());
    return;
  }
  auto& s = require(sid);
  if (type == "context_added") {
    TimelineStep step;
    step.step_id = e.at("step_id").get<std::string>();
    step.context_delta = e.at("context_delta").get<std::string>();
    step.created_at = e.at("created_at").get<std::string>();
    step.cumulative_context = s.steps.empty()
                                  ? step.context_delta
                                  : s.steps.back().cumulative_context + "\n\n" + step.context_delta;
    s.steps.push_back(std::move(step));
  } else if (type == "hypothesis_recorded") {
    const auto step_id = e.at("step_id").get<std::string>();
    for (auto& step : s.steps)
      if (step.step_id == step_id) {
        step.hypotheses.push_back(record_from_json(e.at("record")));
        return;
      }
    throw NotFound("step " + step_id + " of session " + sid);
  } else if (type == "session_closed") {
    s.status = SessionStatus::closed;
  } else {
    throw InvalidInput("unknown session event " + type);
  }
}

InvestigationSession& SessionService::require(const std::string& session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFound("unknown session " + session_id);
  return it->second;
}

std::mutex& SessionService::session_lock(const std::string& session_id) {
  std::lock_guard lock(state_mu_);
  auto it = session_mu_.find(session_id);
  if (it == session_mu_.end()) throw NotFound("unknown session " + session_id);
  return *it->second;
}

InvestigationSession SessionService::create_session(const std::string& title) {
  std::lock_guard lock(state_mu_);
  char id[16];
  std::snprintf(id, sizeof id, "S%06zu", sessions_.size() + 1);
  json event = {{"type", "session_created"},
                {"session_id", id},
                {"title", trim(title)},
                {"created_at", options_.clock()}};
  store_->append(event);
  apply(event);
  return sessions_.at(id);
}

TimelineStep SessionService::add_context(const std::string& session_id, const std::string& delta) {
  auto& smu = session_lock(session_id);
  std::lock_guard slock(smu);
  std::lock_guard lock(state_mu_);
  auto& s = require(session_id);
  if (s.status == SessionStatus::closed) throw StateError("session " + session_id + " is closed");
  auto text = trim(delta);
  if (text.empty()) throw InvalidInput("context delta is empty");
  json event = {{"type", "context_added"},
                {"session_id", session_id},
                {"step_id", format_step_id(s.steps.size() + 1)},
                {"context_delta", text},
                {"created_at", options_.clock()}};
  store_->append(event);
  apply(event);
  return s.steps.back();
}

HypothesisRecord SessionService::submit_hypothesis(const std::string& session_id,
                                                   const std::string& step_id,
                                                   const std::string& hypothesis,
                                                   std::optional<PromptStrategy> strategy) {
  auto& smu = session_lock(session_id);
  std::lock_guard slock(smu);

  const auto chosen = strategy.value_or(options_.default_strategy);
  validate(chosen);
  const auto text = trim(hypothesis);
  if (text.empty()) throw InvalidInput("hypothesis is empty");

  std::string cumulative;
  std::size_t record_no = 0;
  {
    std::lock_guard lock(state_mu_);
    auto& s = require(session_id);
    if (s.status == SessionStatus::closed) throw StateError("session " + session_id + " is closed");
    auto it = std::find_if(s.steps.begin(), s.steps.end(),
                           [&](const TimelineStep& st) { return st.step_id == step_id; });
    if (it == s.steps.end()) throw NotFound("unknown step " + step_id + " in session " + session_id);
    cumulative = it->cumulative_context;
    record_no = it->hypotheses.size() + 1;
  }

  HypothesisRecord rec;
  rec.record_id = step_id + "-h" + std::to_string(record_no);
  rec.hypothesis = text;
  rec.strategy = chosen.name();
  rec.submitted_at = options_.clock();

  const InvestigationContext context{cumulative};
  const Hypothesis h{text};
  try {
    std::optional<PremiseSet> premises;
    if (chosen.uses_cikr) {
      if (!retriever_) throw InvalidInput("strategy " + chosen.name() + " needs an index");
      premises = retriever_->retrieve({context, h, options_.k});
      rec.premises = *premises;
    }
    auto exemplars = select_exemplars(options_.exemplar_pool,
                                      static_cast<std::size_t>(chosen.shots),
                                      options_.exemplar_seed ^ fnv1a64(rec.record_id));
    const auto& templates = options_.templates ? *options_.templates : TemplateSet::builtin();
    auto bundle = build_prompt(chosen, context, h, premises, exemplars, templates);
    rec.response = evaluator_->assess(bundle);
    rec.status = rec.response.ok() ? RecordStatus::ok : RecordStatus::unparseable;
  } catch (const TransportError& e) {
    rec.status = RecordStatus::error;
    rec.error = e.what();
  }
  rec.completed_at = options_.clock();

  json event = {{"type", "hypothesis_recorded"},
                {"session_id", session_id},
                {"step_id", step_id},
                {"record", to_json(rec)}};
  std::lock_guard lock(state_mu_);
  store_->append(event);
  apply(event);
  return rec;
}

InvestigationSession SessionService::close_session(const std::string& session_id) {
  auto& smu = session_lock(session_id);
  std::lock_guard slock(smu);
  std::lock_guard lock(state_mu_);
  auto& s = require(session_id);
  if (s.status == SessionStatus::closed) return s;
  json event = {{"type", "session_closed"}, {"session_id", session_id}, {"closed_at", options_.clock()}};
  store_->append(event);
  apply(event);
  return s;
}

InvestigationSession SessionService::get(const std::string& session_id) const {
  std::lock_guard lock(state_mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFound("unknown session " + session_id);
  return it->second;
}

std::vector<InvestigationSession> SessionService::list() const {
  std::lock_guard lock(state_mu_);
  std::vector<InvestigationSession> out;
  for (const auto& id : order_) out.push_back(sessions_.at(id));
  return out;
}

}  // namespace lapis
