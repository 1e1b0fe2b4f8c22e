#include "lapis/dataset.hpp"

#include <algorithm>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>

#include "lapis/error.hpp"

namespace lapis {

std::string to_string(Subject s) {
  switch (s) {
    case Subject::criminal_law: return "criminal_law";
    case Subject::criminal_procedure_law: return "criminal_procedure_law";
    case Subject::crime_investigation: return "crime_investigation";
  }
  return "criminal_law";
}

std::optional<Subject> parse_subject(std::string_view s) {
  for (auto x : kAllSubjects)
    if (to_string(x) == s) return x;
  return std::nullopt;
}

std::string display_name(Subject s) {
  switch (s) {
    case Subject::criminal_law: return "Criminal Law";
    case Subject::criminal_procedure_law: return "Criminal Procedure Law";
    case Subject::crime_investigation: return "Crime Investigation";
  }
  return "";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view s) {
  for (auto x : kAllSplits)
    if (to_string(x) == s) return x;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// records

ExamQuestion exam_question_from_json(const json& j, std::size_t line) {
  try {
    ExamQuestion q;
    q.id = j.at("id").get<std::string>();
    q.year = j.at("year").get<int>();
    auto subject = parse_subject(j.at("subject").get<std::string>());
    if (!subject) throw ParseError(line, "unknown subject");
    q.subject = *subject;
    q.context = j.value("context", "");
    for (const auto& o : j.at("options"))
      q.options.push_back({o.at("text").get<std::string>(), o.at("is_true").get<bool>()});
    if (q.options.size() < 2) throw ParseError(line, "question " + q.id + " has fewer than 2 options");
    if (q.year < kFirstExamYear || q.year > kLastExamYear)
      throw ParseError(line, "question " + q.id + " has year outside 2013..2023");
    return q;
  } catch (const json::exception& e) {
    throw ParseError(line, e.what());
  }
}

std::vector<ExamQuestion> load_exam(const std::filesystem::path& file) {
  std::vector<ExamQuestion> out;
  std::set<std::string> ids;
  for (const auto& rec : read_jsonl(file)) {
    auto q = exam_question_from_json(rec.value, rec.line);
    if (!ids.insert(q.id).second) throw ParseError(rec.line, "duplicate question id " + q.id);
    out.push_back(std::move(q));
  }
  return out;
}

namespace {

json rationale_to_json(const StoredRationale& r) {
  return {{"id", r.id},
          {"text", r.rationale.text},
          {"cited_ref_nos", r.rationale.cited_ref_nos},
          {"rationale_type", to_string(r.rationale.rationale_type)},
          {"predicted", to_string(r.predicted)},
          {"provenance", r.provenance},
          {"history", r.history}};
}

StoredRationale rationale_from_json(const json& j) {
  StoredRationale r;
  r.id = j.at("id").get<std::string>();
  r.rationale.text = j.at("text").get<std::string>();
  r.rationale.cited_ref_nos = j.value("cited_ref_nos", std::vector<std::string>{});
  auto t = parse_rationale_type(j.at("rationale_type").get<std::string>());
  if (!t) throw InvalidInput("unknown rationale_type");
  r.rationale.rationale_type = *t;
  r.predicted = assessment_from_bool(j.at("predicted").get<std::string>() == "True");
  r.provenance = j.value("provenance", json::object());
  r.history = j.value("history", std::vector<std::string>{});
  return r;
}

}  // namespace

json to_json(const DataInstance& d) {
  json rationales = json::array();
  for (const auto& r : d.rationales) rationales.push_back(rationale_to_json(r));
  return {{"id", d.id},
          {"question_id", d.question_id},
          {"option_index", d.option_index},
          {"year", d.year},
          {"subject", to_string(d.subject)},
          {"context", d.context.text},
          {"hypothesis", d.hypothesis.text},
          {"premises", d.premises ? to_json(*d.premises) : json(nullptr)},
          {"ground_truth", to_string(d.ground_truth)},
          {"rationales", rationales},
          {"split", d.split ? json(to_string(*d.split)) : json(nullptr)}};
}

DataInstance data_instance_from_json(const json& j, std::size_t line) {
  try {
    DataInstance d;
    d.id = j.at("id").get<std::string>();
    d.question_id = j.value("question_id", "");
    d.option_index = j.value("option_index", std::size_t{0});
    d.year = j.at("year").get<int>();
    auto subject = parse_subject(j.at("subject").get<std::string>());
    if (!subject) throw ParseError(line, "unknown subject");
    d.subject = *subject;
    d.context.text = j.value("context", "");
    d.hypothesis.text = j.at("hypothesis").get<std::string>();
    if (j.contains("premises") && !j["premises"].is_null())
      d.premises = premise_set_from_json(j["premises"]);
    const auto& gt = j.at("ground_truth");
    d.ground_truth = gt.is_boolean() ? assessment_from_bool(gt.get<bool>())
                                     : assessment_from_bool(gt.get<std::string>() == "True");
    for (const auto& r : j.value("rationales", json::array()))
      d.rationales.push_back(rationale_from_json(r));
    if (j.contains("split") && !j["split"].is_null()) {
      auto s = parse_split(j["split"].get<std::string>());
      if (!s) throw ParseError(line, "unknown split");
      d.split = *s;
    }
    return d;
  } catch (const json::exception& e) {
    throw ParseError(line, e.what());
  } catch (const InvalidInput& e) {
    throw ParseError(line, e.what());
  }
}

std::vector<DataInstance> load_dataset(const std::filesystem::path& file) {
  std::vector<DataInstance> out;
  std::set<std::string> ids;
  for (const auto& rec : read_jsonl(file)) {
    auto d = data_instance_from_json(rec.value, rec.line);
    if (!ids.insert(d.id).second) throw ParseError(rec.line, "duplicate instance id " + d.id);
    out.push_back(std::move(d));
  }
  return out;
}

void save_dataset(const std::filesystem::path& file, const std::vector<DataInstance>& instances) {
  std::string out;
  for (const auto& d : instances) out += to_json(d).dump() + "\n";
  write_file_atomic(file, out);
}

// ---------------------------------------------------------------------------
// construction

std::vector<DataInstance> explode_mcq(const ExamQuestion& q) {
  std::vector<DataInstance> out;
  out.reserve(q.options.size());
  for (std::size_t i = 0; i < q.options.size(); ++i) {
    DataInstance d;
    d.id = q.id + "-" + std::to_string(i + 1);
    d.question_id = q.id;
    d.option_index = i;
    d.year = q.year;
    d.subject = q.subject;
    d.context.text = q.context;
    d.hypothesis.text = q.options[i].text;
    d.ground_truth = assessment_from_bool(q.options[i].is_true);
    out.push_back(std::move(d));
  }
  return out;
}

Split split_for_year(int year) {
  if (year < kFirstExamYear || year > kLastExamYear)
    throw InvalidInput("year " + std::to_string(year) + " is outside 2013..2023");
  if (year <= 2019) return Split::train;
  if (year == 2020) return Split::dev;
  return Split::test;
}

std::vector<DataInstance> split_by_year(std::vector<DataInstance> instances) {
  for (auto& d : instances) d.split = split_for_year(d.year);
  return instances;
}

json to_json(const StrategyResponse& r) {
  return {{"strategy", r.strategy.name()},
          {"prompt_sha256", r.prompt_sha256},
          {"params", to_json(r.params)},
          {"service", r.service_id},
          {"response", r.response ? to_json(*r.response) : json(nullptr)},
          {"error", r.error}};
}

std::vector<StrategyResponse> generate_rationales(DataInstance& instance,
                                                  const std::vector<PromptStrategy>& strategies,
                                                  const Retriever* retriever,
                                                  const Evaluator& evaluator,
                                                  const RationaleGenerationOptions& options) {
  if (!instance.split || *instance.split == Split::test)
    throw InvalidInput("rationales are generated for train/dev instances only (" + instance.id + ")");
  const auto& templates = options.templates ? *options.templates : TemplateSet::builtin();

  std::optional<PremiseSet> premises;
  std::vector<StrategyResponse> out;
  for (const auto& strategy : strategies) {
    if (strategy.uses_cikr && !premises) {
      if (!retriever) throw InvalidInput("strategy " + strategy.name() + " needs an index");
      premises = retriever->retrieve({instance.context, instance.hypothesis, options.k});
      instance.premises = premises;
    }
    auto exemplars = select_exemplars(options.exemplar_pool, static_cast<std::size_t>(strategy.shots),
                                      options.seed ^ fnv1a64(instance.id));
    auto bundle = build_prompt(strategy, instance.context, instance.hypothesis,
                               strategy.uses_cikr ? premises : std::nullopt, exemplars, templates);
    StrategyResponse r;
    r.strategy = strategy;
    r.prompt_sha256 = sha256_hex(bundle.rendered);
    r.params = evaluator.options().params;
    r.service_id = evaluator.service().id();
    try {
      r.response = evaluator.assess(bundle);
    } catch (const TransportError& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<StoredRationale> filter_by_correctness(const DataInstance& instance,
                                                   const std::vector<StrategyResponse>& responses) {
  std::vector<StoredRationale> kept;
  for (const auto& r : responses) {
    if (!r.response || !r.response->ok()) continue;
    if (*r.response->assessment != instance.ground_truth) continue;
    StoredRationale s;
    s.rationale = *r.response->rationale;
    s.rationale.rationale_type = rationale_type_of(r.strategy);
    s.id = instance.id + "/" + to_string(s.rationale.rationale_type);
    s.predicted = *r.response->assessment;
    s.provenance = {{"strategy", r.strategy.name()},
                    {"prompt_sha256", r.prompt_sha256},
                    {"params", to_json(r.params)},
                    {"service", r.service_id}};
    kept.push_back(std::move(s));
  }
  return kept;
}

void attach_rationales(DataInstance& instance, std::vector<StoredRationale> retained) {
  for (auto& r : retained) {
    auto same = [&](const StoredRationale& x) { return x.id == r.id; };
    if (std::none_of(instance.rationales.begin(), instance.rationales.end(), same))
      instance.rationales.push_back(std::move(r));
  }
}

std::vector<std::pair<std::string, StrategyResponse>> build_rationales(
    std::vector<DataInstance>& instances, const std::vector<PromptStrategy>& strategies,
    const Retriever* retriever, const Evaluator& evaluator,
    const RationaleGenerationOptions& options, std::size_t workers) {
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < instances.size(); ++i)
    if (instances[i].split && *instances[i].split != Split::test) todo.push_back(i);

  std::vector<std::vector<StrategyResponse>> responses(instances.size());
  auto run_one = [&](std::size_t i) {
    responses[i] = generate_rationales(instances[i], strategies, retriever, evaluator, options);
    attach_rationales(instances[i], filter_by_correctness(instances[i], responses[i]));
  };
  workers = std::max<std::size_t>(1, workers);
  for (std::size_t start = 0; start < todo.size(); start += workers) {
    std::vector<std::future<void>> batch;
    for (std::size_t j = start; j < std::min(todo.size(), start + workers); ++j)
      batch.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, run_one,
                                 todo[j]));
    for (auto& f : batch) f.get();
  }

  std::vector<std::pair<std::string, StrategyResponse>> log;
  for (auto i : todo)
    for (auto& r : responses[i]) log.emplace_back(instances[i].id, std::move(r));
  return log;
}

// ---------------------------------------------------------------------------
// curation

CurationEntry curation_entry_from_json(const json& j, std::size_t line) {
  try {
    CurationEntry e;
    e.entry_id = j.at("entry_id").get<std::string>();
    auto op = j.at("op").get<std::string>();
    if (op == "revise") e.op = CurationOp::revise;
    else if (op == "annotate") e.op = CurationOp::annotate;
    else throw ParseError(line, "op must be revise or annotate");
    e.instance_id = j.at("instance_id").get<std::string>();
    if (e.op == CurationOp::revise) e.rationale_id = j.at("rationale_id").get<std::string>();
    e.text = trim(j.at("text").get<std::string>());
    if (e.text.empty()) throw ParseError(line, "curation text is empty");
    e.curator = j.value("curator", "");
    return e;
  } catch (const json::exception& ex) {
    throw ParseError(line, ex.what());
  }
}

std::vector<CurationEntry> load_curation(const std::filesystem::path& file) {
  std::vector<CurationEntry> out;
  for (const auto& rec : read_jsonl(file)) out.push_back(curation_entry_from_json(rec.value, rec.line));
  return out;
}

std::vector<DataInstance> merge_expert_curation(std::vector<DataInstance> instances,
                                                const std::vector<CurationEntry>& entries) {
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < instances.size(); ++i) by_id[instances[i].id] = i;

  std::vector<std::string> unknown, absent, leaking;
  for (const auto& e : entries) {
    auto it = by_id.find(e.instance_id);
    if (it == by_id.end()) {
      unknown.push_back(e.instance_id);
      continue;
    }
    const auto& inst = instances[it->second];
    if (inst.split == Split::test) leaking.push_back(e.instance_id);
    if (e.op == CurationOp::revise &&
        std::none_of(inst.rationales.begin(), inst.rationales.end(),
                     [&](const StoredRationale& r) { return r.id == e.rationale_id; }))
      absent.push_back(e.rationale_id);
  }
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  if (!unknown.empty()) throw NotFound("curation references unknown instances: " + join(unknown));
  if (!absent.empty()) throw NotFound("revisions target absent rationales: " + join(absent));
  if (!leaking.empty()) throw InvalidInput("curation targets test instances: " + join(leaking));

  for (const auto& e : entries) {
    auto& inst = instances[by_id[e.instance_id]];
    if (e.op == CurationOp::revise) {
      auto& r = *std::find_if(inst.rationales.begin(), inst.rationales.end(),
                              [&](const StoredRationale& x) { return x.id == e.rationale_id; });
      if (r.rationale.text == e.text) continue;
      r.history.push_back(r.rationale.text);
      r.rationale.text = e.text;
      r.rationale.cited_ref_nos = extract_ref_nos(e.text);
      r.provenance["revised_by"] = e.entry_id;
      if (!e.curator.empty()) r.provenance["curator"] = e.curator;
    } else {
      auto id = inst.id + "/DEXP-ANN/" + e.entry_id;
      auto it = std::find_if(inst.rationales.begin(), inst.rationales.end(),
                             [&](const StoredRationale& x) { return x.id == id; });
      if (it != inst.rationales.end()) {
        if (it->rationale.text != e.text) {
          it->history.push_back(it->rationale.text);
          it->rationale.text = e.text;
          it->rationale.cited_ref_nos = extract_ref_nos(e.text);
        }
        continue;
      }
      StoredRationale r;
      r.id = id;
      r.rationale = {e.text, extract_ref_nos(e.text), RationaleType::DEXP_ANN};
      r.predicted = inst.ground_truth;
      r.provenance = {{"curation_entry", e.entry_id}};
      if (!e.curator.empty()) r.provenance["curator"] = e.curator;
      inst.rationales.push_back(std::move(r));
    }
  }
  return instances;
}

std::vector<DataInstance> without_expert_curation(std::vector<DataInstance> instances) {
  std::vector<DataInstance> out;
  for (auto& d : instances) {
    bool annotated = std::any_of(d.rationales.begin(), d.rationales.end(), [](const auto& r) {
      return r.rationale.rationale_type == RationaleType::DEXP_ANN;
    });
    if (annotated) continue;
    for (auto& r : d.rationales) {
      if (r.history.empty()) continue;
      r.rationale.text = r.history.front();
      r.rationale.cited_ref_nos = extract_ref_nos(r.rationale.text);
      r.history.clear();
      r.provenance.erase("revised_by");
      r.provenance.erase("curator");
    }
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// export and statistics

json to_json(const SftRecord& r) {
  return {{"instance_id", r.instance_id},
          {"rationale_id", r.rationale_id},
          {"rationale_type", r.rationale_type},
          {"input", r.input},
          {"output", r.output}};
}

std::vector<SftRecord> export_sft(const std::vector<DataInstance>& instances, Split split,
                                  const TemplateSet& templates) {
  if (split == Split::test) throw InvalidInput("the test split cannot be exported");
  std::vector<SftRecord> out;
  for (const auto& d : instances) {
    if (d.split != split || d.rationales.empty()) continue;
    auto bundle = build_prompt(presets::CILR_ZS_CIKR, d.context, d.hypothesis,
                               d.premises.value_or(PremiseSet{}), {}, templates);
    for (const auto& r : d.rationales)
      out.push_back({d.id, r.id, to_string(r.rationale.rationale_type), bundle.rendered,
                     render_answer(d.ground_truth, r.rationale.text)});
  }
  return out;
}

std::size_t StatsCell::rationale_total() const {
  std::size_t n = 0;
  for (const auto& [t, c] : rationales) n += c;
  return n;
}

DatasetStats dataset_statistics(const std::vector<DataInstance>& instances) {
  DatasetStats s;
  for (auto subject : kAllSubjects) s.initial_by_subject[subject] = 0;
  for (auto split : kAllSplits) {
    s.split_totals[split] = {};
    for (auto subject : kAllSubjects) s.cells[{split, subject}] = {};
  }
  auto add = [](StatsCell& cell, const DataInstance& d) {
    cell.instances += 1;
    for (const auto& r : d.rationales) cell.rationales[r.rationale.rationale_type] += 1;
  };
  for (const auto& d : instances) {
    s.initial += 1;
    s.initial_by_subject[d.subject] += 1;
    if (!d.split) continue;
    add(s.cells[{*d.split, d.subject}], d);
    add(s.split_totals[*d.split], d);
    add(s.total, d);
  }
  return s;
}

json to_json(const DatasetStats& s) {
  auto cell_json = [](const StatsCell& c) {
    json r = json::object();
    for (const auto& [t, n] : c.rationales) r[to_string(t)] = n;
    return json{{"instances", c.instances}, {"rationales", r}, {"rationale_total", c.rationale_total()}};
  };
  json j = {{"initial", s.initial}};
  for (const auto& [subject, n] : s.initial_by_subject) j["initial_by_subject"][to_string(subject)] = n;
  for (auto split : kAllSplits) {
    json sj = {{"total", cell_json(s.split_totals.at(split))}};
    for (auto subject : kAllSubjects) sj[to_string(subject)] = cell_json(s.cells.at({split, subject}));
    j["splits"][to_string(split)] = sj;
  }
  j["total"] = cell_json(s.total);
  return j;
}

std::string render_stats_table(const DatasetStats& s) {
  static constexpr RationaleType kTypes[] = {
      RationaleType::GPT4_VP_ZS,   RationaleType::GPT4_IRAC_ZS, RationaleType::GPT4_IRAC_1S,
      RationaleType::GPT4_CILR_ZS, RationaleType::GPT4_CILR_1S, RationaleType::GPT4_CILR_3S,
      RationaleType::DEXP_ANN};
  std::vector<std::string> header = {"", "Initial", "Train"};
  for (auto t : kTypes) header.push_back("train:" + to_string(t));
  header.push_back("Dev");
  for (auto t : kTypes) header.push_back("dev:" + to_string(t));
  header.push_back("Test");

  auto row_for = [&](const std::string& label, std::size_t initial, const StatsCell& tr,
                     const StatsCell& dv, const StatsCell& te) {
    std::vector<std::string> row = {label, std::to_string(initial), std::to_string(tr.instances)};
    auto count = [](const StatsCell& c, RationaleType t) {
      auto it = c.rationales.find(t);
      return std::to_string(it == c.rationales.end() ? 0 : it->second);
    };
    for (auto t : kTypes) row.push_back(count(tr, t));
    row.push_back(std::to_string(dv.instances));
    for (auto t : kTypes) row.push_back(count(dv, t));
    row.push_back(std::to_string(te.instances));
    return row;
  };

  std::vector<std::vector<std::string>> rows = {header};
  for (auto subject : kAllSubjects)
    rows.push_back(row_for(display_name(subject), s.initial_by_subject.at(subject),
                           s.cells.at({Split::train, subject}), s.cells.at({Split::dev, subject}),
                           s.cells.at({Split::test, subject})));
  rows.push_back(row_for("All Subject Areas", s.initial, s.split_totals.at(Split::train),
                         s.split_totals.at(Split::dev), s.split_totals.at(Split::test)));

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream out;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) out << " | ";
      out << (c == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[c])) << r[c];
    }
    out << "\n";
  }
  out << "All rationales: train " << s.split_totals.at(Split::train).rationale_total() << ", dev "
      << s.split_totals.at(Split::dev).rationale_total() << ", test "
      << s.split_totals.at(Split::test).rationale_total() << "\n";
  return out.str();
}

}  // namespace lapis
