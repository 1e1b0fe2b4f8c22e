#include "lapis/eval_harness.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <set>
#include <sstream>

#include "lapis/error.hpp"

namespace lapis {

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::string to_string(F1Mode m) { return m == F1Mode::macro ? "macro" : "binary_true"; }

}  // namespace

PromptStrategy EvalConfig::effective_strategy() const {
  PromptStrategy s = strategy;
  s.uses_cikr = uses_cikr;
  const auto& p = all_presets();
  s.ablation = std::find(p.begin(), p.end(), PromptStrategy{s.method, s.shots, s.uses_cikr}) == p.end();
  return s;
}

json to_json(const EvalConfig& c) {
  return {{"model", c.model},
          {"method", c.method},
          {"strategy", c.effective_strategy().name()},
          {"uses_cikr", c.uses_cikr},
          {"split", to_string(c.split)},
          {"service", c.service_id},
          {"params", to_json(c.params)},
          {"k", c.k},
          {"exemplar_seed", c.exemplar_seed},
          {"exclusions", c.exclusions},
          {"f1_mode", to_string(c.f1_mode)}};
}

EvalConfig eval_config_from_json(const json& j) {
  EvalConfig c;
  c.model = j.value("model", c.model);
  c.method = j.value("method", c.method);
  if (j.contains("strategy")) c.strategy = strategy_from_json(j["strategy"]);
  c.uses_cikr = j.value("uses_cikr", c.strategy.uses_cikr);
  if (j.contains("split")) {
    auto s = parse_split(j["split"].get<std::string>());
    if (!s) throw InvalidInput("unknown split in eval config");
    c.split = *s;
  }
  c.service_id = j.value("service", c.service_id);
  if (j.contains("params")) c.params = generation_params_from_json(j["params"]);
  c.k = j.value("k", c.k);
  if (c.k == 0) throw InvalidInput("k must be >= 1");
  c.exemplar_seed = j.value("exemplar_seed", c.exemplar_seed);
  c.exclusions = j.value("exclusions", c.exclusions);
  auto mode = j.value("f1_mode", std::string("binary_true"));
  if (mode == "macro") c.f1_mode = F1Mode::macro;
  else if (mode == "binary_true") c.f1_mode = F1Mode::binary_true;
  else throw InvalidInput("f1_mode must be binary_true or macro");
  c.workers = j.value("workers", c.workers);
  return c;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  unparseable += o.unparseable;
  unparseable_true += o.unparseable_true;
  return *this;
}

double accuracy(const ConfusionCounts& c) {
  return ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(c.n()));
}

double f1_true(const ConfusionCounts& c) {
  // 2PR/(P+R) == 2tp/(2tp+fp+fn)
  const double tp = static_cast<double>(c.tp);
  if (c.tp == 0) return 0.0;
  return 2.0 * tp / (2.0 * tp + static_cast<double>(c.fp + c.fn + c.unparseable_true));
}

double f1_false(const ConfusionCounts& c) {
  const double tn = static_cast<double>(c.tn);
  if (c.tn == 0) return 0.0;
  const std::size_t unparseable_false = c.unparseable - c.unparseable_true;
  return 2.0 * tn / (2.0 * tn + static_cast<double>(c.fn + c.fp + unparseable_false));
}

double f1(const ConfusionCounts& c, F1Mode mode) {
  return mode == F1Mode::macro ? (f1_true(c) + f1_false(c)) / 2.0 : f1_true(c);
}

namespace {

Metrics metrics_of(const ConfusionCounts& c, F1Mode mode) { return {c, accuracy(c), f1(c, mode)}; }

json counts_json(const ConfusionCounts& c) {
  return {{"tp", c.tp},
          {"fp", c.fp},
          {"tn", c.tn},
          {"fn", c.fn},
          {"unparseable", c.unparseable},
          {"unparseable_true", c.unparseable_true},
          {"n", c.n()}};
}

json metrics_json(const Metrics& m) {
  return {{"counts", counts_json(m.counts)},
          {"accuracy", m.accuracy},
          {"f1", m.f1},
          {"display", fixed2(m.accuracy) + " / " + fixed2(m.f1)}};
}

}  // namespace

json to_json(const EvalReport& r) {
  json subjects = json::object();
  for (const auto& [s, m] : r.per_subject) subjects[to_string(s)] = metrics_json(m);
  return {{"config", r.config},
          {"dataset_sha256", r.dataset_sha256},
          {"f1_mode", to_string(r.f1_mode)},
          {"f1_positive_class", r.f1_mode == F1Mode::macro ? "macro" : "True"},
          {"subjects", subjects},
          {"total", metrics_json(r.total)}};
}

std::string dataset_hash(const std::vector<DataInstance>& instances) {
  std::string all;
  for (const auto& d : instances) all += to_json(d).dump() + "\n";
  return sha256_hex(all);
}

EvalReport score(const std::vector<Prediction>& predictions,
                 const std::vector<DataInstance>& instances, F1Mode mode, json config_echo) {
  std::map<std::string, const DataInstance*> by_id;
  for (const auto& d : instances) by_id[d.id] = &d;

  std::map<Subject, ConfusionCounts> counts;
  for (auto s : kAllSubjects) counts[s] = {};
  std::set<std::string> seen;
  for (const auto& [id, response] : predictions) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw InvalidInput("prediction for unknown instance " + id);
    if (!seen.insert(id).second) throw InvalidInput("duplicate prediction for " + id);
    const auto& d = *it->second;
    auto& c = counts[d.subject];
    const bool truth = d.ground_truth == Assessment::True;
    if (!response.ok()) {
      c.unparseable += 1;
      if (truth) c.unparseable_true += 1;
      continue;
    }
    const bool pred = *response.assessment == Assessment::True;
    if (pred && truth) ++c.tp;
    else if (pred && !truth) ++c.fp;
    else if (!pred && !truth) ++c.tn;
    else ++c.fn;
  }
  if (seen.size() != by_id.size()) {
    std::string missing;
    for (const auto& [id, _] : by_id)
      if (!seen.count(id)) missing += (missing.empty() ? "" : ", ") + id;
    throw InvalidInput("missing predictions for: " + missing);
  }

  EvalReport r;
  r.config = std::move(config_echo);
  r.dataset_sha256 = dataset_hash(instances);
  r.f1_mode = mode;
  ConfusionCounts total;
  for (const auto& [s, c] : counts) {
    r.per_subject[s] = metrics_of(c, mode);
    total += c;
  }
  r.total = metrics_of(total, mode);
  return r;
}

json to_json(const InstanceArtifact& a) {
  return {{"instance_id", a.instance_id},
          {"prompt_sha256", a.prompt_sha256},
          {"retrieval_k", a.retrieval_k ? json(*a.retrieval_k) : json(nullptr)},
          {"premise_ids", a.premise_ids},
          {"response", to_json(a.response)},
          {"error", a.error}};
}

EvalRun run_evaluation(const EvalConfig& config, const std::vector<DataInstance>& dataset,
                       const Retriever* retriever, const Evaluator& evaluator,
                       const std::vector<Exemplar>& exemplar_pool, const TemplateSet& templates) {
  const auto strategy = config.effective_strategy();
  validate(strategy);
  if (strategy.uses_cikr && !retriever) throw InvalidInput("CIKR evaluation needs an index");

  std::vector<DataInstance> scored;
  for (const auto& d : dataset)
    if (d.split == config.split) scored.push_back(d);
  if (scored.empty()) throw InvalidInput("split " + to_string(config.split) + " is empty");

  std::vector<InstanceArtifact> artifacts(scored.size());
  auto run_one = [&](std::size_t i) {
    const auto& d = scored[i];
    auto& a = artifacts[i];
    a.instance_id = d.id;
    std::optional<PremiseSet> premises;
    if (strategy.uses_cikr) {
      a.retrieval_k = config.k;
      premises = retriever->retrieve({d.context, d.hypothesis, config.k});
      for (const auto& p : *premises) a.premise_ids.push_back(p.paragraph_id);
    }
    auto exemplars = select_exemplars(exemplar_pool, static_cast<std::size_t>(strategy.shots),
                                      config.exemplar_seed ^ fnv1a64(d.id));
    auto bundle = build_prompt(strategy, d.context, d.hypothesis, premises, exemplars, templates);
    a.prompt_sha256 = sha256_hex(bundle.rendered);
    try {
      a.response = evaluator.assess(bundle);
    } catch (const TransportError& e) {
      a.error = e.what();
      a.response = ModelResponse{};
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, config.workers);
  for (std::size_t start = 0; start < scored.size(); start += workers) {
    std::vector<std::future<void>> batch;
    for (std::size_t j = start; j < std::min(scored.size(), start + workers); ++j)
      batch.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, run_one, j));
    for (auto& f : batch) f.get();
  }

  std::vector<Prediction> predictions;
  for (const auto& a : artifacts) predictions.emplace_back(a.instance_id, a.response);
  auto echo = to_json(config);
  if (echo["service"].get<std::string>().empty()) echo["service"] = evaluator.service().id();
  echo["params"] = to_json(evaluator.options().params);
  return {score(predictions, scored, config.f1_mode, std::move(echo)), std::move(artifacts)};
}

AblationResult ablation_matrix(const std::vector<AblationRun>& runs,
                               const std::vector<DataInstance>& dataset, const Retriever* retriever,
                               const std::vector<Exemplar>& exemplar_pool) {
  if (runs.empty()) throw InvalidInput("ablation matrix needs at least one config");
  AblationResult result;
  for (const auto& run : runs) {
    try {
      EvaluatorOptions opts;
      opts.params = run.config.params;
      opts.retry_cap = run.retry_cap;
      Evaluator evaluator(run.service, opts);
      result.reports.push_back(
          run_evaluation(run.config, dataset, retriever, evaluator, exemplar_pool).report);
    } catch (const std::exception& e) {
      result.failures.emplace_back(run.config.method, e.what());
    }
  }
  result.table = render_comparison_table(result.reports);
  return result;
}

std::string render_comparison_table(const std::vector<EvalReport>& reports) {
  std::vector<const EvalReport*> order;
  for (const auto& r : reports) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const EvalReport* a, const EvalReport* b) {
    return a->total.accuracy > b->total.accuracy;
  });

  std::vector<std::string> top = {"Model", "Method", "CIKR"};
  std::vector<std::string> sub = {"", "", ""};
  for (auto s : kAllSubjects) {
    top.push_back(display_name(s));
    top.push_back("");
    sub.push_back("ACC");
    sub.push_back("F1");
  }
  top.push_back("Total");
  top.push_back("");
  sub.push_back("ACC");
  sub.push_back("F1");

  std::vector<std::vector<std::string>> rows = {top, sub};
  for (const auto* r : order) {
    std::vector<std::string> row = {r->config.value("model", ""), r->config.value("method", ""),
                                    r->config.value("uses_cikr", false) ? "O" : "X"};
    for (auto s : kAllSubjects) {
      const auto& m = r->per_subject.at(s);
      row.push_back(fixed2(m.accuracy));
      row.push_back(fixed2(m.f1));
    }
    row.push_back(fixed2(r->total.accuracy));
    row.push_back(fixed2(r->total.f1));
    rows.push_back(std::move(row));
  }

  // subject headings span their ACC and F1 columns
  std::vector<std::size_t> width(top.size(), 0);
  for (std::size_t r = 1; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) width[c] = std::max(width[c], rows[r][c].size());
  for (std::size_t c = 0; c < 3; ++c) width[c] = std::max(width[c], top[c].size());
  for (std::size_t c = 3; c + 1 < top.size(); c += 2) {
    std::size_t span = width[c] + 3 + width[c + 1];
    if (top[c].size() > span) width[c + 1] += top[c].size() - span;
  }

  std::ostringstream out;
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w - std::min(w, s.size()), ' '); };
  out << "| ";
  for (std::size_t c = 0; c < 3; ++c) out << pad(top[c], width[c]) << " | ";
  for (std::size_t c = 3; c + 1 < top.size(); c += 2)
    out << pad(top[c], width[c] + 3 + width[c + 1]) << " | ";
  out << "\n";
  for (std::size_t r = 1; r < rows.size(); ++r) {
    out << "| ";
    for (std::size_t c = 0; c < rows[r].size(); ++c) out << pad(rows[r][c], width[c]) << " | ";
    out << "\n";
  }
  std::string s = out.str();
  // drop trailing spaces per line
  std::string cleaned;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && line.back() == ' ') line.pop_back();
    cleaned += line + "\n";
  }
  return cleaned;
}

std::vector<EvalConfig> ablation_presets(const std::string& model) {
  auto make = [&](std::string method, PromptStrategy strategy, bool cikr,
                  std::vector<std::string> exclusions = {}) {
    EvalConfig c;
    c.model = model;
    c.method = std::move(method);
    c.strategy = strategy;
    c.uses_cikr = cikr;
    c.exclusions = std::move(exclusions);
    return c;
  };
  return {make("CILR-FT (-DEXP)", presets::CILR_ZS_CIKR, true, {"DEXP"}),
          make("CILR-FT", presets::CILR_ZS_CIKR, false),
          make("CILR-ZS", presets::CILR_ZS_CIKR, false),
          make("IRAC-ZS", presets::IRAC_ZS, false),
          make("VP-ZS", presets::VP_ZS, false)};
}

}  // namespace lapis
