#include <algorithm>

#include "doctest.h"
#include "lapis/error.hpp"
#include "lapis/eval_harness.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace lapis;
using lapis::test::Gen;

namespace {

constexpr Subject kSubjects[] = {Subject::criminal_law, Subject::criminal_procedure_law,
                                 Subject::crime_investigation};

std::vector<DataInstance> labelled(const std::vector<bool>& labels) {
  std::vector<DataInstance> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    DataInstance d;
    d.id = "i" + std::to_string(i);
    d.question_id = "q" + std::to_string(i);
    d.year = 2022;
    d.subject = kSubjects[i % 3];
    d.hypothesis.text = "Hypothesis number " + std::to_string(i) + ".";
    d.ground_truth = assessment_from_bool(labels[i]);
    d.split = Split::test;
    out.push_back(d);
  }
  return out;
}

ModelResponse answer(std::optional<bool> value) {
  if (!value) return parse_response("unparseable prose");
  return parse_response(render_answer(assessment_from_bool(*value), "r"));
}

std::vector<Prediction> predict(const std::vector<DataInstance>& ds,
                                const std::vector<std::optional<bool>>& values) {
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < ds.size(); ++i) out.emplace_back(ds[i].id, answer(values[i]));
  return out;
}

std::vector<DataInstance> exam_test_split() {
  std::vector<DataInstance> all;
  for (const auto& q : load_exam(lapis::test::fixture("exam.jsonl")))
    for (auto& d : explode_mcq(q)) all.push_back(std::move(d));
  return split_by_year(std::move(all));
}

std::shared_ptr<ScriptedMockService> echo_mock(const std::vector<DataInstance>& ds) {
  auto svc = std::make_shared<ScriptedMockService>("echo");
  for (const auto& d : ds)
    svc->add_rule({"Hypothesis: " + d.hypothesis.text + "\n"},
                  render_answer(d.ground_truth, "echo"));
  return svc;
}

std::shared_ptr<ScriptedMockService> constant_mock(const std::string& id, bool value) {
  auto svc = std::make_shared<ScriptedMockService>(id);
  svc->set_default(render_answer(assessment_from_bool(value), "constant"));
  return svc;
}

EvalConfig config(std::string method, PromptStrategy s, bool cikr) {
  EvalConfig c;
  c.model = "mock-slm";
  c.method = std::move(method);
  c.strategy = s;
  c.uses_cikr = cikr;
  return c;
}

}  // namespace

TEST_CASE("score: all correct") {
  std::vector<bool> labels{true, false, true, true, false, false, true, false, true, true};
  auto ds = labelled(labels);
  std::vector<std::optional<bool>> preds(labels.begin(), labels.end());
  auto r = score(predict(ds, preds), ds);
  CHECK(r.total.accuracy == 1.0);
  CHECK(r.total.f1 == 1.0);
}

TEST_CASE("score: always True on 6 True / 4 False") {
  std::vector<bool> labels{true, true, true, true, true, true, false, false, false, false};
  auto ds = labelled(labels);
  auto r = score(predict(ds, std::vector<std::optional<bool>>(10, true)), ds);
  CHECK(r.total.counts.tp == 6);
  CHECK(r.total.counts.fp == 4);
  CHECK(r.total.counts.fn == 0);
  CHECK(r.total.accuracy == 0.6);
  CHECK(r.total.f1 == 0.75);
}

TEST_CASE("score: 0.74 / 0.79 renders to two decimals") {
  // tp 50, fn 6, tn 24, fp 20 -> ACC 74/100, F1 100/126
  std::vector<bool> labels;
  std::vector<std::optional<bool>> preds;
  auto add = [&](bool truth, bool pred, int n) {
    for (int i = 0; i < n; ++i) {
      labels.push_back(truth);
      preds.push_back(pred);
    }
  };
  add(true, true, 50);
  add(true, false, 6);
  add(false, false, 24);
  add(false, true, 20);
  auto ds = labelled(labels);
  EvalConfig c = config("CILR-FT", presets::CILR_ZS_CIKR, true);
  c.model = "EEVE-Korean-Instruct";
  auto r = score(predict(ds, preds), ds, F1Mode::binary_true, to_json(c));
  CHECK(r.total.accuracy == doctest::Approx(0.74));
  CHECK(r.total.f1 == doctest::Approx(100.0 / 126.0));
  CHECK(to_json(r)["total"]["display"] == "0.74 / 0.79");
  auto table = render_comparison_table({r});
  CHECK(table.find("| 0.74 | 0.79 |") != std::string::npos);
}

TEST_CASE("score: unparseable counted in N only") {
  auto ds = labelled({true, false});
  auto r = score(predict(ds, {std::nullopt, std::nullopt}), ds);
  CHECK(r.total.counts.unparseable == 2);
  CHECK(r.total.counts.unparseable_true == 1);
  CHECK(r.total.counts.n() == 2);
  CHECK(r.total.accuracy == 0.0);
  CHECK(r.total.f1 == 0.0);
}

TEST_CASE("score: prediction set errors") {
  auto ds = labelled({true, false});
  auto preds = predict(ds, {true, false});
  auto dup = preds;
  dup.push_back(preds[0]);
  CHECK_THROWS_AS(score(dup, ds), InvalidInput);
  CHECK_THROWS_AS(score({preds[0]}, ds), InvalidInput);
  auto unknown = preds;
  unknown[1].first = "zzz";
  CHECK_THROWS(score(unknown, ds));
}

TEST_CASE("property: metrics match the confusion-matrix oracle") {
  Gen g(2024);
  for (int trial = 0; trial < 200; ++trial) {
    auto n = g.size(1, 200);
    std::vector<bool> labels;
    std::vector<std::optional<bool>> preds;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(g.coin(g.real(0.1, 0.9)));
      if (g.coin(0.1)) preds.push_back(std::nullopt);
      else preds.push_back(g.coin());
    }
    auto ds = labelled(labels);
    auto predictions = predict(ds, preds);
    auto r = score(predictions, ds);
    auto o = lapis::test::oracle_metrics(labels, preds);
    CHECK(std::abs(r.total.accuracy - o.acc) <= 1e-12);
    CHECK(std::abs(r.total.f1 - o.f1_true) <= 1e-12);
    auto macro = score(predictions, ds, F1Mode::macro);
    CHECK(std::abs(macro.total.f1 - (o.f1_true + o.f1_false) / 2) <= 1e-12);

    ConfusionCounts sum;
    for (const auto& [s, m] : r.per_subject) sum += m.counts;
    CHECK(sum == r.total.counts);

    std::shuffle(predictions.begin(), predictions.end(), g.rng());
    auto shuffled = score(predictions, ds);
    CHECK(to_json(shuffled) == to_json(r));
  }
}

TEST_CASE("run_evaluation: echo mock scores 1.0 and is deterministic") {
  auto ds = exam_test_split();
  auto retriever = lapis::test::make_retriever("scenario_corpus.jsonl");
  Evaluator ev(echo_mock(ds));
  auto cfg = config("CILR-ZS", presets::CILR_ZS_CIKR, true);
  auto a = run_evaluation(cfg, ds, retriever.get(), ev);
  CHECK(a.report.total.accuracy == 1.0);
  std::size_t tests = std::count_if(ds.begin(), ds.end(), [](const auto& d) { return d.split == Split::test; });
  CHECK(a.artifacts.size() == tests);
  auto b = run_evaluation(cfg, ds, retriever.get(), ev);
  CHECK(to_json(a.report).dump() == to_json(b.report).dump());
  std::vector<DataInstance> scored;
  std::copy_if(ds.begin(), ds.end(), std::back_inserter(scored),
               [](const auto& d) { return d.split == Split::test; });
  CHECK(a.report.dataset_sha256 == dataset_hash(scored));
}

TEST_CASE("run_evaluation: always-True mock equals the analytic counts") {
  auto ds = exam_test_split();
  Evaluator ev(constant_mock("always-true", true));
  auto r = run_evaluation(config("VP-ZS", presets::VP_ZS, false), ds, nullptr, ev).report;
  std::size_t t = 0, f = 0;
  for (const auto& d : ds) {
    if (d.split != Split::test) continue;
    (d.ground_truth == Assessment::True ? t : f)++;
  }
  CHECK(r.total.counts.tp == t);
  CHECK(r.total.counts.fp == f);
  CHECK(r.total.counts.tn == 0);
  CHECK(r.total.counts.fn == 0);
}

TEST_CASE("run_evaluation: CIKR on/off retrieval instrumentation") {
  auto ds = exam_test_split();
  auto retriever = lapis::test::make_retriever("scenario_corpus.jsonl");
  Evaluator ev(constant_mock("m", true));
  std::size_t tests = std::count_if(ds.begin(), ds.end(), [](const auto& d) { return d.split == Split::test; });

  auto before = retriever->index().search_count();
  auto off = run_evaluation(config("CILR-FT", presets::CILR_ZS_CIKR, false), ds, retriever.get(), ev);
  CHECK(retriever->index().search_count() == before);
  for (const auto& a : off.artifacts) CHECK_FALSE(a.retrieval_k.has_value());

  auto on = run_evaluation(config("CILR-FT", presets::CILR_ZS_CIKR, true), ds, retriever.get(), ev);
  CHECK(retriever->index().search_count() == before + tests);
  for (const auto& a : on.artifacts) {
    CHECK(a.retrieval_k == std::optional<std::size_t>(5));
    CHECK(a.premise_ids.size() == 5);
  }
  CHECK(off.report.config != on.report.config);
  CHECK_THROWS_AS(run_evaluation(config("CILR-FT", presets::CILR_ZS_CIKR, true), ds, nullptr, ev),
                  InvalidInput);
}

TEST_CASE("run_evaluation: transport failures past the cap become unparseable") {
  auto ds = exam_test_split();
  auto svc = constant_mock("m", true);
  svc->fail_next(3);
  EvaluatorOptions opts;
  opts.retry_cap = 1;
  Evaluator ev(svc, opts);
  auto run = run_evaluation(config("VP-ZS", presets::VP_ZS, false), ds, nullptr, ev);
  CHECK(run.report.total.counts.unparseable == 1);
  CHECK_FALSE(run.artifacts[0].error.empty());
}

TEST_CASE("ablation_matrix: ordering, single row, failures") {
  auto ds = exam_test_split();
  std::vector<AblationRun> runs;
  runs.push_back({config("VP-ZS", presets::VP_ZS, false), constant_mock("half", true), 0});
  runs.push_back({config("IRAC-ZS", presets::IRAC_ZS, false), echo_mock(ds), 0});
  auto result = ablation_matrix(runs, ds, nullptr);
  REQUIRE(result.reports.size() == 2);
  CHECK(result.table.find("IRAC-ZS") < result.table.find("VP-ZS"));

  auto one = ablation_matrix({runs[0]}, ds, nullptr);
  auto lines = std::count(one.table.begin(), one.table.end(), '\n');
  CHECK(lines == 3);

  auto failing = constant_mock("down", true);
  failing->fail_next(1000);
  runs.push_back({config("CILR-ZS", presets::CILR_ZS_CIKR, true), failing, 0});
  auto partial = ablation_matrix(runs, ds, nullptr);
  CHECK(partial.reports.size() == 2);
  REQUIRE(partial.failures.size() == 1);
  CHECK(partial.failures[0].first == "CILR-ZS");
}

TEST_CASE("ablation presets render five rows in the comparison layout") {
  auto ds = exam_test_split();
  auto retriever = lapis::test::make_retriever("scenario_corpus.jsonl");
  auto presets_list = ablation_presets("EEVE-Korean-Instruct");
  REQUIRE(presets_list.size() == 5);
  std::vector<AblationRun> runs;
  for (const auto& c : presets_list) runs.push_back({c, echo_mock(ds), 0});
  auto result = ablation_matrix(runs, ds, retriever.get());
  REQUIRE(result.reports.size() == 5);
  auto header = result.table.substr(0, result.table.find('\n'));
  for (const char* col : {"Model", "Method", "CIKR", "Criminal Law", "Criminal Procedure Law",
                          "Crime Investigation", "Total"})
    CHECK(header.find(col) != std::string::npos);
  CHECK(std::count(result.table.begin(), result.table.end(), '\n') == 7);
  CHECK(result.table.find("CILR-FT (-DEXP)") != std::string::npos);
  std::size_t cikr_on = 0;
  for (const auto& c : presets_list) cikr_on += c.uses_cikr;
  CHECK(cikr_on == 1);
}

TEST_CASE("EvalConfig JSON round-trip") {
  auto c = config("CILR-FT (-DEXP)", presets::CILR_ZS_CIKR, true);
  c.exclusions = {"DEXP"};
  c.f1_mode = F1Mode::macro;
  auto back = eval_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
}
