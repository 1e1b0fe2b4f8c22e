#include <map>
#include <set>

#include "doctest.h"
#include "lapis/dataset.hpp"
#include "lapis/error.hpp"
#include "support.hpp"

using namespace lapis;
using lapis::test::TempDir;

namespace {

ExamQuestion question(std::string id, int year, std::vector<bool> truths,
                      Subject subject = Subject::criminal_law) {
  ExamQuestion q;
  q.id = std::move(id);
  q.year = year;
  q.subject = subject;
  q.context = "Shared context.";
  for (std::size_t i = 0; i < truths.size(); ++i)
    q.options.push_back({"Option " + std::to_string(i + 1) + ".", truths[i]});
  return q;
}

StrategyResponse response(const PromptStrategy& s, std::optional<std::string> raw) {
  StrategyResponse r;
  r.strategy = s;
  r.prompt_sha256 = "h";
  if (raw) r.response = parse_response(*raw);
  else r.error = "transport";
  return r;
}

// Scripted answers keyed by option number: 1 -> False, 2 -> True, 3 -> prose, 4 -> True.
std::shared_ptr<ScriptedMockService> keyed_mock() {
  auto svc = std::make_shared<ScriptedMockService>();
  svc->add_rule({"Hypothesis: Statement 1 "}, "ASSESSMENT: False\nRATIONALE: one");
  svc->add_rule({"Hypothesis: Statement 2 "}, "ASSESSMENT: True\nRATIONALE: two");
  svc->add_rule({"Hypothesis: Statement 3 "}, "no idea");
  svc->set_default("ASSESSMENT: True\nRATIONALE: default");
  return svc;
}

std::vector<DataInstance> exam_instances() {
  std::vector<DataInstance> all;
  for (const auto& q : load_exam(lapis::test::fixture("exam.jsonl")))
    for (auto& d : explode_mcq(q)) all.push_back(std::move(d));
  return split_by_year(std::move(all));
}

}  // namespace

TEST_CASE("explode_mcq") {
  auto xs = explode_mcq(question("Q1", 2015, {true, false, true, false}));
  REQUIRE(xs.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(xs[i].id == "Q1-" + std::to_string(i + 1));
    CHECK(xs[i].context.text == "Shared context.");
    CHECK(xs[i].option_index == i);
    CHECK_FALSE(xs[i].split.has_value());
  }
  CHECK(xs[1].ground_truth == Assessment::False);
  CHECK(xs[0].ground_truth == Assessment::True);
  CHECK(explode_mcq(question("Q1", 2015, {true, false})) == explode_mcq(question("Q1", 2015, {true, false})));
}

TEST_CASE("exam validation") {
  CHECK_THROWS(exam_question_from_json(json::parse(
      R"({"id":"x","year":2012,"subject":"criminal_law","options":[{"text":"a","is_true":true},{"text":"b","is_true":false}]})")));
  CHECK_THROWS(exam_question_from_json(json::parse(
      R"({"id":"x","year":2015,"subject":"criminal_law","options":[{"text":"a","is_true":true}]})")));
  CHECK_THROWS(exam_question_from_json(json::parse(
      R"({"id":"x","year":2015,"subject":"civil_law","options":[{"text":"a","is_true":true},{"text":"b","is_true":false}]})")));
}

TEST_CASE("split_for_year") {
  CHECK(split_for_year(2013) == Split::train);
  CHECK(split_for_year(2019) == Split::train);
  CHECK(split_for_year(2020) == Split::dev);
  CHECK(split_for_year(2021) == Split::test);
  CHECK(split_for_year(2023) == Split::test);
  CHECK_THROWS_AS(split_for_year(2012), InvalidInput);
  CHECK_THROWS_AS(split_for_year(2024), InvalidInput);
}

TEST_CASE("exam fixture: explosion count and disjoint total partition") {
  auto exam = load_exam(lapis::test::fixture("exam.jsonl"));
  std::size_t options = 0;
  for (const auto& q : exam) options += q.options.size();
  auto all = exam_instances();
  CHECK(all.size() == options);
  std::map<std::string, int> seen;
  for (const auto& d : all) {
    REQUIRE(d.split.has_value());
    ++seen[d.id];
    Split want = d.year <= 2019 ? Split::train : d.year == 2020 ? Split::dev : Split::test;
    CHECK(*d.split == want);
  }
  CHECK(seen.size() == all.size());
}

TEST_CASE("filter_by_correctness") {
  auto d = explode_mcq(question("Q", 2014, {true}))[0];
  auto kept = filter_by_correctness(
      d, {response(presets::VP_ZS, "ASSESSMENT: True\nRATIONALE: a"),
          response(presets::IRAC_ZS, "ASSESSMENT: False\nRATIONALE: b"),
          response(presets::IRAC_1S, "garbage"), response(presets::CILR_ZS_CIKR, std::nullopt)});
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].id == "Q-1/GPT4-VP-ZS");
  CHECK(kept[0].rationale.rationale_type == RationaleType::GPT4_VP_ZS);
  CHECK(kept[0].predicted == Assessment::True);

  std::vector<StrategyResponse> wrong;
  for (const auto& s : all_presets()) wrong.push_back(response(s, "ASSESSMENT: False\nRATIONALE: no"));
  CHECK(filter_by_correctness(d, wrong).empty());
}

TEST_CASE("generate_rationales: six responses and a premise set for CIKR") {
  auto retriever = lapis::test::make_retriever("scenario_corpus.jsonl");
  auto svc = std::make_shared<ScriptedMockService>();
  svc->set_default("ASSESSMENT: True\nRATIONALE: ok");
  Evaluator ev(svc);
  RationaleGenerationOptions opts;
  opts.exemplar_pool = load_exemplars(lapis::test::source_dir() / "data" / "exemplars" / "en.jsonl");
  auto d = split_by_year(explode_mcq(question("Q", 2016, {true})))[0];
  auto rs = generate_rationales(d, all_presets(), retriever.get(), ev, opts);
  CHECK(rs.size() == 6);
  REQUIRE(d.premises.has_value());
  CHECK(d.premises->size() == 5);
  for (const auto& r : rs) {
    CHECK(r.response.has_value());
    CHECK(r.prompt_sha256.size() == 64);
  }

  auto test_instance = split_by_year(explode_mcq(question("T", 2022, {true})))[0];
  CHECK_THROWS_AS(generate_rationales(test_instance, all_presets(), retriever.get(), ev, opts),
                  InvalidInput);
}

TEST_CASE("generate_rationales: service failures are recorded per strategy") {
  auto svc = std::make_shared<ScriptedMockService>();
  svc->set_default("ASSESSMENT: True\nRATIONALE: ok");
  svc->fail_next(3);
  EvaluatorOptions eo;
  eo.retry_cap = 0;
  Evaluator ev(svc, eo);
  RationaleGenerationOptions opts;
  opts.exemplar_pool = load_exemplars(lapis::test::source_dir() / "data" / "exemplars" / "en.jsonl");
  auto d = split_by_year(explode_mcq(question("Q", 2016, {true})))[0];
  std::vector<PromptStrategy> non_cikr{presets::VP_ZS, presets::IRAC_ZS, presets::IRAC_1S,
                                       presets::VP_ZS};
  auto rs = generate_rationales(d, non_cikr, nullptr, ev, opts);
  REQUIRE(rs.size() == 4);
  CHECK_FALSE(rs[0].response.has_value());
  CHECK_FALSE(rs[0].error.empty());
  CHECK(rs[3].response.has_value());
}

TEST_CASE("build_rationales: retained set equals an independent re-filter") {
  auto retriever = lapis::test::make_retriever("scenario_corpus.jsonl");
  auto instances = exam_instances();
  Evaluator ev(keyed_mock());
  RationaleGenerationOptions opts;
  opts.exemplar_pool = load_exemplars(lapis::test::source_dir() / "data" / "exemplars" / "en.jsonl");
  auto log = build_rationales(instances, all_presets(), retriever.get(), ev, opts, 4);

  std::map<std::string, std::set<std::string>> expected;
  std::map<std::string, const DataInstance*> by_id;
  for (const auto& d : instances) by_id[d.id] = &d;
  for (const auto& [id, r] : log) {
    const auto& d = *by_id.at(id);
    bool keep = r.response && r.response->assessment && r.response->rationale &&
                !r.response->rationale->text.empty() && *r.response->assessment == d.ground_truth;
    if (keep) expected[id].insert(id + "/" + r.strategy.rationale_type());
  }
  std::size_t train_dev = 0;
  for (const auto& d : instances) {
    std::set<std::string> got;
    for (const auto& r : d.rationales) {
      got.insert(r.id);
      CHECK(r.predicted == d.ground_truth);
    }
    CHECK(got == expected[d.id]);
    if (*d.split == Split::test) {
      CHECK(d.rationales.empty());
      CHECK_FALSE(d.premises.has_value());
    } else {
      ++train_dev;
      CHECK(d.premises.has_value());
    }
  }
  CHECK(log.size() == train_dev * 6);

  auto again = instances;
  build_rationales(again, all_presets(), retriever.get(), ev, opts, 2);
  CHECK(again == instances);
}

TEST_CASE("merge_expert_curation") {
  auto d = split_by_year(explode_mcq(question("Q", 2014, {true, true})));
  attach_rationales(d[0], filter_by_correctness(
                              d[0], {response(presets::VP_ZS, "ASSESSMENT: True\nRATIONALE: old")}));
  std::vector<CurationEntry> entries{
      {"c1", CurationOp::revise, "Q-1", "Q-1/GPT4-VP-ZS", "new text (Ref No: 84do22)", "e"},
      {"c2", CurationOp::annotate, "Q-2", "", "expert note", "e"},
  };
  auto once = merge_expert_curation(d, entries);
  CHECK(once[0].rationales[0].rationale.text == "new text (Ref No: 84do22)");
  CHECK(once[0].rationales[0].rationale.cited_ref_nos == std::vector<std::string>{"84do22"});
  CHECK(once[0].rationales[0].history == std::vector<std::string>{"old"});
  REQUIRE(once[1].rationales.size() == 1);
  CHECK(once[1].rationales[0].rationale.rationale_type == RationaleType::DEXP_ANN);
  CHECK(once[1].rationales[0].id == "Q-2/DEXP-ANN/c2");
  CHECK(merge_expert_curation(once, entries) == once);

  auto reverted = without_expert_curation(once);
  REQUIRE(reverted.size() == 1);
  CHECK(reverted[0].rationales[0].rationale.text == "old");

  std::vector<CurationEntry> unknown{{"c3", CurationOp::annotate, "NOPE", "", "x", "e"},
                                     {"c4", CurationOp::annotate, "NOPE2", "", "x", "e"}};
  try {
    merge_expert_curation(d, unknown);
    FAIL("expected NotFound");
  } catch (const NotFound& e) {
    CHECK(std::string(e.what()).find("NOPE2") != std::string::npos);
  }
  std::vector<CurationEntry> absent{{"c5", CurationOp::revise, "Q-2", "Q-2/GPT4-VP-ZS", "x", "e"}};
  CHECK_THROWS_AS(merge_expert_curation(d, absent), NotFound);
}

TEST_CASE("export_sft: counts and test guard") {
  auto d = split_by_year(explode_mcq(question("Q", 2014, {true, false})));
  std::vector<StrategyResponse> rs;
  for (const auto& s : {presets::VP_ZS, presets::IRAC_ZS, presets::CILR_ZS_CIKR})
    rs.push_back(response(s, "ASSESSMENT: True\nRATIONALE: because"));
  attach_rationales(d[0], filter_by_correctness(d[0], rs));
  auto records = export_sft(d, Split::train);
  REQUIRE(records.size() == 3);
  for (const auto& r : records) {
    CHECK(r.input.find("judge whether the legal hypothesis is True or False") != std::string::npos);
    CHECK(r.output == "ASSESSMENT: True\nRATIONALE: because");
  }
  CHECK(export_sft(d, Split::dev).empty());
  CHECK_THROWS_AS(export_sft(d, Split::test), InvalidInput);
}

TEST_CASE("dataset_statistics") {
  auto empty = dataset_statistics({});
  CHECK(empty.initial == 0);
  CHECK(empty.total.instances == 0);
  CHECK(empty.total.rationale_total() == 0);

  std::vector<DataInstance> six;
  for (Subject s : {Subject::criminal_law, Subject::criminal_procedure_law, Subject::crime_investigation})
    for (auto& d : split_by_year(explode_mcq(question(to_string(s), 2015, {true, false}, s))))
      six.push_back(std::move(d));
  auto st = dataset_statistics(six);
  for (Subject s : {Subject::criminal_law, Subject::criminal_procedure_law, Subject::crime_investigation}) {
    CHECK(st.initial_by_subject.at(s) == 2);
    CHECK(st.cells.at({Split::train, s}).instances == 2);
  }
  CHECK(st.split_totals.at(Split::train).instances == 6);
  auto table = render_stats_table(st);
  CHECK(table.find("Criminal Procedure Law") != std::string::npos);
  CHECK(table.find("All Subject Areas") != std::string::npos);
}

TEST_CASE("dataset file round-trip") {
  TempDir tmp;
  auto d = exam_instances();
  attach_rationales(d[0], filter_by_correctness(
                              d[0], {response(presets::VP_ZS, render_answer(d[0].ground_truth, "r"))}));
  save_dataset(tmp / "ds.jsonl", d);
  CHECK(load_dataset(tmp / "ds.jsonl") == d);
}
