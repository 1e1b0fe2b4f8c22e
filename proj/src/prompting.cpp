#include "lapis/prompting.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <mutex>
#include <random>

#include "lapis/error.hpp"
#include "lapis/template.hpp"

namespace lapis {

namespace {

struct EmbeddedFile {
  const char* locale;
  const char* name;
  const char* contents;
};

constexpr EmbeddedFile kEmbedded[] = {
#include "lapis/builtin_templates.inc"
};

std::string embedded(std::string_view locale, std::string_view name) {
  for (const auto& f : kEmbedded)
    if (locale == f.locale && name == f.name) return f.contents;
  throw NotFound("no builtin template " + std::string(locale) + "/" + std::string(name));
}

TemplateSet assemble(std::string locale,
                     const std::function<std::string(std::string_view)>& read) {
  TemplateSet t;
  t.locale = std::move(locale);
  t.prompt = read("prompt.tmpl");
  t.exemplar = read("exemplar.tmpl");
  t.answer_format = trim(read("answer_format.tmpl"));
  t.instruction_vp = trim(read("vp.tmpl"));
  t.instruction_irac = trim(read("irac.tmpl"));
  t.instruction_cilr = trim(read("cilr.tmpl"));
  auto labels = json::parse(read("labels.json"));
  t.true_labels = labels.at("true").get<std::vector<std::string>>();
  t.false_labels = labels.at("false").get<std::vector<std::string>>();
  return t;
}

}  // namespace

std::string to_string(PromptMethod m) {
  switch (m) {
    case PromptMethod::VP: return "VP";
    case PromptMethod::IRAC: return "IRAC";
    case PromptMethod::CILR: return "CILR";
  }
  return "VP";
}

std::optional<PromptMethod> parse_prompt_method(std::string_view s) {
  for (auto m : {PromptMethod::VP, PromptMethod::IRAC, PromptMethod::CILR})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

std::string PromptStrategy::name() const {
  std::string n = to_string(method) + "-" + (shots == 0 ? "ZS" : std::to_string(shots) + "S");
  if (uses_cikr) n += "+CIKR";
  return n;
}

std::string PromptStrategy::rationale_type() const {
  return "GPT4-" + to_string(method) + "-" + (shots == 0 ? "ZS" : std::to_string(shots) + "S");
}

const std::vector<PromptStrategy>& all_presets() {
  static const std::vector<PromptStrategy> kPresets = {
      presets::VP_ZS,        presets::IRAC_ZS,      presets::IRAC_1S,
      presets::CILR_ZS_CIKR, presets::CILR_1S_CIKR, presets::CILR_3S_CIKR};
  return kPresets;
}

void validate(const PromptStrategy& s) {
  if (s.shots != 0 && s.shots != 1 && s.shots != 3)
    throw InvalidInput("shots must be 0, 1 or 3, got " + std::to_string(s.shots));
  if (s.ablation) return;
  const auto& p = all_presets();
  if (std::find(p.begin(), p.end(), s) == p.end())
    throw InvalidInput("strategy " + s.name() + " is not a preset; enable ablation mode to use it");
}

PromptStrategy parse_strategy(std::string_view name, bool allow_ablation) {
  std::string n(name);
  PromptStrategy s;
  if (auto plus = n.find("+CIKR"); plus != std::string::npos && plus + 5 == n.size()) {
    s.uses_cikr = true;
    n = n.substr(0, plus);
  }
  auto dash = n.find('-');
  if (dash == std::string::npos) throw InvalidInput("malformed strategy '" + std::string(name) + "'");
  auto method = parse_prompt_method(n.substr(0, dash));
  if (!method) throw InvalidInput("unknown prompt method in '" + std::string(name) + "'");
  s.method = *method;
  auto shots = n.substr(dash + 1);
  if (shots == "ZS") s.shots = 0;
  else if (shots == "1S") s.shots = 1;
  else if (shots == "3S") s.shots = 3;
  else throw InvalidInput("unknown shot count in '" + std::string(name) + "'");
  const auto& p = all_presets();
  if (std::find(p.begin(), p.end(), s) == p.end()) {
    if (!allow_ablation)
      throw InvalidInput("strategy " + s.name() + " is not a preset; enable ablation mode to use it");
    s.ablation = true;
  }
  return s;
}

json to_json(const PromptStrategy& s) {
  return {{"name", s.name()},
          {"method", to_string(s.method)},
          {"shots", s.shots},
          {"uses_cikr", s.uses_cikr},
          {"ablation", s.ablation}};
}

PromptStrategy strategy_from_json(const json& j) {
  if (j.is_string()) return parse_strategy(j.get<std::string>(), true);
  PromptStrategy s;
  auto m = parse_prompt_method(j.at("method").get<std::string>());
  if (!m) throw InvalidInput("unknown prompt method");
  s.method = *m;
  s.shots = j.at("shots").get<int>();
  s.uses_cikr = j.at("uses_cikr").get<bool>();
  s.ablation = j.value("ablation", false);
  validate(s);
  return s;
}

json to_json(const Exemplar& e) {
  json j = {{"id", e.id},
            {"context", e.context},
            {"hypothesis", e.hypothesis},
            {"assessment", e.assessment == Assessment::True},
            {"rationale", e.rationale}};
  if (e.premise_block) j["premise_block"] = *e.premise_block;
  return j;
}

Exemplar exemplar_from_json(const json& j, std::size_t line) {
  try {
    Exemplar e;
    e.id = j.value("id", "");
    e.context = j.value("context", "");
    e.hypothesis = j.at("hypothesis").get<std::string>();
    if (j.contains("premise_block") && !j["premise_block"].is_null())
      e.premise_block = j["premise_block"].get<std::string>();
    const auto& a = j.at("assessment");
    if (a.is_boolean()) {
      e.assessment = assessment_from_bool(a.get<bool>());
    } else {
      auto s = to_lower_ascii(a.get<std::string>());
      if (s != "true" && s != "false") throw InvalidInput("assessment must be True or False");
      e.assessment = assessment_from_bool(s == "true");
    }
    e.rationale = trim(j.at("rationale").get<std::string>());
    if (e.rationale.empty()) throw InvalidInput("exemplar rationale is empty");
    return e;
  } catch (const json::exception& ex) {
    throw ParseError(line, ex.what());
  } catch (const InvalidInput& ex) {
    throw ParseError(line, ex.what());
  }
}

std::vector<Exemplar> load_exemplars(const std::filesystem::path& file) {
  std::vector<Exemplar> out;
  for (const auto& rec : read_jsonl(file)) out.push_back(exemplar_from_json(rec.value, rec.line));
  return out;
}

const std::string& TemplateSet::instruction(PromptMethod m) const {
  switch (m) {
    case PromptMethod::VP: return instruction_vp;
    case PromptMethod::IRAC: return instruction_irac;
    case PromptMethod::CILR: return instruction_cilr;
  }
  return instruction_vp;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir, std::string locale) {
  return assemble(std::move(locale), [&](std::string_view name) { return read_file(dir / name); });
}

const TemplateSet& TemplateSet::builtin(std::string_view locale) {
  static std::mutex mu;
  static std::map<std::string, TemplateSet, std::less<>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(locale);
  if (it == cache.end()) {
    std::string loc(locale);
    it = cache.emplace(loc, assemble(loc, [&](std::string_view n) { return embedded(loc, n); }))
             .first;
  }
  return it->second;
}

std::string render_answer(Assessment a, std::string_view rationale) {
  return "ASSESSMENT: " + to_string(a) + "\nRATIONALE: " + std::string(rationale);
}

PromptBundle build_prompt(const PromptStrategy& strategy, const InvestigationContext& context,
                          const Hypothesis& hypothesis, const std::optional<PremiseSet>& premises,
                          const std::vector<Exemplar>& exemplars, const TemplateSet& templates) {
  validate(strategy);
  if (premises.has_value() != strategy.uses_cikr)
    throw InvalidInput(strategy.uses_cikr ? "strategy " + strategy.name() + " requires premises"
                                          : "premises supplied to non-CIKR strategy " +
                                                strategy.name());
  if (exemplars.size() != static_cast<std::size_t>(strategy.shots))
    throw InvalidInput("strategy " + strategy.name() + " needs " + std::to_string(strategy.shots) +
                       " exemplars, got " + std::to_string(exemplars.size()));
  if (trim(hypothesis.text).empty()) throw InvalidInput("hypothesis text is empty");

  PromptBundle b;
  b.strategy = strategy;
  b.system_instruction = templates.instruction(strategy.method);
  b.exemplars = exemplars;
  b.context = context;
  b.hypothesis = hypothesis;
  if (premises) b.premise_block = format_premises(*premises);

  std::string exemplar_text;
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    const auto& e = exemplars[i];
    std::string block = strategy.uses_cikr ? e.premise_block.value_or("") : "";
    if (strategy.uses_cikr && block.empty()) block = std::string(kNoPremisesMarker);
    if (i) exemplar_text += "\n\n";
    exemplar_text += render_template(templates.exemplar,
                                     {{"index", std::to_string(i + 1)},
                                      {"context", trim(e.context)},
                                      {"hypothesis", trim(e.hypothesis)},
                                      {"premises", block},
                                      {"assessment", to_string(e.assessment)},
                                      {"rationale", trim(e.rationale)}});
    while (!exemplar_text.empty() && exemplar_text.back() == '\n') exemplar_text.pop_back();
  }

  b.rendered = render_template(templates.prompt, {{"instruction", b.system_instruction},
                                                  {"exemplars", exemplar_text},
                                                  {"context", trim(context.text)},
                                                  {"hypothesis", trim(hypothesis.text)},
                                                  {"premises", b.premise_block.value_or("")},
                                                  {"answer_format", templates.answer_format}});
  return b;
}

std::vector<Exemplar> select_exemplars(const std::vector<Exemplar>& pool, std::size_t n,
                                       std::uint64_t seed) {
  if (n == 0) return {};
  if (pool.size() < n)
    throw InvalidInput("exemplar pool has " + std::to_string(pool.size()) + " entries, need " +
                       std::to_string(n));

  // mt19937_64 output is fixed by the standard; distributions are not, so
  // indices are drawn with plain modulo.
  std::mt19937_64 rng(seed);
  auto draw = [&](std::vector<std::size_t>& from) {
    auto pos = static_cast<std::size_t>(rng() % from.size());
    auto picked = from[pos];
    from.erase(from.begin() + static_cast<std::ptrdiff_t>(pos));
    return picked;
  };

  std::vector<std::size_t> trues, falses, chosen;
  for (std::size_t i = 0; i < pool.size(); ++i)
    (pool[i].assessment == Assessment::True ? trues : falses).push_back(i);

  if (n >= 2) {
    if (trues.empty() || falses.empty())
      throw InvalidInput("exemplar pool lacks one assessment label; cannot balance selection");
    chosen.push_back(draw(trues));
    chosen.push_back(draw(falses));
  }
  std::vector<std::size_t> rest;
  std::merge(trues.begin(), trues.end(), falses.begin(), falses.end(), std::back_inserter(rest));
  while (chosen.size() < n) chosen.push_back(draw(rest));

  std::sort(chosen.begin(), chosen.end());
  std::vector<Exemplar> out;
  for (auto i : chosen) out.push_back(pool[i]);
  return out;
}

}  // namespace lapis
