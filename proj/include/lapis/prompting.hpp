#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lapis/domain.hpp"
#include "lapis/io.hpp"
#include "lapis/retriever.hpp"

namespace lapis {

enum class PromptMethod { VP, IRAC, CILR };

std::string to_string(PromptMethod m);
std::optional<PromptMethod> parse_prompt_method(std::string_view s);

struct PromptStrategy {
  PromptMethod method = PromptMethod::VP;
  int shots = 0;  // 0, 1 or 3
  bool uses_cikr = false;
  // Off: only the six presets are constructible.
  bool ablation = false;

  bool operator==(const PromptStrategy&) const = default;

  // "VP-ZS", "IRAC-1S", "CILR-3S+CIKR", ...
  std::string name() const;
  // Rationale tag, "GPT4-CILR-3S" etc.
  std::string rationale_type() const;
};

// Throws InvalidInput for anything outside the preset list unless ablation.
void validate(const PromptStrategy& s);

namespace presets {
inline const PromptStrategy VP_ZS{PromptMethod::VP, 0, false};
inline const PromptStrategy IRAC_ZS{PromptMethod::IRAC, 0, false};
inline const PromptStrategy IRAC_1S{PromptMethod::IRAC, 1, false};
inline const PromptStrategy CILR_ZS_CIKR{PromptMethod::CILR, 0, true};
inline const PromptStrategy CILR_1S_CIKR{PromptMethod::CILR, 1, true};
inline const PromptStrategy CILR_3S_CIKR{PromptMethod::CILR, 3, true};
}  // namespace presets

const std::vector<PromptStrategy>& all_presets();

// Accepts preset names; other "<METHOD>-<N>S[+CIKR]" forms only with
// allow_ablation.
PromptStrategy parse_strategy(std::string_view name, bool allow_ablation = false);

json to_json(const PromptStrategy& s);
PromptStrategy strategy_from_json(const json& j);

struct Exemplar {
  std::string id;
  std::string context;
  std::string hypothesis;
  std::optional<std::string> premise_block;
  Assessment assessment = Assessment::True;
  std::string rationale;

  bool operator==(const Exemplar&) const = default;
};

std::vector<Exemplar> load_exemplars(const std::filesystem::path& file);
json to_json(const Exemplar& e);
Exemplar exemplar_from_json(const json& j, std::size_t line = 0);

// Template text for one locale. Korean wording is data, like any other
// locale.
struct TemplateSet {
  std::string locale;
  std::string prompt;
  std::string exemplar;
  std::string answer_format;
  std::string instruction_vp;
  std::string instruction_irac;
  std::string instruction_cilr;
  std::vector<std::string> true_labels;
  std::vector<std::string> false_labels;

  const std::string& instruction(PromptMethod m) const;

  // Reads <dir>/{prompt,exemplar,answer_format,vp,irac,cilr}.tmpl and labels.json.
  static TemplateSet load(const std::filesystem::path& dir, std::string locale);
  // Compiled-in copy of data/templates/<locale>; "en" and "ko" ship.
  static const TemplateSet& builtin(std::string_view locale = "en");
};

struct PromptBundle {
  PromptStrategy strategy;
  std::string system_instruction;
  std::vector<Exemplar> exemplars;
  InvestigationContext context;
  Hypothesis hypothesis;
  std::optional<std::string> premise_block;
  std::string rendered;
};

// premises must be given iff strategy.uses_cikr; exemplars.size() must equal
// strategy.shots.
PromptBundle build_prompt(const PromptStrategy& strategy, const InvestigationContext& context,
                          const Hypothesis& hypothesis, const std::optional<PremiseSet>& premises,
                          const std::vector<Exemplar>& exemplars,
                          const TemplateSet& templates = TemplateSet::builtin());

// Deterministic under (pool order, seed). Distinct picks, returned in pool
// order. For n >= 2 at least one True and one False exemplar are included.
std::vector<Exemplar> select_exemplars(const std::vector<Exemplar>& pool, std::size_t n,
                                       std::uint64_t seed);

// The text a well-formed response would have for (assessment, rationale).
std::string render_answer(Assessment a, std::string_view rationale);

}  // namespace lapis
