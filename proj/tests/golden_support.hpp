#pragma once

#include <cstdlib>
#include <string>

#include "lapis/io.hpp"
#include "lapis/prompting.hpp"
#include "support.hpp"

namespace lapis::test {

inline std::filesystem::path golden_path(const PromptStrategy& s) {
  std::string name = s.name();
  for (auto& c : name)
    if (c == '+') c = '_';
  return source_dir() / "tests" / "golden" / (name + ".txt");
}

inline PremiseSet golden_premises() {
  return {
      {"kr-89do2087#0", SourceKind::court_ruling, "89do2087",
       "A stab to the heart with a fruit knife showed awareness that death could follow.", 0.91, 1},
      {"tb-witness-detail#0", SourceKind::textbook, std::nullopt,
       "Witnesses should report every detail, even minor ones.", 0.55, 2},
      {"law-cpa-200#0", SourceKind::law_article, std::nullopt,
       "Appearance of a suspect at the request of an investigator is voluntary.", 0.42, 3},
  };
}

inline std::string render_golden(const PromptStrategy& s) {
  static const auto pool = load_exemplars(source_dir() / "data" / "exemplars" / "en.jsonl");
  auto exemplars = select_exemplars(pool, static_cast<std::size_t>(s.shots), 0);
  std::optional<PremiseSet> premises;
  if (s.uses_cikr) premises = golden_premises();
  return build_prompt(s,
                      {"The victim was stabbed after a quarrel. The wound was 6cm long and 17cm "
                       "deep near the heart."},
                      {"Murder intent can be recognized in this case."}, premises, exemplars)
      .rendered;
}

inline bool update_golden() {
  const char* v = std::getenv("LAPIS_UPDATE_GOLDEN");
  return v && std::string(v) == "1";
}

}  // namespace lapis::test
