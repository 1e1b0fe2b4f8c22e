#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace lapis {

// The current investigation facts C. May be empty.
struct InvestigationContext {
  std::string text;
  bool operator==(const InvestigationContext&) const = default;
};

// A legal claim h answerable True/False.
struct Hypothesis {
  std::string text;
  bool operator==(const Hypothesis&) const = default;
};

enum class Assessment { False = 0, True = 1 };

inline std::string to_string(Assessment a) { return a == Assessment::True ? "True" : "False"; }
inline Assessment assessment_from_bool(bool b) { return b ? Assessment::True : Assessment::False; }

}  // namespace lapis
