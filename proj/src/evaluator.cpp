#include "lapis/evaluator.hpp"

#include <regex>

#include "lapis/error.hpp"
#include "lapis/text.hpp"

namespace lapis {

namespace {

constexpr const char* kRationaleNames[] = {"GPT4-VP-ZS",   "GPT4-IRAC-ZS", "GPT4-IRAC-1S",
                                           "GPT4-CILR-ZS", "GPT4-CILR-1S", "GPT4-CILR-3S",
                                           "DEXP-ANN",     "LIVE"};

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool iequals_at(std::string_view s, std::size_t pos, std::string_view word) {
  if (pos + word.size() > s.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i)
    if (lower(s[pos + i]) != word[i]) return false;
  return true;
}

// Matches `<word>` [spaces/*]* `:` [*]* at pos; returns offset past it.
std::optional<std::size_t> match_marker(std::string_view s, std::size_t pos, std::string_view word) {
  if (!iequals_at(s, pos, word)) return std::nullopt;
  std::size_t i = pos + word.size();
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '*' || s[i] == '_')) ++i;
  if (i >= s.size() || s[i] != ':') return std::nullopt;
  ++i;
  while (i < s.size() && (s[i] == '*' || s[i] == '_')) ++i;
  return i;
}

std::string strip_fences(std::string_view raw) {
  std::string out;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto nl = raw.find('\n', start);
    auto line = raw.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    if (trim(line).rfind("```", 0) != 0) {
      out.append(line);
      if (nl != std::string_view::npos) out.push_back('\n');
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

std::string clean_label(std::string_view v) {
  std::string s = trim(v);
  auto junk = [](char c) {
    return c == '*' || c == '_' || c == '.' || c == '"' || c == '\'' || c == '`' || c == ' ' ||
           c == '[' || c == ']';
  };
  while (!s.empty() && junk(s.back())) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && junk(s[b])) ++b;
  return to_lower_ascii(s.substr(b));
}

bool in_labels(const std::string& v, const std::vector<std::string>& labels) {
  for (const auto& l : labels)
    if (v == to_lower_ascii(l)) return true;
  return false;
}

}  // namespace

std::string to_string(RationaleType t) { return kRationaleNames[static_cast<int>(t)]; }

std::optional<RationaleType> parse_rationale_type(std::string_view s) {
  for (auto t : kAllRationaleTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

RationaleType rationale_type_of(const PromptStrategy& s) {
  auto t = parse_rationale_type(s.rationale_type());
  if (!t) throw InvalidInput("strategy " + s.name() + " has no rationale type");
  return *t;
}

std::vector<std::string> extract_ref_nos(std::string_view text) {
  static const std::regex kRef(R"(ref\.?\s*no\.?\s*:?\s*(\d+)\s*do\s*(\d+))", std::regex::icase);
  std::vector<std::string> out;
  std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kRef); it != std::sregex_iterator(); ++it) {
    auto ref = (*it)[1].str() + "do" + (*it)[2].str();
    if (std::find(out.begin(), out.end(), ref) == out.end()) out.push_back(std::move(ref));
  }
  return out;
}

ModelResponse parse_response(std::string raw, const LabelSynonyms& labels) {
  ModelResponse r;
  r.raw = std::move(raw);
  const std::string text = strip_fences(r.raw);

  // First line whose leading decoration is followed by "assessment:".
  std::optional<std::size_t> value_begin;
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    std::size_t i = line_start;
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '*' ||
                               text[i] == '#' || text[i] == '>' || text[i] == '-' || text[i] == '_'))
      ++i;
    if (auto after = match_marker(text, i, "assessment")) {
      value_begin = *after;
      break;
    }
    auto nl = text.find('\n', line_start);
    if (nl == std::string::npos) break;
    line_start = nl + 1;
  }
  if (!value_begin) return r;

  auto line_end = text.find('\n', *value_begin);
  if (line_end == std::string::npos) line_end = text.size();

  std::optional<std::size_t> marker_pos, rationale_begin;
  for (std::size_t i = *value_begin; i < text.size(); ++i) {
    if (auto after = match_marker(text, i, "rationale")) {
      marker_pos = i;
      rationale_begin = *after;
      break;
    }
  }

  auto value_end = marker_pos ? std::min(line_end, *marker_pos) : line_end;
  auto value = clean_label(std::string_view(text).substr(*value_begin, value_end - *value_begin));
  if (in_labels(value, labels.true_labels)) r.assessment = Assessment::True;
  else if (in_labels(value, labels.false_labels)) r.assessment = Assessment::False;
  else return r;

  if (!rationale_begin) return r;
  auto rationale = trim(std::string_view(text).substr(*rationale_begin));
  if (rationale.empty()) return r;
  r.rationale = Rationale{rationale, extract_ref_nos(rationale), RationaleType::LIVE};
  r.parse_status = ParseStatus::ok;
  return r;
}

json to_json(const ModelResponse& r) {
  json j = {{"raw", r.raw}, {"parse_status", r.ok() ? "ok" : "unparseable"}};
  j["assessment"] = r.assessment ? json(to_string(*r.assessment)) : json(nullptr);
  if (r.rationale) {
    j["rationale"] = {{"text", r.rationale->text},
                      {"cited_ref_nos", r.rationale->cited_ref_nos},
                      {"rationale_type", to_string(r.rationale->rationale_type)}};
  } else {
    j["rationale"] = nullptr;
  }
  return j;
}

ModelResponse model_response_from_json(const json& j) {
  ModelResponse r;
  r.raw = j.at("raw").get<std::string>();
  r.parse_status = j.at("parse_status").get<std::string>() == "ok" ? ParseStatus::ok
                                                                    : ParseStatus::unparseable;
  if (!j.at("assessment").is_null())
    r.assessment = assessment_from_bool(j["assessment"].get<std::string>() == "True");
  if (!j.at("rationale").is_null()) {
    Rationale rat;
    rat.text = j["rationale"].at("text").get<std::string>();
    rat.cited_ref_nos = j["rationale"].at("cited_ref_nos").get<std::vector<std::string>>();
    auto t = parse_rationale_type(j["rationale"].at("rationale_type").get<std::string>());
    if (!t) throw InvalidInput("unknown rationale_type");
    rat.rationale_type = *t;
    r.rationale = std::move(rat);
  }
  return r;
}

Evaluator::Evaluator(std::shared_ptr<GenerationService> service, EvaluatorOptions options)
    : service_(std::move(service)), options_(std::move(options)) {
  if (!service_) throw InvalidInput("evaluator needs a generation service");
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
  in_flight_ = std::make_unique<std::counting_semaphore<>>(
      static_cast<std::ptrdiff_t>(options_.max_in_flight));
}

ModelResponse Evaluator::assess(const PromptBundle& bundle) const {
  if (bundle.rendered.empty()) throw InvalidInput("prompt bundle is not rendered");
  for (std::size_t attempt = 0;; ++attempt) {
    std::string raw;
    in_flight_->acquire();
    try {
      raw = service_->generate(bundle.rendered, options_.params);
      in_flight_->release();
    } catch (const TransportError&) {
      in_flight_->release();
      if (attempt >= options_.retry_cap) throw;
      continue;
    } catch (...) {
      in_flight_->release();
      throw;
    }
    auto response = parse_response(std::move(raw), options_.labels);
    if (response.rationale) response.rationale->rationale_type = options_.rationale_type;
    return response;
  }
}

}  // namespace lapis
