#include "lapis/template.hpp"

#include <vector>

#include "lapis/error.hpp"
#include "lapis/text.hpp"

namespace lapis {

namespace {

std::string lookup(const TemplateVars& vars, std::string_view name) {
  auto it = vars.find(name);
  if (it == vars.end()) throw InvalidInput("template placeholder '" + std::string(name) + "' has no value");
  return it->second;
}

std::string substitute(std::string_view line, const TemplateVars& vars) {
  std::string out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    auto open = line.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(line.substr(pos));
      break;
    }
    auto close = line.find("}}", open + 2);
    if (close == std::string_view::npos) throw InvalidInput("unterminated template placeholder");
    out.append(line.substr(pos, open - pos));
    out += lookup(vars, trim(line.substr(open + 2, close - open - 2)));
    pos = close + 2;
  }
  return out;
}

// "{{#name}}" -> ('#', name)
bool section_marker(std::string_view line, char& kind, std::string& name) {
  auto t = trim(line);
  if (t.size() < 6 || t.rfind("{{", 0) != 0 || t.substr(t.size() - 2) != "}}") return false;
  if (t[2] != '#' && t[2] != '/') return false;
  kind = t[2];
  name = trim(std::string_view(t).substr(3, t.size() - 5));
  return true;
}

}  // namespace

std::string render_template(std::string_view tmpl, const TemplateVars& vars) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= tmpl.size()) {
    auto nl = tmpl.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(tmpl.substr(start));
      break;
    }
    lines.push_back(tmpl.substr(start, nl - start));
    start = nl + 1;
  }

  std::string out;
  std::vector<std::pair<std::string, bool>> stack;  // (name, active)
  bool first = true;
  for (auto line : lines) {
    char kind = 0;
    std::string name;
    if (section_marker(line, kind, name)) {
      if (kind == '#') {
        bool parent = stack.empty() || stack.back().second;
        stack.emplace_back(name, parent && !lookup(vars, name).empty());
      } else {
        if (stack.empty() || stack.back().first != name)
          throw InvalidInput("unbalanced template section '" + name + "'");
        stack.pop_back();
      }
      continue;
    }
    if (!stack.empty() && !stack.back().second) continue;
    if (!first) out.push_back('\n');
    out += substitute(line, vars);
    first = false;
  }
  if (!stack.empty()) throw InvalidInput("unclosed template section '" + stack.back().first + "'");
  return out;
}

}  // namespace lapis
