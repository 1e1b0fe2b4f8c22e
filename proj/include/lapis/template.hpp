#pragma once

#include <map>
#include <string>
#include <string_view>

namespace lapis {

using TemplateVars = std::map<std::string, std::string, std::less<>>;

// Minimal named-placeholder templates.
//   {{name}}        replaced by vars[name]; an unknown name is an error
//   {{#name}} ...   a line holding only this marker opens a section that is
//   {{/name}}       kept iff vars[name] is non-empty; markers lines vanish
std::string render_template(std::string_view tmpl, const TemplateVars& vars);

}  // namespace lapis
