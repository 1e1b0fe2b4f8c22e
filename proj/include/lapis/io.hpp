#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace lapis {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// One parsed JSON object per non-blank line. Throws ParseError with the
// 1-based line number on malformed JSON or non-object lines.
struct JsonLine {
  std::size_t line;
  json value;
};
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);

std::string to_jsonl(const std::vector<json>& records);

}  // namespace lapis
