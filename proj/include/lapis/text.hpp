#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace lapis {

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

// Unicode NFC. Invalid UTF-8 is passed through unchanged.
std::string nfc(std::string_view s);

// Collapses every run of whitespace to one space and trims the ends.
std::string collapse_whitespace(std::string_view s);

// NFC followed by collapse_whitespace.
std::string normalize_text(std::string_view s);

// Splits on blank lines (a newline, optional spaces, another newline).
// Empty sections are dropped; sections are returned untrimmed.
std::vector<std::string> split_sections(std::string_view body);

// Sentence segmentation over whitespace-normalized text. A sentence ends at
// '.', '!' or '?' (plus any closing quotes or brackets) followed by whitespace.
// Joining the result with single spaces reproduces the input.
std::vector<std::string> split_sentences(std::string_view normalized);

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
  virtual std::string id() const = 0;

  std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

// Maximal runs of ASCII alphanumerics or non-ASCII bytes form words; every
// other non-space character is a token on its own.
class WordPunctTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> tokenize(std::string_view text) const override;
  std::string id() const override { return "word-punct"; }
};

std::shared_ptr<const Tokenizer> default_tokenizer();

std::string sha256_hex(std::string_view data);
std::uint64_t fnv1a64(std::string_view data);

}  // namespace lapis
