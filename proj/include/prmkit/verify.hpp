#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace prmkit::verify {

enum class AnswerKind { integer, rational, decimal, choice_letter, raw_string };

// Canonical form of an answer string. Numeric kinds carry a fully reduced
// fraction with den > 0; reduced form is unique, so value equality is
// field-wise equality. choice_letter carries the upper-cased letter in
// text; raw_string carries the trimmed, case-folded original.
struct CanonicalAnswer {
  AnswerKind kind = AnswerKind::raw_string;
  std::int64_t num = 0;
  std::int64_t den = 1;
  std::string text;

  bool is_numeric() const {
    return kind == AnswerKind::integer || kind == AnswerKind::rational ||
           kind == AnswerKind::decimal;
  }
};

// Splits on the literal delimiter, dropping empty segments (leading,
// trailing, or produced by doubled delimiters). Throws invalid_argument
// "empty response" / "delimiter must be non-empty".
std::vector<std::string> parse_steps(const std::string& text,
                                     const std::string& delimiter = "\n\n");

// Last \boxed{...} with balanced braces; else the suffix after the last
// "Answer:" marker; trimmed. nullopt when neither pattern is present.
std::optional<std::string> try_extract_final_answer(const std::string& text);

// Same, but throws runtime_error "no answer found".
std::string extract_final_answer(const std::string& text);

CanonicalAnswer canonicalize(const std::string& answer);

bool equal(const CanonicalAnswer& a, const CanonicalAnswer& b);

// answers_equal(a, b) == equal(canonicalize(a), canonicalize(b)).
bool answers_equal(const std::string& a, const std::string& b);

// Renders the canonical form back to a string. Canonicalizing the result
// reproduces the same kind and value (idempotence).
std::string to_string(const CanonicalAnswer& a);

// Stable grouping key ("n:1/2", "c:B", "r:foo"); equal answers share a key.
std::string canonical_key(const CanonicalAnswer& a);

}  // namespace prmkit::verify
