#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "prmkit/rng.hpp"
#include "prmkit/verify.hpp"

using namespace prmkit;
using namespace prmkit::verify;

TEST_CASE("step parsing splits on the delimiter and drops empty segments") {
  CHECK(parse_steps("A\n\nB\n\nC") == std::vector<std::string>{"A", "B", "C"});
  CHECK(parse_steps("A") == std::vector<std::string>{"A"});
  CHECK(parse_steps("A\n\n\n\nB") == std::vector<std::string>{"A", "B"});
  CHECK(parse_steps("\n\nA\n\n") == std::vector<std::string>{"A"});
  CHECK(parse_steps("a|b|c", "|") == std::vector<std::string>{"a", "b", "c"});
  CHECK(parse_steps("\n\n").empty());

  CHECK_THROWS_WITH_AS(parse_steps(""), "empty response", std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_steps("x", ""), "delimiter must be non-empty",
                       std::invalid_argument);
}

TEST_CASE("joining parsed steps reproduces texts without empty segments") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(rng.next_int(1, 6));
    std::vector<std::string> steps;
    std::string joined;
    for (int i = 0; i < n; ++i) {
      std::string s = "step" + std::to_string(rng.next_below(100));
      steps.push_back(s);
      if (i) joined += "\n\n";
      joined += s;
    }
    CHECK(parse_steps(joined) == steps);
  }
}

TEST_CASE("final answer extraction prefers the last boxed expression") {
  CHECK(extract_final_answer("The total is $\\boxed{60}$ dollars.") == "60");
  CHECK(extract_final_answer("\\boxed{1} then \\boxed{2}") == "2");
  CHECK(extract_final_answer("\\boxed{\\frac{1}{2}}") == "\\frac{1}{2}");
  CHECK(extract_final_answer("x \\boxed{ 42 } y") == "42");
  // nested braces stay balanced
  CHECK(extract_final_answer("\\boxed{\\sqrt{\\frac{a}{b}}}") ==
        "\\sqrt{\\frac{a}{b}}");
}

TEST_CASE("marker extraction is the fallback") {
  CHECK(extract_final_answer("Answer: 60") == "60");
  CHECK(extract_final_answer("Answer:60\ntrailing line") == "60");
  CHECK(extract_final_answer("Answer: 1\nAnswer: 2") == "2");
  // truncated boxed falls back to the marker form
  CHECK(extract_final_answer("\\boxed{unclosed\nAnswer: 9") == "9");
  CHECK(try_extract_final_answer("no answer here") == std::nullopt);
  CHECK(try_extract_final_answer("Answer:   ") == std::nullopt);
  CHECK_THROWS_WITH_AS(extract_final_answer("nothing"), "no answer found",
                       std::runtime_error);
}

TEST_CASE("canonical forms: integers") {
  auto c = canonicalize("60");
  CHECK(c.kind == AnswerKind::integer);
  CHECK(c.num == 60);
  CHECK(c.den == 1);
  CHECK(canonicalize("+60").num == 60);
  CHECK(canonicalize("-7").num == -7);
  CHECK(canonicalize("1,234,567").num == 1234567);
  CHECK(canonicalize("  42  ").num == 42);
  CHECK(canonicalize("$42$").num == 42);
  // unicode minus and fullwidth digits normalize
  CHECK(canonicalize("−3").num == -3);
  CHECK(canonicalize("４２").num == 42);
  // broken grouping is not an integer
  CHECK(canonicalize("12,34").kind == AnswerKind::raw_string);
}

TEST_CASE("canonical forms: fractions and decimals") {
  auto half = canonicalize("1/2");
  CHECK(half.kind == AnswerKind::rational);
  CHECK(half.num == 1);
  CHECK(half.den == 2);
  CHECK(canonicalize("\\frac{3}{6}").num == 1);
  CHECK(canonicalize("\\frac{3}{6}").den == 2);
  CHECK(canonicalize("-\\frac{1}{2}").num == -1);
  CHECK(canonicalize("\\dfrac{2}{4}").den == 2);
  CHECK(canonicalize("3/-6").num == -1);  // denominator sign moves up
  CHECK(canonicalize("3/-6").den == 2);

  auto dec = canonicalize("0.50");
  CHECK(dec.kind == AnswerKind::decimal);
  CHECK(dec.num == 1);
  CHECK(dec.den == 2);
  CHECK(canonicalize("-2.5").num == -5);
  CHECK(canonicalize(".5").num == 1);
  CHECK(canonicalize("3.0").num == 3);
  CHECK(canonicalize("3.0").den == 1);
}

TEST_CASE("canonical forms: choices and raw strings") {
  CHECK(canonicalize("b").kind == AnswerKind::choice_letter);
  CHECK(canonicalize("b").text == "B");
  CHECK(canonicalize("E").text == "E");
  CHECK(canonicalize("f").kind == AnswerKind::raw_string);
  CHECK(canonicalize("Hello World").kind == AnswerKind::raw_string);
  CHECK(canonicalize("Hello World").text == "hello world");  // case-folded
  CHECK(canonicalize("1/0").kind == AnswerKind::raw_string);  // undefined value
}

TEST_CASE("answer equivalence: reference cases") {
  CHECK(answers_equal("60", "60"));
  CHECK_FALSE(answers_equal("55", "60"));
  CHECK(answers_equal("1/2", "0.5"));
  CHECK(answers_equal("0.50", "1/2"));
  CHECK(answers_equal("\\frac{1}{2}", "2/4"));
  CHECK(answers_equal("3.0", "3"));
  CHECK(answers_equal("b", "B"));
  CHECK_FALSE(answers_equal("b", "c"));
  CHECK(answers_equal("  foo ", "FOO"));
  CHECK_FALSE(answers_equal("1/2", "b"));       // numeric vs choice
  CHECK_FALSE(answers_equal("0.5", "half"));    // numeric vs raw
  CHECK(answers_equal("-3", "−3"));
}

TEST_CASE("equivalence is exact, not floating point") {
  // 18 fractional digits exceed double precision but stay exact here
  CHECK_FALSE(answers_equal("0.100000000000000001", "0.1"));
  CHECK(answers_equal("0.100000000000000001", "0.100000000000000001"));
  // 19 digits exceed the supported range and degrade to raw strings
  CHECK(canonicalize("0.1000000000000000001").kind == AnswerKind::raw_string);
  CHECK_FALSE(answers_equal("9007199254740993", "9007199254740992"));  // 2^53 + 1
}

namespace {

// Random rendering of num/den in one of the accepted surface forms.
std::string render_random(Rng& rng, std::int64_t num, std::int64_t den) {
  const auto pick = rng.next_below(4);
  std::string out;
  if (pick == 0) {
    out = std::to_string(num) + "/" + std::to_string(den);
  } else if (pick == 1) {
    out = (num < 0 ? "-" : "") + std::string("\\frac{") +
          std::to_string(num < 0 ? -num : num) + "}{" + std::to_string(den) + "}";
  } else if (pick == 2) {
    // scale to an equal unreduced fraction
    const std::int64_t k = rng.next_int(1, 4);
    out = std::to_string(num * k) + "/" + std::to_string(den * k);
  } else {
    out = std::to_string(2 * num) + "/" + std::to_string(2 * den);
  }
  if (rng.bernoulli(0.3)) out = "$" + out + "$";
  if (rng.bernoulli(0.3)) out = " " + out + "  ";
  return out;
}

}  // namespace

TEST_CASE("numeric equality matches the cross-multiplication oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::int64_t n1 = rng.next_int(-30, 30);
    const std::int64_t d1 = rng.next_int(1, 12);
    const std::int64_t n2 = rng.next_int(-30, 30);
    const std::int64_t d2 = rng.next_int(1, 12);
    const bool oracle = static_cast<__int128>(n1) * d2 == static_cast<__int128>(n2) * d1;
    const std::string a = render_random(rng, n1, d1);
    const std::string b = render_random(rng, n2, d2);
    CAPTURE(a);
    CAPTURE(b);
    CHECK(answers_equal(a, b) == oracle);
    CHECK(answers_equal(a, a));             // reflexive
    CHECK(answers_equal(b, a) == oracle);   // symmetric
  }
}

TEST_CASE("canonicalization is idempotent through its own rendering") {
  Rng rng(7);
  std::vector<std::string> pool = {"60",    "-7",   "1/2", "\\frac{9}{12}", "0.125",
                                   "-2.50", "3.0",  "b",   "E",             "foo Bar",
                                   "1/0",   "12,34", ".", "1,234"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    if (rng.bernoulli(0.5)) {
      s = pool[rng.next_below(pool.size())];
    } else {
      s = render_random(rng, rng.next_int(-50, 50), rng.next_int(1, 20));
    }
    const CanonicalAnswer c = canonicalize(s);
    const CanonicalAnswer c2 = canonicalize(to_string(c));
    CAPTURE(s);
    CHECK(c2.kind == c.kind);
    CHECK(c2.num == c.num);
    CHECK(c2.den == c.den);
    CHECK(c2.text == c.text);
    // grouping keys agree exactly with equality
    CHECK((canonical_key(c) == canonical_key(c2)) == equal(c, c2));
  }
}

TEST_CASE("grouping keys partition answers like equality does") {
  const std::vector<std::string> answers = {"1/2",  "0.5", "2/4", "60", "60.0",
                                            "55",   "b",   "B",   "c",  "foo",
                                            "FOO ", "bar"};
  for (const auto& a : answers)
    for (const auto& b : answers) {
      const bool same_key =
          canonical_key(canonicalize(a)) == canonical_key(canonicalize(b));
      CHECK(same_key == answers_equal(a, b));
    }
  CHECK(canonical_key(canonicalize("1/2")) == "n:1/2");
  CHECK(canonical_key(canonicalize("b")) == "c:B");
  CHECK(canonical_key(canonicalize("foo")) == "r:foo");
}
