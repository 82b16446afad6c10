#include "prmkit/verify.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string_view>

namespace prmkit::verify {
namespace {

// Targeted normalization of codepoints that show up in math answer text.
// Full Unicode NFC is out of scope here; these cover what the extraction
// and equivalence paths actually meet: unicode minus / dashes to '-',
// fraction slashes to '/', hard spaces to ' ', fullwidth ASCII to ASCII.
std::string normalize_text(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  const std::size_t n = in.size();
  std::size_t i = 0;
  auto byte = [&](std::size_t k) { return static_cast<unsigned char>(in[k]); };
  while (i < n) {
    const unsigned char c = byte(i);
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
      ++i;
      continue;
    }
    std::uint32_t cp = 0;
    std::size_t len = 0;
    if ((c >> 5) == 0x6 && i + 1 < n) {
      cp = (c & 0x1Fu) << 6 | (byte(i + 1) & 0x3Fu);
      len = 2;
    } else if ((c >> 4) == 0xE && i + 2 < n) {
      cp = (c & 0x0Fu) << 12 | (byte(i + 1) & 0x3Fu) << 6 | (byte(i + 2) & 0x3Fu);
      len = 3;
    } else if ((c >> 3) == 0x1E && i + 3 < n) {
      cp = (c & 0x07u) << 18 | (byte(i + 1) & 0x3Fu) << 12 |
           (byte(i + 2) & 0x3Fu) << 6 | (byte(i + 3) & 0x3Fu);
      len = 4;
    } else {
      out.push_back(in[i]);  // malformed byte, pass through
      ++i;
      continue;
    }
    switch (cp) {
      case 0x2212:  // minus sign
      case 0x2013:  // en dash
      case 0x2014:  // em dash
        out.push_back('-');
        break;
      case 0x2044:  // fraction slash
      case 0x2215:  // division slash
        out.push_back('/');
        break;
      case 0x00A0:  // no-break space
      case 0x2009:  // thin space
      case 0x202F:  // narrow no-break space
        out.push_back(' ');
        break;
      default:
        if (cp >= 0xFF10 && cp <= 0xFF19) {
          out.push_back(static_cast<char>('0' + (cp - 0xFF10)));
        } else if (cp >= 0xFF21 && cp <= 0xFF3A) {
          out.push_back(static_cast<char>('A' + (cp - 0xFF21)));
        } else if (cp >= 0xFF41 && cp <= 0xFF5A) {
          out.push_back(static_cast<char>('a' + (cp - 0xFF41)));
        } else {
          out.append(in, i, len);
        }
    }
    i += len;
  }
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string fold_ascii(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Strict integer parse: optional sign, then digits only, full match.
bool parse_i64(std::string_view s, std::int64_t& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

// "1,234,567" -> "1234567"; anything else unchanged.
std::string strip_thousands(const std::string& s) {
  std::string_view v = s;
  std::size_t start = 0;
  if (!v.empty() && (v[0] == '+' || v[0] == '-')) start = 1;
  std::size_t p = start;
  while (p < v.size() && std::isdigit(static_cast<unsigned char>(v[p]))) ++p;
  const std::size_t lead = p - start;
  if (lead == 0 || lead > 3 || p == v.size()) return s;
  while (p < v.size()) {
    if (v[p] != ',') return s;
    for (int k = 0; k < 3; ++k)
      if (p + 1 + k >= v.size() || !std::isdigit(static_cast<unsigned char>(v[p + 1 + k])))
        return s;
    p += 4;
  }
  std::string out;
  for (char c : s)
    if (c != ',') out.push_back(c);
  return out;
}

// Reduced fraction with positive denominator; false on den == 0 or overflow.
bool make_fraction(std::int64_t num, std::int64_t den, CanonicalAnswer& out,
                   AnswerKind kind) {
  if (den == 0) return false;
  if (num == std::numeric_limits<std::int64_t>::min() ||
      den == std::numeric_limits<std::int64_t>::min())
    return false;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  out.kind = kind;
  out.num = num;
  out.den = den;
  out.text.clear();
  return true;
}

bool try_integer(const std::string& s, CanonicalAnswer& out) {
  std::int64_t v = 0;
  if (!parse_i64(strip_thousands(s), v)) return false;
  out.kind = AnswerKind::integer;
  out.num = v;
  out.den = 1;
  out.text.clear();
  return true;
}

// \frac{a}{b}, \dfrac{a}{b}, \tfrac{a}{b}, optional sign before the macro.
bool try_latex_fraction(const std::string& s, CanonicalAnswer& out) {
  std::string_view v = s;
  std::int64_t sign = 1;
  if (!v.empty() && (v.front() == '-' || v.front() == '+')) {
    if (v.front() == '-') sign = -1;
    v.remove_prefix(1);
  }
  for (std::string_view macro : {"\\frac", "\\dfrac", "\\tfrac"}) {
    if (v.substr(0, macro.size()) == macro) {
      v.remove_prefix(macro.size());
      if (v.size() < 5 || v.front() != '{') return false;
      const std::size_t c1 = v.find('}', 1);
      if (c1 == std::string_view::npos || c1 + 1 >= v.size() || v[c1 + 1] != '{')
        return false;
      const std::size_t c2 = v.find('}', c1 + 2);
      if (c2 == std::string_view::npos || c2 + 1 != v.size()) return false;
      std::int64_t num = 0, den = 0;
      if (!parse_i64(trim(v.substr(1, c1 - 1)), num)) return false;
      if (!parse_i64(trim(v.substr(c1 + 2, c2 - c1 - 2)), den)) return false;
      if (num == std::numeric_limits<std::int64_t>::min()) return false;
      return make_fraction(sign * num, den, out, AnswerKind::rational);
    }
  }
  return false;
}

bool try_slash_fraction(const std::string& s, CanonicalAnswer& out) {
  const std::size_t slash = s.find('/');
  if (slash == std::string::npos || s.find('/', slash + 1) != std::string::npos)
    return false;
  std::int64_t num = 0, den = 0;
  if (!parse_i64(trim(std::string_view(s).substr(0, slash)), num)) return false;
  if (!parse_i64(trim(std::string_view(s).substr(slash + 1)), den)) return false;
  return make_fraction(num, den, out, AnswerKind::rational);
}

bool try_decimal(const std::string& s, CanonicalAnswer& out) {
  std::string_view v = s;
  std::int64_t sign = 1;
  if (!v.empty() && (v.front() == '-' || v.front() == '+')) {
    if (v.front() == '-') sign = -1;
    v.remove_prefix(1);
  }
  const std::size_t dot = v.find('.');
  if (dot == std::string_view::npos) return false;
  const std::string_view int_part = v.substr(0, dot);
  const std::string_view frac_part = v.substr(dot + 1);
  if (int_part.empty() && frac_part.empty()) return false;
  if (frac_part.size() > 18) return false;
  unsigned __int128 acc = 0;
  for (char c : int_part) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    acc = acc * 10 + static_cast<unsigned>(c - '0');
    if (acc > static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max()))
      return false;
  }
  std::int64_t den = 1;
  for (char c : frac_part) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    acc = acc * 10 + static_cast<unsigned>(c - '0');
    den *= 10;
    if (acc > static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max()))
      return false;
  }
  return make_fraction(sign * static_cast<std::int64_t>(acc), den, out,
                       AnswerKind::decimal);
}

bool try_choice(const std::string& s, CanonicalAnswer& out) {
  if (s.size() != 1) return false;
  const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  if (c < 'A' || c > 'E') return false;
  out.kind = AnswerKind::choice_letter;
  out.num = 0;
  out.den = 1;
  out.text.assign(1, c);
  return true;
}

std::string render_i128(unsigned __int128 v) {
  if (v == 0) return "0";
  std::string digits;
  while (v > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  return std::string(digits.rbegin(), digits.rend());
}

}  // namespace

std::vector<std::string> parse_steps(const std::string& text,
                                     const std::string& delimiter) {
  if (text.empty()) throw std::invalid_argument("empty response");
  if (delimiter.empty()) throw std::invalid_argument("delimiter must be non-empty");
  std::vector<std::string> steps;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find(delimiter, pos);
    const std::size_t end = next == std::string::npos ? text.size() : next;
    if (end > pos) steps.push_back(text.substr(pos, end - pos));
    if (next == std::string::npos) break;
    pos = next + delimiter.size();
  }
  return steps;
}

std::optional<std::string> try_extract_final_answer(const std::string& text) {
  static constexpr std::string_view kBoxed = "\\boxed{";
  const std::size_t bpos = text.rfind(kBoxed);
  if (bpos != std::string::npos) {
    std::size_t i = bpos + kBoxed.size();
    int depth = 1;
    const std::size_t start = i;
    for (; i < text.size(); ++i) {
      if (text[i] == '{') ++depth;
      else if (text[i] == '}' && --depth == 0) break;
    }
    if (i < text.size()) return trim(std::string_view(text).substr(start, i - start));
    // unbalanced (truncated generation): fall through to the marker form
  }
  static constexpr std::string_view kMarker = "Answer:";
  const std::size_t mpos = text.rfind(kMarker);
  if (mpos != std::string::npos) {
    std::size_t start = mpos + kMarker.size();
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string ans = trim(std::string_view(text).substr(start, end - start));
    if (!ans.empty()) return ans;
  }
  return std::nullopt;
}

std::string extract_final_answer(const std::string& text) {
  auto ans = try_extract_final_answer(text);
  if (!ans) throw std::runtime_error("no answer found");
  return *ans;
}

CanonicalAnswer canonicalize(const std::string& answer) {
  std::string s = trim(normalize_text(answer));
  // strip math-mode dollar delimiters
  while (!s.empty() && s.front() == '$') s.erase(s.begin());
  while (!s.empty() && s.back() == '$') s.pop_back();
  s = trim(s);

  CanonicalAnswer out;
  if (try_integer(s, out)) return out;
  if (try_latex_fraction(s, out)) return out;
  if (try_slash_fraction(s, out)) return out;
  if (try_decimal(s, out)) return out;
  if (try_choice(s, out)) return out;
  out.kind = AnswerKind::raw_string;
  out.num = 0;
  out.den = 1;
  out.text = fold_ascii(s);
  return out;
}

bool equal(const CanonicalAnswer& a, const CanonicalAnswer& b) {
  if (a.is_numeric() && b.is_numeric()) return a.num == b.num && a.den == b.den;
  if (a.kind != b.kind) return false;
  return a.text == b.text;
}

bool answers_equal(const std::string& a, const std::string& b) {
  return equal(canonicalize(a), canonicalize(b));
}

std::string to_string(const CanonicalAnswer& a) {
  switch (a.kind) {
    case AnswerKind::integer:
      return std::to_string(a.num);
    case AnswerKind::rational:
      return std::to_string(a.num) + "/" + std::to_string(a.den);
    case AnswerKind::decimal: {
      // den is 2^x * 5^y by construction; render the exact expansion
      std::int64_t d = a.den;
      int twos = 0, fives = 0;
      while (d % 2 == 0) { d /= 2; ++twos; }
      while (d % 5 == 0) { d /= 5; ++fives; }
      if (d != 1) throw std::logic_error("decimal denominator not of form 2^x*5^y");
      const int k = twos > fives ? twos : fives;
      unsigned __int128 scale = 1;
      for (int j = 0; j < k; ++j) scale *= 10;
      scale /= static_cast<unsigned __int128>(a.den);
      const bool neg = a.num < 0;
      const unsigned __int128 mag =
          static_cast<unsigned __int128>(neg ? -(a.num + 1) : a.num) + (neg ? 1 : 0);
      unsigned __int128 pow10k = 1;
      for (int j = 0; j < k; ++j) pow10k *= 10;
      const unsigned __int128 scaled = mag * scale;
      std::string int_part = render_i128(scaled / pow10k);
      std::string frac = render_i128(scaled % pow10k);
      if (frac.size() < static_cast<std::size_t>(k))
        frac.insert(frac.begin(), static_cast<std::size_t>(k) - frac.size(), '0');
      while (frac.size() > 1 && frac.back() == '0') frac.pop_back();
      if (k == 0) frac = "0";
      return (neg ? "-" : "") + int_part + "." + frac;
    }
    case AnswerKind::choice_letter:
      return a.text;
    case AnswerKind::raw_string:
      return a.text;
  }
  throw std::logic_error("unreachable");
}

std::string canonical_key(const CanonicalAnswer& a) {
  if (a.is_numeric())
    return "n:" + std::to_string(a.num) + "/" + std::to_string(a.den);
  if (a.kind == AnswerKind::choice_letter) return "c:" + a.text;
  return "r:" + a.text;
}

}  // namespace prmkit::verify
