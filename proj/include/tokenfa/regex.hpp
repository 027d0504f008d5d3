#ifndef TOKENFA_REGEX_HPP
#define TOKENFA_REGEX_HPP

// Regular-expression syntax tree and parser.
//
// Dialect (byte oriented, fully anchored):
//   literals, `.` (any byte), `( )`, `|`, `*`, `+`, `?`, `{m}`, `{m,}`, `{m,n}`,
//   `[...]` / `[^...]` classes with ranges, `\` escapes (`\n \t \r \f \v \0
//   \xHH \d \D \w \W \s \S`, anything else is taken literally).
// Non-ASCII literals become the concatenation of their UTF-8 bytes.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tokenfa/error.hpp"

namespace tokenfa {

/// Inclusive byte range.
struct ByteRange {
  std::uint8_t lo;
  std::uint8_t hi;

  friend bool operator==(const ByteRange &, const ByteRange &) = default;
};

/// Sorted, non-overlapping, non-adjacent list of byte ranges.
class ByteSet {
public:
  ByteSet() = default;

  static ByteSet single(std::uint8_t b) { return range(b, b); }
  static ByteSet range(std::uint8_t lo, std::uint8_t hi) {
    ByteSet s;
    s.add(lo, hi);
    return s;
  }
  static ByteSet all() { return range(0, 255); }

  void add(std::uint8_t lo, std::uint8_t hi) {
    if (lo > hi)
      std::swap(lo, hi);
    ranges_.push_back({lo, hi});
    normalize();
  }

  void add(const ByteSet &other) {
    ranges_.insert(ranges_.end(), other.ranges_.begin(), other.ranges_.end());
    normalize();
  }

  ByteSet complement() const {
    ByteSet out;
    int next = 0;
    for (const auto &r : ranges_) {
      if (r.lo > next)
        out.ranges_.push_back({static_cast<std::uint8_t>(next),
                               static_cast<std::uint8_t>(r.lo - 1)});
      next = r.hi + 1;
    }
    if (next <= 255)
      out.ranges_.push_back({static_cast<std::uint8_t>(next), 255});
    return out;
  }

  bool contains(std::uint8_t b) const {
    auto it = std::upper_bound(
        ranges_.begin(), ranges_.end(), b,
        [](std::uint8_t v, const ByteRange &r) { return v < r.lo; });
    return it != ranges_.begin() && std::prev(it)->hi >= b;
  }

  bool empty() const noexcept { return ranges_.empty(); }
  const std::vector<ByteRange> &ranges() const noexcept { return ranges_; }

  friend bool operator==(const ByteSet &, const ByteSet &) = default;

private:
  void normalize() {
    std::sort(ranges_.begin(), ranges_.end(),
              [](const ByteRange &a, const ByteRange &b) { return a.lo < b.lo; });
    std::vector<ByteRange> merged;
    for (const auto &r : ranges_) {
      if (!merged.empty() && int(r.lo) <= int(merged.back().hi) + 1)
        merged.back().hi = std::max(merged.back().hi, r.hi);
      else
        merged.push_back(r);
    }
    ranges_ = std::move(merged);
  }

  std::vector<ByteRange> ranges_;
};

enum class RegexKind {
  Empty,
  Literal,
  ByteClass,
  Concat,
  Alternation,
  Star,
  Plus,
  Optional,
  Repeat,
};

/// Regex syntax tree node. Value type; children are owned.
struct RegexAst {
  RegexKind kind = RegexKind::Empty;
  std::uint8_t byte = 0;                 // Literal
  ByteSet bytes;                         // ByteClass
  std::vector<RegexAst> children;        // Concat, Alternation, unary ops
  std::size_t min = 0;                   // Repeat
  std::optional<std::size_t> max;        // Repeat; nullopt = unbounded

  static RegexAst empty() { return {}; }
  static RegexAst literal(std::uint8_t b) {
    RegexAst n;
    n.kind = RegexKind::Literal;
    n.byte = b;
    return n;
  }
  static RegexAst byte_class(ByteSet s) {
    RegexAst n;
    n.kind = RegexKind::ByteClass;
    n.bytes = std::move(s);
    return n;
  }
  static RegexAst concat(std::vector<RegexAst> cs) {
    RegexAst n;
    n.kind = RegexKind::Concat;
    n.children = std::move(cs);
    return n;
  }
  static RegexAst alternation(std::vector<RegexAst> cs) {
    RegexAst n;
    n.kind = RegexKind::Alternation;
    n.children = std::move(cs);
    return n;
  }
  static RegexAst unary(RegexKind k, RegexAst child) {
    RegexAst n;
    n.kind = k;
    n.children.push_back(std::move(child));
    return n;
  }
  static RegexAst repeat(RegexAst child, std::size_t lo,
                         std::optional<std::size_t> hi) {
    RegexAst n = unary(RegexKind::Repeat, std::move(child));
    n.min = lo;
    n.max = hi;
    return n;
  }

  friend bool operator==(const RegexAst &, const RegexAst &) = default;
};

/// Escape every byte of `text` that has meaning in the dialect.
inline std::string regex_escape(std::string_view text) {
  static constexpr std::string_view special = "\\.()|*+?{}[]^$-";
  std::string out;
  for (char c : text) {
    if (special.find(c) != std::string_view::npos)
      out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

namespace detail {

class RegexParser {
public:
  explicit RegexParser(std::string_view p) : p_(p) {}

  RegexAst parse() {
    RegexAst ast = parse_alternation();
    if (pos_ < p_.size()) {
      // only an unmatched ')' can stop the top-level alternation
      throw RegexSyntaxError(pos_, "unbalanced parenthesis");
    }
    return ast;
  }

private:
  bool at_end() const { return pos_ >= p_.size(); }
  char peek() const { return p_[pos_]; }

  RegexAst parse_alternation() {
    std::vector<RegexAst> alts;
    alts.push_back(parse_concat());
    while (!at_end() && peek() == '|') {
      ++pos_;
      alts.push_back(parse_concat());
    }
    if (alts.size() == 1)
      return std::move(alts.front());
    return RegexAst::alternation(std::move(alts));
  }

  RegexAst parse_concat() {
    std::vector<RegexAst> items;
    while (!at_end() && peek() != '|' && peek() != ')') {
      auto atoms = parse_atom();
      // a multi-byte UTF-8 literal arrives as several atoms; a trailing
      // quantifier applies to the whole character
      RegexAst unit = atoms.size() == 1 ? std::move(atoms.front())
                                        : RegexAst::concat(std::move(atoms));
      items.push_back(parse_quantifiers(std::move(unit)));
    }
    if (items.empty())
      return RegexAst::empty();
    if (items.size() == 1)
      return std::move(items.front());
    return RegexAst::concat(std::move(items));
  }

  RegexAst parse_quantifiers(RegexAst atom) {
    while (!at_end()) {
      char c = peek();
      if (c == '*') {
        ++pos_;
        atom = RegexAst::unary(RegexKind::Star, std::move(atom));
      } else if (c == '+') {
        ++pos_;
        atom = RegexAst::unary(RegexKind::Plus, std::move(atom));
      } else if (c == '?') {
        ++pos_;
        atom = RegexAst::unary(RegexKind::Optional, std::move(atom));
      } else if (c == '{') {
        atom = parse_bounds(std::move(atom));
      } else {
        break;
      }
    }
    return atom;
  }

  std::optional<std::size_t> parse_number() {
    std::size_t start = pos_;
    std::size_t value = 0;
    while (!at_end() && peek() >= '0' && peek() <= '9') {
      value = value * 10 + std::size_t(peek() - '0');
      if (value > 1'000'000'000)
        throw RegexSyntaxError(start, "bad repeat bounds: number too large");
      ++pos_;
    }
    if (pos_ == start)
      return std::nullopt;
    return value;
  }

  RegexAst parse_bounds(RegexAst atom) {
    std::size_t open = pos_++;
    auto lo = parse_number();
    if (!lo)
      throw RegexSyntaxError(open, "bad repeat bounds: expected minimum");
    std::optional<std::size_t> hi = lo;
    if (!at_end() && peek() == ',') {
      ++pos_;
      hi = parse_number(); // empty means unbounded
    }
    if (at_end() || peek() != '}')
      throw RegexSyntaxError(open, "bad repeat bounds: missing '}'");
    ++pos_;
    if (hi && *hi < *lo)
      throw RegexSyntaxError(open, "bad repeat bounds: min exceeds max");
    return RegexAst::repeat(std::move(atom), *lo, hi);
  }

  std::vector<RegexAst> parse_atom() {
    std::size_t start = pos_;
    char c = peek();
    switch (c) {
    case '(': {
      ++pos_;
      RegexAst inner = parse_alternation();
      if (at_end() || peek() != ')')
        throw RegexSyntaxError(start, "unbalanced parenthesis");
      ++pos_;
      return one(std::move(inner));
    }
    case '[':
      return one(parse_class());
    case '.':
      ++pos_;
      return one(RegexAst::byte_class(ByteSet::all()));
    case '\\':
      return one(parse_escape().to_ast());
    case '*':
    case '+':
    case '?':
    case '{':
      throw RegexSyntaxError(start, "nothing to repeat");
    default:
      break;
    }
    ++pos_;
    std::vector<RegexAst> out;
    out.push_back(RegexAst::literal(static_cast<std::uint8_t>(c)));
    // swallow UTF-8 continuation bytes of the same character
    if (static_cast<std::uint8_t>(c) >= 0xC0) {
      while (!at_end() && (static_cast<std::uint8_t>(peek()) & 0xC0) == 0x80)
        out.push_back(RegexAst::literal(static_cast<std::uint8_t>(p_[pos_++])));
    }
    return out;
  }

  static std::vector<RegexAst> one(RegexAst a) {
    std::vector<RegexAst> v;
    v.push_back(std::move(a));
    return v;
  }

  struct Escaped {
    std::optional<std::uint8_t> byte; // single byte, else `set`
    ByteSet set;

    RegexAst to_ast() const {
      return byte ? RegexAst::literal(*byte) : RegexAst::byte_class(set);
    }
  };

  static ByteSet digit_set() { return ByteSet::range('0', '9'); }
  static ByteSet word_set() {
    ByteSet s = ByteSet::range('a', 'z');
    s.add('A', 'Z');
    s.add('0', '9');
    s.add('_', '_');
    return s;
  }
  static ByteSet space_set() {
    ByteSet s = ByteSet::range('\t', '\r');
    s.add(' ', ' ');
    return s;
  }

  static int hex_value(char c) {
    if (c >= '0' && c <= '9')
      return c - '0';
    if (c >= 'a' && c <= 'f')
      return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
      return c - 'A' + 10;
    return -1;
  }

  Escaped parse_escape() {
    std::size_t start = pos_++;
    if (at_end())
      throw RegexSyntaxError(start, "trailing backslash");
    char c = p_[pos_++];
    Escaped e;
    switch (c) {
    case 'n': e.byte = '\n'; break;
    case 't': e.byte = '\t'; break;
    case 'r': e.byte = '\r'; break;
    case 'f': e.byte = '\f'; break;
    case 'v': e.byte = '\v'; break;
    case '0': e.byte = 0; break;
    case 'x': {
      if (pos_ + 2 > p_.size() || hex_value(p_[pos_]) < 0 ||
          hex_value(p_[pos_ + 1]) < 0)
        throw RegexSyntaxError(start, "bad \\x escape");
      e.byte = static_cast<std::uint8_t>(hex_value(p_[pos_]) * 16 +
                                         hex_value(p_[pos_ + 1]));
      pos_ += 2;
      break;
    }
    case 'd': e.set = digit_set(); break;
    case 'D': e.set = digit_set().complement(); break;
    case 'w': e.set = word_set(); break;
    case 'W': e.set = word_set().complement(); break;
    case 's': e.set = space_set(); break;
    case 'S': e.set = space_set().complement(); break;
    default:
      if (static_cast<std::uint8_t>(c) >= 0x80)
        throw RegexSyntaxError(start, "cannot escape a non-ASCII byte");
      e.byte = static_cast<std::uint8_t>(c);
      break;
    }
    return e;
  }

  // One class member: a byte, or a set from a class escape.
  Escaped class_item() {
    if (peek() == '\\')
      return parse_escape();
    auto b = static_cast<std::uint8_t>(p_[pos_]);
    if (b >= 0x80)
      throw RegexSyntaxError(pos_, "non-ASCII character in byte class");
    ++pos_;
    Escaped e;
    e.byte = b;
    return e;
  }

  RegexAst parse_class() {
    std::size_t open = pos_++;
    bool negate = false;
    if (!at_end() && peek() == '^') {
      negate = true;
      ++pos_;
    }
    ByteSet set;
    bool any = false;
    while (true) {
      if (at_end())
        throw RegexSyntaxError(open, "unterminated byte class");
      if (peek() == ']')
        break;
      Escaped lo = class_item();
      if (lo.byte && pos_ + 1 < p_.size() && peek() == '-' &&
          p_[pos_ + 1] != ']') {
        std::size_t dash = pos_++;
        Escaped hi = class_item();
        if (!hi.byte)
          throw RegexSyntaxError(dash, "class escape cannot end a range");
        if (*hi.byte < *lo.byte)
          throw RegexSyntaxError(dash, "reversed range in byte class");
        set.add(*lo.byte, *hi.byte);
      } else if (lo.byte) {
        set.add(*lo.byte, *lo.byte);
      } else {
        set.add(lo.set);
      }
      any = true;
    }
    ++pos_; // ']'
    if (!any)
      throw RegexSyntaxError(open, "empty class");
    if (negate)
      set = set.complement();
    if (set.empty())
      throw RegexSyntaxError(open, "empty class");
    return RegexAst::byte_class(std::move(set));
  }

  std::string_view p_;
  std::size_t pos_ = 0;
};

} // namespace detail

/// Parse `pattern` into a syntax tree. Throws RegexSyntaxError.
inline RegexAst parse_regex(std::string_view pattern) {
  return detail::RegexParser(pattern).parse();
}

} // namespace tokenfa

#endif
