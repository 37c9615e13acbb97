// Copyright 2026 The peguard Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "peguard/rules.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <deque>
#include <map>
#include <set>

#include "peguard/error.hpp"

namespace peguard {

// ---------------------------------------------------------------------------
// Condition evaluation

namespace {

bool eval_node(const Condition& c, int idx, const std::vector<bool>& hits) {
  const ConditionNode& n = c.nodes[static_cast<std::size_t>(idx)];
  switch (n.op) {
    case ConditionNode::Op::pattern:
      return hits[static_cast<std::size_t>(n.pattern)];
    case ConditionNode::Op::all_and:
      for (int ch : n.children) {
        if (!eval_node(c, ch, hits)) return false;
      }
      return true;
    case ConditionNode::Op::any_or:
      for (int ch : n.children) {
        if (eval_node(c, ch, hits)) return true;
      }
      return false;
    case ConditionNode::Op::negate:
      return !eval_node(c, n.children.at(0), hits);
    case ConditionNode::Op::quantifier: {
      std::size_t count = 0;
      for (int p : n.set) count += hits[static_cast<std::size_t>(p)] ? 1 : 0;
      return count >= (n.all ? n.set.size() : n.required);
    }
    case ConditionNode::Op::constant:
      return n.value;
  }
  return false;
}

}  // namespace

bool Condition::evaluate(const std::vector<bool>& hits) const {
  return root >= 0 && eval_node(*this, root, hits);
}

// ---------------------------------------------------------------------------
// Parser

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  bool at_end() {
    skip_ws();
    return pos_ >= s_.size();
  }
  int line() const { return line_; }
  std::size_t pos() const { return pos_; }
  const std::string& current_rule() const { return rule_name_; }

  // Moves to the start of the next line that begins a rule after the current
  // position (used by lenient parsing to recover).
  void skip_to_next_rule() {
    while (pos_ < s_.size()) {
      const std::size_t nl = s_.find('\n', pos_);
      if (nl == std::string_view::npos) {
        pos_ = s_.size();
        return;
      }
      pos_ = nl + 1;
      ++line_;
      std::size_t p = pos_;
      while (p < s_.size() && (s_[p] == ' ' || s_[p] == '\t')) ++p;
      auto word_at = [&](std::size_t at, std::string_view w) {
        return s_.substr(at, w.size()) == w && (at + w.size() >= s_.size() || !is_ident_char(s_[at + w.size()]));
      };
      if (word_at(p, "rule") || word_at(p, "private") || word_at(p, "global") || word_at(p, "import") ||
          word_at(p, "include")) {
        return;
      }
    }
  }

  Rule parse_rule() {
    rule_name_.clear();
    skip_ws();
    for (std::string_view kw : {"import", "include", "private", "global"}) {
      if (peek_word(kw)) {
        // Name the rule if one follows so the skip report is useful.
        const std::size_t save = pos_;
        const int save_line = line_;
        ident();
        skip_ws();
        if (peek_word("rule")) {
          ident();
          skip_ws();
          if (pos_ < s_.size() && is_ident_start(s_[pos_])) rule_name_ = ident();
        }
        pos_ = save;
        line_ = save_line;
        fail("unsupported: '" + std::string(kw) + "'");
      }
    }
    expect_word("rule");
    skip_ws();
    rule_name_ = ident();
    Rule rule;
    rule.name = rule_name_;
    skip_ws();
    if (peek(':')) {
      ++pos_;
      skip_ws();
      while (pos_ < s_.size() && is_ident_start(s_[pos_])) {
        ident();
        skip_ws();
      }
    }
    expect('{');
    bool have_strings = false;
    bool have_condition = false;
    while (true) {
      skip_ws();
      if (pos_ >= s_.size()) fail("unexpected end of input inside rule");
      const std::string section = ident();
      skip_ws();
      expect(':');
      if (section == "meta") {
        parse_meta();
      } else if (section == "strings") {
        if (have_strings) fail("duplicate strings section");
        have_strings = true;
        parse_strings(rule);
      } else if (section == "condition") {
        have_condition = true;
        rule.condition = parse_condition(rule);
        skip_ws();
        expect('}');
        break;
      } else {
        fail("unknown section '" + section + "'");
      }
    }
    if (!have_condition) fail("rule has no condition");
    if (rule.patterns.empty()) fail("rule declares no patterns");
    return rule;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw RuleSyntaxError(msg, line_); }

  void skip_ws() {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else if (s_.substr(pos_, 2) == "//") {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (s_.substr(pos_, 2) == "/*") {
        const std::size_t end = s_.find("*/", pos_ + 2);
        if (end == std::string_view::npos) fail("unterminated comment");
        for (std::size_t i = pos_; i < end; ++i) line_ += s_[i] == '\n' ? 1 : 0;
        pos_ = end + 2;
      } else {
        break;
      }
    }
  }

  bool peek(char c) const { return pos_ < s_.size() && s_[pos_] == c; }

  void expect(char c) {
    skip_ws();
    if (!peek(c)) {
      fail(std::string("expected '") + c + "'" +
           (pos_ < s_.size() ? std::string(", found '") + s_[pos_] + "'" : std::string(" at end of input")));
    }
    ++pos_;
  }

  bool peek_word(std::string_view w) const {
    return s_.substr(pos_, w.size()) == w && (pos_ + w.size() >= s_.size() || !is_ident_char(s_[pos_ + w.size()]));
  }

  void expect_word(std::string_view w) {
    skip_ws();
    if (!peek_word(w)) fail("expected '" + std::string(w) + "'");
    pos_ += w.size();
  }

  std::string ident() {
    if (pos_ >= s_.size() || !is_ident_start(s_[pos_])) fail("expected identifier");
    const std::size_t start = pos_;
    while (pos_ < s_.size() && is_ident_char(s_[pos_])) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  // Next token is "<ident> :" naming a section.
  bool at_section() {
    skip_ws();
    std::size_t p = pos_;
    if (p >= s_.size() || !is_ident_start(s_[p])) return false;
    while (p < s_.size() && is_ident_char(s_[p])) ++p;
    const std::string_view word = s_.substr(pos_, p - pos_);
    while (p < s_.size() && (s_[p] == ' ' || s_[p] == '\t')) ++p;
    return p < s_.size() && s_[p] == ':' && (word == "meta" || word == "strings" || word == "condition");
  }

  std::string parse_string_literal() {
    expect('"');
    std::string out;
    while (true) {
      if (pos_ >= s_.size() || s_[pos_] == '\n') fail("unterminated string");
      const char c = s_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (pos_ >= s_.size()) fail("unterminated escape");
      const char e = s_[pos_++];
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        case 't': out.push_back('\t'); break;
        case 'x': {
          if (pos_ + 2 > s_.size()) fail("bad \\x escape");
          const int hi = hex_value(s_[pos_]);
          const int lo = hex_value(s_[pos_ + 1]);
          if (hi < 0 || lo < 0) fail("bad \\x escape");
          out.push_back(static_cast<char>(hi * 16 + lo));
          pos_ += 2;
          break;
        }
        default:
          fail(std::string("unknown escape '\\") + e + "'");
      }
    }
    return out;
  }

  void parse_meta() {
    while (!at_section()) {
      skip_ws();
      if (peek('}')) fail("rule has no condition");
      ident();
      expect('=');
      skip_ws();
      if (peek('"')) {
        parse_string_literal();
      } else if (peek_word("true") || peek_word("false")) {
        ident();
      } else {
        if (peek('-')) ++pos_;
        const std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ == start) fail("bad meta value");
      }
    }
  }

  void parse_strings(Rule& rule) {
    while (!at_section()) {
      skip_ws();
      if (!peek('$')) fail("expected pattern id");
      ++pos_;
      if (pos_ >= s_.size() || !is_ident_char(s_[pos_])) fail("unsupported: anonymous pattern");
      const std::size_t start = pos_;
      while (pos_ < s_.size() && is_ident_char(s_[pos_])) ++pos_;
      Pattern p;
      p.id = std::string(s_.substr(start, pos_ - start));
      for (const Pattern& q : rule.patterns) {
        if (q.id == p.id) fail("duplicate pattern id $" + p.id);
      }
      expect('=');
      skip_ws();
      if (peek('"')) {
        p.kind = Pattern::Kind::text;
        for (char c : parse_string_literal()) p.bytes.push_back(static_cast<std::uint8_t>(c));
        parse_modifiers(p);
      } else if (peek('{')) {
        p.kind = Pattern::Kind::hex;
        parse_hex(p);
      } else if (peek('/')) {
        fail("unsupported: regular expression pattern $" + p.id);
      } else {
        fail("expected string or hex pattern");
      }
      if (p.bytes.empty()) fail("empty pattern $" + p.id);
      rule.patterns.push_back(std::move(p));
    }
  }

  void parse_modifiers(Pattern& p) {
    while (true) {
      skip_ws();
      if (pos_ >= s_.size() || !is_ident_start(s_[pos_]) || at_section()) return;
      const std::size_t save = pos_;
      const std::string m = ident();
      if (m == "nocase") {
        p.nocase = true;
      } else if (m == "ascii") {
        // the only encoding supported
      } else if (m == "wide" || m == "fullword" || m == "xor" || m == "base64" || m == "base64wide" ||
                 m == "private") {
        fail("unsupported: modifier '" + m + "'");
      } else {
        pos_ = save;
        return;
      }
    }
  }

  void parse_hex(Pattern& p) {
    expect('{');
    while (true) {
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated hex pattern");
      const char c = s_[pos_];
      if (c == '}') {
        ++pos_;
        break;
      }
      if (c == '[' || c == '(' || c == '|' || c == '~') fail("unsupported: hex jumps, alternatives or negation");
      if (pos_ + 1 >= s_.size()) fail("truncated hex byte");
      const char d = s_[pos_ + 1];
      if (c == '?' && d == '?') {
        p.bytes.push_back(-1);
      } else if (c == '?' || d == '?') {
        fail("unsupported: nibble wildcard");
      } else {
        const int hi = hex_value(c);
        const int lo = hex_value(d);
        if (hi < 0 || lo < 0) fail(std::string("bad hex byte '") + c + d + "'");
        p.bytes.push_back(static_cast<std::int16_t>(hi * 16 + lo));
      }
      pos_ += 2;
    }
    if (std::all_of(p.bytes.begin(), p.bytes.end(), [](std::int16_t b) { return b < 0; })) {
      fail("hex pattern $" + p.id + " needs at least one fixed byte");
    }
  }

  // --- condition -----------------------------------------------------------

  int add(Condition& c, ConditionNode n) {
    c.nodes.push_back(std::move(n));
    return static_cast<int>(c.nodes.size() - 1);
  }

  bool take_word(std::string_view w) {
    skip_ws();
    if (!peek_word(w)) return false;
    pos_ += w.size();
    return true;
  }

  Condition parse_condition(const Rule& rule) {
    Condition c;
    c.root = parse_or(c, rule);
    return c;
  }

  int parse_or(Condition& c, const Rule& rule) {
    std::vector<int> kids{parse_and(c, rule)};
    while (take_word("or")) kids.push_back(parse_and(c, rule));
    if (kids.size() == 1) return kids[0];
    ConditionNode n;
    n.op = ConditionNode::Op::any_or;
    n.children = std::move(kids);
    return add(c, std::move(n));
  }

  int parse_and(Condition& c, const Rule& rule) {
    std::vector<int> kids{parse_not(c, rule)};
    while (take_word("and")) kids.push_back(parse_not(c, rule));
    if (kids.size() == 1) return kids[0];
    ConditionNode n;
    n.op = ConditionNode::Op::all_and;
    n.children = std::move(kids);
    return add(c, std::move(n));
  }

  int parse_not(Condition& c, const Rule& rule) {
    if (take_word("not")) {
      const int inner = parse_not(c, rule);
      ConditionNode n;
      n.op = ConditionNode::Op::negate;
      n.children = {inner};
      return add(c, std::move(n));
    }
    return parse_primary(c, rule);
  }

  int pattern_index(const Rule& rule, std::string_view id) {
    for (std::size_t i = 0; i < rule.patterns.size(); ++i) {
      if (rule.patterns[i].id == id) return static_cast<int>(i);
    }
    fail("undeclared pattern $" + std::string(id));
  }

  int parse_primary(Condition& c, const Rule& rule) {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of condition");
    const char ch = s_[pos_];
    if (ch == '(') {
      ++pos_;
      const int inner = parse_or(c, rule);
      expect(')');
      return inner;
    }
    if (ch == '$') {
      ++pos_;
      const std::size_t start = pos_;
      while (pos_ < s_.size() && is_ident_char(s_[pos_])) ++pos_;
      const std::string_view id = s_.substr(start, pos_ - start);
      if (id.empty()) fail("unsupported: anonymous pattern reference");
      skip_ws();
      if (peek_word("at") || peek_word("in")) fail("unsupported: positional pattern condition");
      ConditionNode n;
      n.op = ConditionNode::Op::pattern;
      n.pattern = pattern_index(rule, id);
      return add(c, std::move(n));
    }
    if (ch == '#' || ch == '@' || ch == '!') fail("unsupported: pattern counts, offsets or lengths");
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      std::size_t n = 0;
      std::from_chars(s_.data() + start, s_.data() + pos_, n);
      skip_ws();
      if (!peek_word("of")) fail("unsupported: numeric expression");
      return parse_quantifier(c, rule, n, false);
    }
    if (is_ident_start(ch)) {
      const std::size_t save = pos_;
      const std::string w = ident();
      if (w == "true" || w == "false") {
        ConditionNode n;
        n.op = ConditionNode::Op::constant;
        n.value = w == "true";
        return add(c, std::move(n));
      }
      if (w == "any") return parse_quantifier(c, rule, 1, false);
      if (w == "all") return parse_quantifier(c, rule, 0, true);
      pos_ = save;
      fail("unsupported: '" + w + "' in condition");
    }
    fail(std::string("unexpected '") + ch + "' in condition");
  }

  int parse_quantifier(Condition& c, const Rule& rule, std::size_t required, bool all) {
    if (!take_word("of")) fail("expected 'of'");
    ConditionNode n;
    n.op = ConditionNode::Op::quantifier;
    n.all = all;
    if (take_word("them")) {
      for (std::size_t i = 0; i < rule.patterns.size(); ++i) n.set.push_back(static_cast<int>(i));
    } else {
      expect('(');
      while (true) {
        skip_ws();
        if (!peek('$')) fail("expected pattern id in set");
        ++pos_;
        const std::size_t start = pos_;
        while (pos_ < s_.size() && is_ident_char(s_[pos_])) ++pos_;
        const std::string_view id = s_.substr(start, pos_ - start);
        if (peek('*')) {
          ++pos_;
          bool any_match = false;
          for (std::size_t i = 0; i < rule.patterns.size(); ++i) {
            if (rule.patterns[i].id.starts_with(id)) {
              n.set.push_back(static_cast<int>(i));
              any_match = true;
            }
          }
          if (!any_match) fail("no pattern matches $" + std::string(id) + "*");
        } else {
          n.set.push_back(pattern_index(rule, id));
        }
        skip_ws();
        if (peek(',')) {
          ++pos_;
          continue;
        }
        expect(')');
        break;
      }
    }
    n.required = all ? n.set.size() : required;
    if (n.required > n.set.size()) fail("quantifier exceeds the number of patterns");
    return add(c, std::move(n));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::string rule_name_;
};

}  // namespace

std::vector<Rule> parse_rules(std::string_view text) {
  Parser p(text);
  std::vector<Rule> rules;
  std::set<std::string> names;
  while (!p.at_end()) {
    const int line = p.line();
    Rule r = p.parse_rule();
    if (!names.insert(r.name).second) throw RuleSyntaxError("duplicate rule name '" + r.name + "'", line);
    rules.push_back(std::move(r));
  }
  return rules;
}

ParsedRules parse_rules_lenient(std::string_view text) {
  Parser p(text);
  ParsedRules out;
  std::set<std::string> names;
  while (!p.at_end()) {
    try {
      Rule r = p.parse_rule();
      if (!names.insert(r.name).second) {
        out.skipped.push_back({r.name, "duplicate rule name"});
        continue;
      }
      out.rules.push_back(std::move(r));
    } catch (const RuleSyntaxError& e) {
      out.skipped.push_back({p.current_rule(), e.what()});
      p.skip_to_next_rule();
    }
  }
  return out;
}

ParsedRules load_rules_dir(const std::filesystem::path& dir, bool lenient) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_regular_file(dir)) {
    files.push_back(dir);
  } else {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
      const auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".yar" || ext == ".yara" || ext == ".rules")) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  }
  ParsedRules all;
  std::set<std::string> names;
  for (const auto& f : files) {
    const Bytes raw = read_file(f);
    const std::string_view text(reinterpret_cast<const char*>(raw.data()), raw.size());
    ParsedRules part;
    if (lenient) {
      part = parse_rules_lenient(text);
    } else {
      try {
        part.rules = parse_rules(text);
      } catch (const RuleSyntaxError& e) {
        throw RuleSyntaxError(f.string() + ": " + e.what(), e.line());
      }
    }
    for (auto& r : part.rules) {
      if (!names.insert(r.name).second) {
        if (!lenient) throw RuleSyntaxError(f.string() + ": duplicate rule name '" + r.name + "'", 0);
        all.skipped.push_back({r.name, "duplicate rule name"});
        continue;
      }
      all.rules.push_back(std::move(r));
    }
    for (auto& s : part.skipped) all.skipped.push_back(std::move(s));
  }
  return all;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string escape_text(const std::vector<std::int16_t>& bytes) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (auto b : bytes) {
    const auto c = static_cast<unsigned char>(b);
    if (c == '"' || c == '\\') {
      out += '\\';
      out += static_cast<char>(c);
    } else if (c >= 0x20 && c < 0x7F) {
      out += static_cast<char>(c);
    } else {
      out += "\\x";
      out += kHex[c >> 4];
      out += kHex[c & 15];
    }
  }
  return out;
}

std::string node_to_text(const Rule& r, int idx) {
  const ConditionNode& n = r.condition.nodes[static_cast<std::size_t>(idx)];
  auto child = [&](int ch) {
    const auto op = r.condition.nodes[static_cast<std::size_t>(ch)].op;
    const std::string s = node_to_text(r, ch);
    return (op == ConditionNode::Op::all_and || op == ConditionNode::Op::any_or) ? "(" + s + ")" : s;
  };
  switch (n.op) {
    case ConditionNode::Op::pattern:
      return "$" + r.patterns[static_cast<std::size_t>(n.pattern)].id;
    case ConditionNode::Op::all_and:
    case ConditionNode::Op::any_or: {
      std::string s;
      const char* sep = n.op == ConditionNode::Op::all_and ? " and " : " or ";
      for (std::size_t i = 0; i < n.children.size(); ++i) s += (i ? sep : "") + child(n.children[i]);
      return s;
    }
    case ConditionNode::Op::negate:
      return "not " + child(n.children.at(0));
    case ConditionNode::Op::quantifier: {
      std::string s = n.all ? "all" : (n.required == 1 ? "any" : std::to_string(n.required));
      s += " of ";
      bool is_them = n.set.size() == r.patterns.size();
      for (std::size_t i = 0; is_them && i < n.set.size(); ++i) is_them = n.set[i] == static_cast<int>(i);
      if (is_them) return s + "them";
      s += "(";
      for (std::size_t i = 0; i < n.set.size(); ++i) {
        s += (i ? ", $" : "$") + r.patterns[static_cast<std::size_t>(n.set[i])].id;
      }
      return s + ")";
    }
    case ConditionNode::Op::constant:
      return n.value ? "true" : "false";
  }
  return {};
}

}  // namespace

std::string condition_to_text(const Rule& rule) {
  return rule.condition.root < 0 ? "false" : node_to_text(rule, rule.condition.root);
}

std::string rule_to_text(const Rule& rule) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out = "rule " + rule.name + " {\n  strings:\n";
  for (const Pattern& p : rule.patterns) {
    out += "    $" + p.id + " = ";
    if (p.kind == Pattern::Kind::text) {
      out += "\"" + escape_text(p.bytes) + "\"";
      if (p.nocase) out += " nocase";
    } else {
      out += "{";
      for (auto b : p.bytes) {
        out += ' ';
        if (b < 0) {
          out += "??";
        } else {
          out += kHex[b >> 4];
          out += kHex[b & 15];
        }
      }
      out += " }";
    }
    out += '\n';
  }
  out += "  condition:\n    " + condition_to_text(rule) + "\n}\n";
  return out;
}

// ---------------------------------------------------------------------------
// Matching

namespace {

std::uint8_t fold(std::uint8_t c) { return (c >= 'A' && c <= 'Z') ? static_cast<std::uint8_t>(c + 32) : c; }

bool verify_at(const Pattern& p, ByteView data, std::size_t start) {
  if (start + p.bytes.size() > data.size()) return false;
  for (std::size_t i = 0; i < p.bytes.size(); ++i) {
    const std::int16_t want = p.bytes[i];
    if (want < 0) continue;
    const std::uint8_t got = data[start + i];
    if (p.nocase ? fold(got) != fold(static_cast<std::uint8_t>(want)) : got != want) return false;
  }
  return true;
}

bool naive_find(const Pattern& p, ByteView data) {
  if (p.bytes.size() > data.size()) return false;
  for (std::size_t i = 0; i + p.bytes.size() <= data.size(); ++i) {
    if (verify_at(p, data, i)) return true;
  }
  return false;
}

// Longest run of fixed bytes: (offset, length).
std::pair<std::size_t, std::size_t> anchor_of(const Pattern& p) {
  std::size_t best_off = 0, best_len = 0;
  for (std::size_t i = 0; i < p.bytes.size();) {
    if (p.bytes[i] < 0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < p.bytes.size() && p.bytes[j] >= 0) ++j;
    if (j - i > best_len) {
      best_off = i;
      best_len = j - i;
    }
    i = j;
  }
  return {best_off, best_len};
}

// Aho-Corasick automaton with a dense transition table.
class Automaton {
 public:
  Automaton() { add_state(); }

  void add(const std::vector<std::uint8_t>& word, int id) {
    int s = 0;
    for (std::uint8_t c : word) {
      int& nx = next_[static_cast<std::size_t>(s) * 256 + c];
      if (nx < 0) {
        const int fresh = add_state();
        next_[static_cast<std::size_t>(s) * 256 + c] = fresh;
        s = fresh;
      } else {
        s = nx;
      }
    }
    out_[static_cast<std::size_t>(s)].push_back(id);
    ++words_;
  }

  void build() {
    std::deque<int> queue;
    for (int c = 0; c < 256; ++c) {
      int& nx = next_[static_cast<std::size_t>(c)];
      if (nx < 0) {
        nx = 0;
      } else {
        fail_[static_cast<std::size_t>(nx)] = 0;
        queue.push_back(nx);
      }
    }
    while (!queue.empty()) {
      const int s = queue.front();
      queue.pop_front();
      const auto su = static_cast<std::size_t>(s);
      const int f = fail_[su];
      dict_[su] = out_[static_cast<std::size_t>(f)].empty() ? dict_[static_cast<std::size_t>(f)] : f;
      for (int c = 0; c < 256; ++c) {
        int& nx = next_[su * 256 + static_cast<std::size_t>(c)];
        if (nx < 0) {
          nx = next_[static_cast<std::size_t>(f) * 256 + static_cast<std::size_t>(c)];
        } else {
          fail_[static_cast<std::size_t>(nx)] = next_[static_cast<std::size_t>(f) * 256 + static_cast<std::size_t>(c)];
          queue.push_back(nx);
        }
      }
    }
  }

  bool empty() const { return words_ == 0; }

  // Calls on_hit(id, end_position) for every word occurrence.
  template <typename F>
  void run(ByteView data, bool folded, F&& on_hit) const {
    int s = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::uint8_t c = folded ? fold(data[i]) : data[i];
      s = next_[static_cast<std::size_t>(s) * 256 + c];
      for (int t = out_[static_cast<std::size_t>(s)].empty() ? dict_[static_cast<std::size_t>(s)] : s; t > 0;
           t = dict_[static_cast<std::size_t>(t)]) {
        for (int id : out_[static_cast<std::size_t>(t)]) on_hit(id, i);
      }
    }
  }

 private:
  int add_state() {
    next_.insert(next_.end(), 256, -1);
    out_.emplace_back();
    fail_.push_back(0);
    dict_.push_back(0);
    return static_cast<int>(out_.size() - 1);
  }

  std::vector<int> next_;
  std::vector<std::vector<int>> out_;
  std::vector<int> fail_;
  std::vector<int> dict_;  // nearest proper suffix state with outputs (0 = none)
  std::size_t words_ = 0;
};

struct AnchorRef {
  std::size_t rule = 0;
  std::size_t pattern = 0;
  std::size_t flat = 0;  // index into the flat hit vector
  std::size_t offset = 0;
  std::size_t length = 0;
};

}  // namespace

bool match_rule(const Rule& rule, ByteView data) {
  std::vector<bool> hits(rule.patterns.size());
  for (std::size_t i = 0; i < rule.patterns.size(); ++i) hits[i] = naive_find(rule.patterns[i], data);
  return rule.condition.evaluate(hits);
}

struct RuleSet::Compiled {
  Automaton exact;
  Automaton folded;
  std::vector<AnchorRef> anchors;
  std::vector<std::size_t> first_flat;  // per rule, offset into the flat hit vector
  std::size_t total_patterns = 0;
};

RuleSet::RuleSet() : RuleSet(std::vector<Rule>{}) {}

RuleSet::RuleSet(std::vector<Rule> rules, std::vector<RuleStats> stats)
    : rules_(std::move(rules)), stats_(std::move(stats)), compiled_(std::make_unique<Compiled>()) {
  Compiled& c = *compiled_;
  for (std::size_t r = 0; r < rules_.size(); ++r) {
    c.first_flat.push_back(c.total_patterns);
    for (std::size_t p = 0; p < rules_[r].patterns.size(); ++p) {
      const Pattern& pat = rules_[r].patterns[p];
      const auto [off, len] = anchor_of(pat);
      std::vector<std::uint8_t> word;
      for (std::size_t i = off; i < off + len; ++i) {
        const auto b = static_cast<std::uint8_t>(pat.bytes[i]);
        word.push_back(pat.nocase ? fold(b) : b);
      }
      const int id = static_cast<int>(c.anchors.size());
      c.anchors.push_back({r, p, c.total_patterns + p, off, len});
      (pat.nocase ? c.folded : c.exact).add(word, id);
    }
    c.total_patterns += rules_[r].patterns.size();
  }
  c.exact.build();
  c.folded.build();
}

RuleSet::~RuleSet() = default;
RuleSet::RuleSet(RuleSet&&) noexcept = default;
RuleSet& RuleSet::operator=(RuleSet&&) noexcept = default;
RuleSet::RuleSet(const RuleSet& other) : RuleSet(other.rules_, other.stats_) {}
RuleSet& RuleSet::operator=(const RuleSet& other) {
  if (this != &other) *this = RuleSet(other);
  return *this;
}

std::vector<std::string> RuleSet::scan(ByteView data) const {
  const Compiled& c = *compiled_;
  std::vector<bool> hit(c.total_patterns, false);
  auto on_hit = [&](int id, std::size_t end) {
    const AnchorRef& a = c.anchors[static_cast<std::size_t>(id)];
    if (hit[a.flat]) return;
    const std::size_t anchor_start = end + 1 - a.length;
    if (anchor_start < a.offset) return;
    if (verify_at(rules_[a.rule].patterns[a.pattern], data, anchor_start - a.offset)) hit[a.flat] = true;
  };
  if (!c.exact.empty()) c.exact.run(data, false, on_hit);
  if (!c.folded.empty()) c.folded.run(data, true, on_hit);

  std::vector<std::string> matched;
  for (std::size_t r = 0; r < rules_.size(); ++r) {
    const std::size_t n = rules_[r].patterns.size();
    std::vector<bool> local(hit.begin() + static_cast<std::ptrdiff_t>(c.first_flat[r]),
                            hit.begin() + static_cast<std::ptrdiff_t>(c.first_flat[r] + n));
    if (rules_[r].condition.evaluate(local)) matched.push_back(rules_[r].name);
  }
  return matched;
}

RuleSet filter_rules(const std::vector<Rule>& rules, std::span<const LabeledBytes> corpus) {
  const RuleSet all(rules);
  std::map<std::string, RuleStats> counts;
  for (const Rule& r : rules) counts[r.name].name = r.name;
  for (const LabeledBytes& s : corpus) {
    for (const std::string& name : all.scan(s.bytes)) {
      auto& st = counts[name];
      (s.label == 1 ? st.malware_matches : st.benign_matches) += 1;
    }
  }
  std::vector<Rule> kept;
  std::vector<RuleStats> stats;
  for (const Rule& r : rules) {
    const RuleStats& st = counts[r.name];
    if (st.malware_matches >= 1 && st.benign_matches == 0) {
      kept.push_back(r);
      stats.push_back(st);
    }
  }
  return RuleSet(std::move(kept), std::move(stats));
}

std::string ruleset_to_text(const RuleSet& set) {
  std::string out;
  for (const Rule& r : set.rules()) out += rule_to_text(r) + "\n";
  for (const RuleStats& s : set.stats()) {
    out += "// stats " + s.name + " " + std::to_string(s.malware_matches) + " " +
           std::to_string(s.benign_matches) + "\n";
  }
  return out;
}

RuleSet ruleset_from_text(std::string_view text) {
  std::vector<Rule> rules = parse_rules(text);
  std::vector<RuleStats> stats;
  constexpr std::string_view kPrefix = "// stats ";
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    if (line.starts_with(kPrefix)) {
      RuleStats s;
      std::string rest(line.substr(kPrefix.size()));
      const auto a = rest.find(' ');
      const auto b = rest.find(' ', a == std::string::npos ? a : a + 1);
      if (a == std::string::npos || b == std::string::npos) throw Error("bad stats line in rule set");
      s.name = rest.substr(0, a);
      s.malware_matches = std::stoull(rest.substr(a + 1, b - a - 1));
      s.benign_matches = std::stoull(rest.substr(b + 1));
      stats.push_back(std::move(s));
    }
    pos = end + 1;
  }
  return RuleSet(std::move(rules), std::move(stats));
}

void save_ruleset(const RuleSet& set, const std::filesystem::path& path) {
  write_file(path, as_bytes(ruleset_to_text(set)));
}

RuleSet load_ruleset(const std::filesystem::path& path) {
  const Bytes raw = read_file(path);
  return ruleset_from_text(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()));
}

}  // namespace peguard
