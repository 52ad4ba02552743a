#include "hcmr/rule_io.hpp"

#include "hcmr/error.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace hcmr {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool starts_with_any(std::string_view s, std::initializer_list<std::string_view> prefixes,
                     std::size_t& consumed) {
  for (auto p : prefixes) {
    if (s.substr(0, p.size()) == p) {
      consumed = p.size();
      return true;
    }
  }
  return false;
}

}  // namespace

std::string concept_name(int i) { return "C" + std::to_string(i); }

std::optional<int> parse_concept_ref(std::string_view token, int n_concepts) {
  token = trim(token);
  if (!token.empty() && (token.front() == 'C' || token.front() == 'c')) token.remove_prefix(1);
  if (token.empty()) return std::nullopt;
  int value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  if (value < 0 || value >= n_concepts) return std::nullopt;
  return value;
}

std::vector<Literal> rule_body(const SymbolicRuleSet& rules, int i, int k) {
  std::vector<Literal> body;
  for (int j = 0; j < rules.n_concepts(); ++j) {
    const Role r = rules.role(i, k, j);
    if (r != Role::Irrelevant) body.push_back({j, r == Role::Negative});
  }
  return body;
}

std::string body_text(const std::vector<Literal>& body) {
  if (body.empty()) return ".";
  std::string out;
  for (std::size_t m = 0; m < body.size(); ++m) {
    if (m) out += " & ";
    if (body[m].negated) out += '!';
    out += concept_name(body[m].concept_index);
  }
  return out;
}

std::string rule_text(const SymbolicRuleSet& rules, int i, int k) {
  return concept_name(i) + " <- " + body_text(rule_body(rules, i, k));
}

RuleLine parse_rule_line(std::string_view line, int n_concepts) {
  line = trim(line);
  const auto arrow = line.find("<-");
  if (arrow == std::string_view::npos) throw ParseError("rule is missing '<-': " + std::string(line));
  std::string_view head = trim(line.substr(0, arrow));
  std::string_view body = trim(line.substr(arrow + 2));

  RuleLine out;
  if (const auto br = head.find('['); br != std::string_view::npos) {
    const auto close = head.find(']', br);
    if (close == std::string_view::npos || close != head.size() - 1) {
      throw ParseError("malformed rule index in '" + std::string(head) + "'");
    }
    std::string_view idx = head.substr(br + 1, close - br - 1);
    int k = 0;
    const auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), k);
    if (ec != std::errc() || ptr != idx.data() + idx.size() || k < 0) {
      throw ParseError("malformed rule index in '" + std::string(head) + "'");
    }
    out.rule = k;
    head = head.substr(0, br);
  }
  const auto head_idx = parse_concept_ref(head, n_concepts);
  if (!head_idx) throw ParseError("unknown concept '" + std::string(head) + "'");
  out.concept_index = *head_idx;

  if (body.empty() || body == ".") return out;

  // Split on '&' or the UTF-8 logical-and sign.
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t p = 0; p < body.size();) {
    std::size_t consumed = 0;
    if (starts_with_any(body.substr(p), {"&", "\xE2\x88\xA7"}, consumed)) {
      parts.push_back(body.substr(start, p - start));
      p += consumed;
      start = p;
    } else {
      ++p;
    }
  }
  parts.push_back(body.substr(start));

  for (auto part : parts) {
    part = trim(part);
    Literal lit;
    std::size_t consumed = 0;
    if (starts_with_any(part, {"!", "~", "\xC2\xAC"}, consumed)) {
      lit.negated = true;
      part = trim(part.substr(consumed));
    }
    const auto idx = parse_concept_ref(part, n_concepts);
    if (!idx) throw ParseError("unknown concept '" + std::string(part) + "' in rule body");
    for (const auto& existing : out.body) {
      if (existing.concept_index == *idx) {
        throw ParseError("concept " + concept_name(*idx) + " appears twice in one rule body");
      }
    }
    lit.concept_index = *idx;
    out.body.push_back(lit);
  }
  return out;
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw Error("failed to format double");
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::string export_rules(const SymbolicRuleSet& rules, const std::vector<double>& priorities) {
  const int n = rules.n_concepts();
  if (static_cast<int>(priorities.size()) != n) {
    throw ShapeError("export_rules: priority vector length differs from concept count");
  }
  std::ostringstream os;
  os << "concepts:";
  for (int i = 0; i < n; ++i) os << ' ' << concept_name(i);
  os << "\nn_rules: " << rules.n_rules() << "\npriorities:";
  for (double p : priorities) os << ' ' << format_double(p);
  os << "\nparent:\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) os << (j ? " " : "") << (rules.parent(i, j) ? 1 : 0);
    os << '\n';
  }
  os << "rules:\n";
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < rules.n_rules(); ++k) {
      os << concept_name(i) << '[' << k << "] <- " << body_text(rule_body(rules, i, k)) << '\n';
    }
  }
  return os.str();
}

RuleDocument import_rules(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= text.size();) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }

  std::size_t ln = 0;
  auto next = [&]() -> std::string_view {
    while (ln < lines.size()) {
      auto l = trim(lines[ln++]);
      if (!l.empty() && l.front() != '#') return l;
    }
    throw ParseError("unexpected end of rule document", ln);
  };
  auto field = [&](std::string_view name) {
    auto l = next();
    if (l.substr(0, name.size()) != name || l.size() <= name.size() || l[name.size()] != ':') {
      throw ParseError("expected field '" + std::string(name) + "'", ln);
    }
    return trim(l.substr(name.size() + 1));
  };

  const auto names = split_ws(field("concepts"));
  const int n = static_cast<int>(names.size());
  if (n == 0) throw ParseError("no concepts declared", ln);
  for (int i = 0; i < n; ++i) {
    if (names[static_cast<std::size_t>(i)] != concept_name(i)) {
      throw ParseError("concept " + std::to_string(i) + " must be named " + concept_name(i), ln);
    }
  }
  int n_rules = 0;
  {
    auto v = field("n_rules");
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n_rules);
    if (ec != std::errc() || ptr != v.data() + v.size() || n_rules < 1) {
      throw ParseError("invalid n_rules", ln);
    }
  }
  std::vector<double> priorities;
  for (auto tok : split_ws(field("priorities"))) {
    try {
      priorities.push_back(parse_double(tok));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), ln);
    }
  }
  if (static_cast<int>(priorities.size()) != n) throw ParseError("priorities length mismatch", ln);

  if (!field("parent").empty()) throw ParseError("parent: expects the matrix on following lines", ln);
  std::vector<std::vector<bool>> parent(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto cells = split_ws(next());
    if (static_cast<int>(cells.size()) != n) throw ParseError("parent row has wrong width", ln);
    for (auto c : cells) {
      if (c != "0" && c != "1") throw ParseError("parent entries must be 0 or 1", ln);
      parent[static_cast<std::size_t>(i)].push_back(c == "1");
    }
  }

  if (!field("rules").empty()) throw ParseError("rules: expects rule lines", ln);
  std::vector<Role> roles(static_cast<std::size_t>(n) * n_rules * n, Role::Irrelevant);
  std::vector<bool> seen(static_cast<std::size_t>(n) * n_rules, false);
  for (int count = 0; count < n * n_rules; ++count) {
    RuleLine rl;
    try {
      rl = parse_rule_line(next(), n);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), ln);
    }
    if (!rl.rule || *rl.rule >= n_rules) throw ParseError("rule line needs an index below n_rules", ln);
    const std::size_t slot = static_cast<std::size_t>(rl.concept_index) * n_rules + *rl.rule;
    if (seen[slot]) throw ParseError("duplicate rule " + concept_name(rl.concept_index), ln);
    seen[slot] = true;
    for (const auto& lit : rl.body) {
      roles[slot * n + lit.concept_index] = lit.negated ? Role::Negative : Role::Positive;
    }
  }

  RuleDocument doc{SymbolicRuleSet(n, n_rules, std::move(roles)), std::move(priorities)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (doc.rules.parent(i, j) != parent[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) {
        throw SchemaError("parent matrix disagrees with rules at (" + std::to_string(i) + ", " +
                          std::to_string(j) + ")");
      }
    }
  }
  return doc;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void save_rules(const std::filesystem::path& path, const SymbolicRuleSet& rules,
                const std::vector<double>& priorities) {
  write_text_file(path, export_rules(rules, priorities));
}

RuleDocument load_rules(const std::filesystem::path& path) { return import_rules(read_text_file(path)); }

}  // namespace hcmr
