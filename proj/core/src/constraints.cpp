#include "hcmr/constraints.hpp"

#include "hcmr/error.hpp"
#include "hcmr/rule_io.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace hcmr {

namespace {

std::string pair_str(int i, int j) { return "(" + std::to_string(i) + ", " + std::to_string(j) + ")"; }

std::string triple_str(int i, int k, int j) {
  return "(i=" + std::to_string(i) + ", k=" + std::to_string(k) + ", j=" + std::to_string(j) + ")";
}

void check_index(int v, int n, const std::string& what) {
  if (v < 0 || v >= n) {
    throw ConstraintError(what + " index " + std::to_string(v) + " out of range [0, " + std::to_string(n) + ")");
  }
}

}  // namespace

ConstraintSet::ConstraintSet(int n_concepts, int n_rules) {
  spec_.n_concepts = n_concepts;
  spec_.n_rules = n_rules;
  build();
}

ConstraintSet::ConstraintSet(ConstraintSpec spec) : spec_(std::move(spec)) { build(); }

bool ConstraintSet::empty() const {
  return spec_.force_source.empty() && spec_.force_sink.empty() && spec_.forbid_parent.empty() &&
         spec_.allow_parent.empty() && spec_.clamps.empty() && spec_.injected.empty() &&
         spec_.priorities.empty();
}

void ConstraintSet::build() {
  const int n = spec_.n_concepts;
  const int n_r = spec_.n_rules;
  if (n < 1 || n_r < 1) throw ConstraintError("constraint set needs positive concept and rule counts");
  const Eigen::Index slots = static_cast<Eigen::Index>(n) * n_r;

  // Priority forms: resolve absolute and relative assignments.
  forms_.assign(static_cast<std::size_t>(n), PriorityForm{});
  for (int i = 0; i < n; ++i) forms_[static_cast<std::size_t>(i)].root = i;
  std::map<int, const PriorityAssignment*> assigned;
  for (const auto& pa : spec_.priorities) {
    check_index(pa.concept_index, n, "priority");
    if (pa.anchor) check_index(*pa.anchor, n, "priority anchor");
    if (!std::isfinite(pa.value)) throw ConstraintError("priority value must be finite");
    if (!assigned.emplace(pa.concept_index, &pa).second) {
      throw ConstraintError("priority of concept " + std::to_string(pa.concept_index) + " assigned twice");
    }
  }
  // 0 = unresolved, 1 = in progress, 2 = done
  std::vector<int> state(static_cast<std::size_t>(n), 0);
  std::function<void(int)> resolve = [&](int c) {
    auto& st = state[static_cast<std::size_t>(c)];
    if (st == 2) return;
    if (st == 1) throw ConstraintError("relational priority constraints form a cycle through concept " + std::to_string(c));
    st = 1;
    auto it = assigned.find(c);
    auto& form = forms_[static_cast<std::size_t>(c)];
    if (it != assigned.end()) {
      const auto& pa = *it->second;
      if (pa.anchor) {
        resolve(*pa.anchor);
        form = forms_[static_cast<std::size_t>(*pa.anchor)];
        form.offset += pa.value;
      } else {
        form.root.reset();
        form.offset = pa.value;
      }
    }
    st = 2;
  };
  for (int c = 0; c < n; ++c) resolve(c);

  priority_map_ = ad::Matrix::Zero(n, n);
  priority_offset_ = ad::Matrix::Zero(1, n);
  for (int c = 0; c < n; ++c) {
    const auto& f = forms_[static_cast<std::size_t>(c)];
    if (f.root) priority_map_(*f.root, c) = 1.0;
    priority_offset_(0, c) = f.offset;
  }

  // Allow-matrix overrides.
  override_mask_ = ad::Matrix::Identity(n, n);
  override_value_ = ad::Matrix::Zero(n, n);
  auto set_override = [&](int i, int j, double v, const std::string& why) {
    if (override_mask_(i, j) != 0.0 && override_value_(i, j) != v) {
      throw ConstraintError(why + " conflicts with another override at A" + pair_str(i, j));
    }
    override_mask_(i, j) = 1.0;
    override_value_(i, j) = v;
  };
  for (int k : spec_.force_source) {
    check_index(k, n, "force_source");
    for (int j = 0; j < n; ++j) {
      if (j != k) set_override(k, j, 0.0, "force_source(" + std::to_string(k) + ")");
    }
  }
  for (int k : spec_.force_sink) {
    check_index(k, n, "force_sink");
    for (int i = 0; i < n; ++i) {
      if (i != k) set_override(i, k, 0.0, "force_sink(" + std::to_string(k) + ")");
    }
  }
  for (auto [child, parent] : spec_.forbid_parent) {
    check_index(child, n, "forbid_parent child");
    check_index(parent, n, "forbid_parent parent");
    if (child != parent) set_override(child, parent, 0.0, "forbid_parent" + pair_str(child, parent));
  }

  // A concept j can only be kept in i's rules for every parameter value when
  // the priority forms guarantee O_j > O_i.
  auto guaranteed = [&](int i, int j) {
    const auto& fi = forms_[static_cast<std::size_t>(i)];
    const auto& fj = forms_[static_cast<std::size_t>(j)];
    if (fi.root != fj.root) return false;
    return fj.offset > fi.offset;
  };
  auto require_edge = [&](int i, int j, const std::string& what) {
    if (i == j) throw ConstraintError(what + ": a concept cannot appear in its own rules");
    if (override_mask_(i, j) != 0.0 && override_value_(i, j) == 0.0) {
      throw ConstraintError(what + " conflicts with allow matrix A" + pair_str(i, j) + " = 0");
    }
    if (!guaranteed(i, j)) {
      throw ConstraintError(what + " needs O_" + std::to_string(j) + " > O_" + std::to_string(i) +
                            " for all parameter values; add a [priorities] constraint");
    }
  };
  for (auto [child, parent] : spec_.allow_parent) {
    check_index(child, n, "allow_parent child");
    check_index(parent, n, "allow_parent parent");
    const std::string what = "allow_parent" + pair_str(child, parent);
    require_edge(child, parent, what);
    set_override(child, parent, 1.0, what);
  }

  // Clamps and injected rules.
  clamp_mask_ = ad::Matrix::Zero(slots, n);
  clamp_pos_ = ad::Matrix::Zero(slots, n);
  clamp_neg_ = ad::Matrix::Zero(slots, n);
  clamp_irr_ = ad::Matrix::Zero(slots, n);
  auto set_clamp = [&](int i, int k, int j, Role role, const std::string& what) {
    const Eigen::Index r = static_cast<Eigen::Index>(i) * n_r + k;
    if (clamp_mask_(r, j) != 0.0) {
      const Role prev = clamp_pos_(r, j) != 0.0 ? Role::Positive
                        : clamp_neg_(r, j) != 0.0 ? Role::Negative
                                                  : Role::Irrelevant;
      if (prev != role) throw ConstraintError(what + " conflicts with an earlier clamp at " + triple_str(i, k, j));
      return;
    }
    if (role != Role::Irrelevant) require_edge(i, j, what + " at " + triple_str(i, k, j));
    clamp_mask_(r, j) = 1.0;
    clamp_pos_(r, j) = role == Role::Positive ? 1.0 : 0.0;
    clamp_neg_(r, j) = role == Role::Negative ? 1.0 : 0.0;
    clamp_irr_(r, j) = role == Role::Irrelevant ? 1.0 : 0.0;
  };

  injected_count_.assign(static_cast<std::size_t>(n), 0);
  std::set<std::pair<int, int>> injected_slots;
  for (const auto& rule : spec_.injected) {
    check_index(rule.concept_index, n, "injected rule concept");
    check_index(rule.rule, n_r, "injected rule slot");
    if (!injected_slots.emplace(rule.concept_index, rule.rule).second) {
      throw ConstraintError("rule slot " + pair_str(rule.concept_index, rule.rule) + " injected twice");
    }
    ++injected_count_[static_cast<std::size_t>(rule.concept_index)];
    std::vector<Role> roles(static_cast<std::size_t>(n), Role::Irrelevant);
    for (const auto& lit : rule.body) {
      check_index(lit.concept_index, n, "injected literal");
      roles[static_cast<std::size_t>(lit.concept_index)] = lit.negated ? Role::Negative : Role::Positive;
    }
    for (int j = 0; j < n; ++j) {
      set_clamp(rule.concept_index, rule.rule, j, roles[static_cast<std::size_t>(j)],
                "injected rule " + concept_name(rule.concept_index) + "[" + std::to_string(rule.rule) + "]");
    }
  }
  for (const auto& c : spec_.clamps) {
    check_index(c.child, n, "clamp child");
    check_index(c.rule, n_r, "clamp rule");
    check_index(c.concept_index, n, "clamp concept");
    set_clamp(c.child, c.rule, c.concept_index, c.role, "clamp");
  }
}

std::optional<bool> ConstraintSet::allow_override(int i, int j) const {
  if (override_mask_(i, j) == 0.0) return std::nullopt;
  return override_value_(i, j) != 0.0;
}

std::optional<Role> ConstraintSet::clamp(int i, int k, int j) const {
  const Eigen::Index r = static_cast<Eigen::Index>(i) * spec_.n_rules + k;
  if (clamp_mask_(r, j) == 0.0) return std::nullopt;
  if (clamp_pos_(r, j) != 0.0) return Role::Positive;
  if (clamp_neg_(r, j) != 0.0) return Role::Negative;
  return Role::Irrelevant;
}

bool ConstraintSet::injected(int i, int k) const {
  return std::any_of(spec_.injected.begin(), spec_.injected.end(),
                     [&](const InjectedRule& r) { return r.concept_index == i && r.rule == k; });
}

bool ConstraintSet::pinned(int i) const {
  return spec_.pin_selection && injected_count_[static_cast<std::size_t>(i)] == spec_.n_rules;
}

bool ConstraintSet::priority_constrained(int i) const {
  const auto& f = forms_[static_cast<std::size_t>(i)];
  return !f.root || *f.root != i || f.offset != 0.0;
}

ad::Var ConstraintSet::effective_priorities(const ad::Var& raw) const {
  if (spec_.priorities.empty()) return raw;
  return ad::add(ad::matmul(raw, ad::constant(priority_map_)), ad::constant(priority_offset_));
}

std::vector<double> ConstraintSet::effective_priorities(const std::vector<double>& raw) const {
  if (static_cast<int>(raw.size()) != spec_.n_concepts) throw ShapeError("priority vector length mismatch");
  std::vector<double> out(raw.size());
  for (std::size_t c = 0; c < raw.size(); ++c) {
    const auto& f = forms_[c];
    out[c] = (f.root ? raw[static_cast<std::size_t>(*f.root)] : 0.0) + f.offset;
  }
  return out;
}

std::string ConstraintSet::to_text() const {
  std::ostringstream os;
  os << "# concepts: " << spec_.n_concepts << ", rules: " << spec_.n_rules << "\n";
  auto list = [&](const char* name, const std::vector<int>& v) {
    if (v.empty()) return;
    os << '[' << name << "]\n";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    os << '\n';
  };
  auto pairs = [&](const char* name, const std::vector<std::pair<int, int>>& v) {
    if (v.empty()) return;
    os << '[' << name << "]\n";
    for (auto [a, b] : v) os << a << ' ' << b << '\n';
  };
  list("force_source", spec_.force_source);
  list("force_sink", spec_.force_sink);
  pairs("forbid_parent", spec_.forbid_parent);
  pairs("allow_parent", spec_.allow_parent);
  if (!spec_.clamps.empty()) {
    os << "[clamp]\n";
    for (const auto& c : spec_.clamps) {
      os << c.child << ' ' << c.rule << ' ' << c.concept_index << ' ' << role_symbol(c.role) << '\n';
    }
  }
  if (!spec_.injected.empty()) {
    os << "[inject_rules]\n";
    for (const auto& r : spec_.injected) {
      os << concept_name(r.concept_index) << '[' << r.rule << "] <- " << body_text(r.body) << '\n';
    }
  }
  if (!spec_.priorities.empty()) {
    os << "[priorities]\n";
    for (const auto& p : spec_.priorities) {
      os << 'O' << p.concept_index << " = ";
      if (p.anchor) {
        os << 'O' << *p.anchor << (p.value < 0 ? " - " : " + ") << format_double(std::abs(p.value)) << '\n';
      } else {
        os << format_double(p.value) << '\n';
      }
    }
  }
  if (spec_.pin_selection) os << "[options]\npin_selection = true\n";
  return os.str();
}

std::uint64_t ConstraintSet::digest() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

AllowMatrix build_allow_matrix(const std::vector<double>& priorities, const ConstraintSet& cs) {
  const int n = cs.n_concepts();
  const auto eff = cs.effective_priorities(priorities);
  AllowMatrix a{n, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n, 0)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      bool v = eff[static_cast<std::size_t>(j)] > eff[static_cast<std::size_t>(i)];
      if (auto ov = cs.allow_override(i, j)) v = *ov;
      a.entries[static_cast<std::size_t>(i) * n + j] = v ? 1 : 0;
    }
  }
  return a;
}

RoleTensor apply_constraints(const RoleTensor& r_prime, const ConstraintSet& cs,
                             const std::vector<double>& priorities) {
  return adjust_roles(r_prime, priorities, &cs);
}

namespace {

std::string_view trim_sv(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ',')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != ',') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<int> priority_ref(std::string_view tok, int n) {
  tok = trim_sv(tok);
  if (!tok.empty() && (tok.front() == 'O' || tok.front() == 'o')) tok.remove_prefix(1);
  return parse_concept_ref(tok, n);
}

}  // namespace

ConstraintSet parse_constraints(std::string_view text, int n_concepts, int n_rules) {
  ConstraintSpec spec;
  spec.n_concepts = n_concepts;
  spec.n_rules = n_rules;
  std::string section;
  std::map<int, int> next_rule_slot;

  std::size_t line_no = 0;
  for (std::size_t start = 0; start <= text.size();) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim_sv(line);
    if (line.empty()) continue;

    auto fail = [&](const std::string& msg) -> void { throw ParseError(msg, line_no); };
    auto concept_at = [&](std::string_view tok) {
      auto v = parse_concept_ref(tok, n_concepts);
      if (!v) fail("invalid concept reference '" + std::string(tok) + "'");
      return *v;
    };

    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      section = std::string(trim_sv(line.substr(1, line.size() - 2)));
      static const std::set<std::string> known{"force_source", "force_sink", "forbid_parent", "allow_parent",
                                               "clamp", "inject_rules", "priorities", "options"};
      if (!known.count(section)) fail("unknown section [" + section + "]");
      continue;
    }
    if (section.empty()) fail("content before the first section header");

    if (section == "force_source" || section == "force_sink") {
      auto& dst = section == "force_source" ? spec.force_source : spec.force_sink;
      for (auto tok : tokens(line)) dst.push_back(concept_at(tok));
    } else if (section == "forbid_parent" || section == "allow_parent") {
      auto toks = tokens(line);
      if (toks.size() != 2) fail("expected 'child parent'");
      auto& dst = section == "forbid_parent" ? spec.forbid_parent : spec.allow_parent;
      dst.emplace_back(concept_at(toks[0]), concept_at(toks[1]));
    } else if (section == "clamp") {
      auto toks = tokens(line);
      if (toks.size() != 4) fail("expected 'child rule concept role'");
      RoleClamp c;
      c.child = concept_at(toks[0]);
      int k = -1;
      if (auto [p, ec] = std::from_chars(toks[1].data(), toks[1].data() + toks[1].size(), k);
          ec != std::errc() || p != toks[1].data() + toks[1].size() || k < 0 || k >= n_rules) {
        fail("invalid rule index '" + std::string(toks[1]) + "'");
      }
      c.rule = k;
      c.concept_index = concept_at(toks[2]);
      if (toks[3] == "P") c.role = Role::Positive;
      else if (toks[3] == "N") c.role = Role::Negative;
      else if (toks[3] == "I") c.role = Role::Irrelevant;
      else fail("role must be P, N or I");
      spec.clamps.push_back(c);
    } else if (section == "inject_rules") {
      RuleLine rl;
      try {
        rl = parse_rule_line(line, n_concepts);
      } catch (const ParseError& e) {
        fail(e.what());
      }
      int& next = next_rule_slot[rl.concept_index];
      const int k = rl.rule ? *rl.rule : next;
      if (k >= n_rules) fail("rule slot " + std::to_string(k) + " exceeds n_rules");
      next = std::max(next, k + 1);
      spec.injected.push_back({rl.concept_index, k, rl.body});
    } else if (section == "priorities") {
      auto toks = tokens(line);
      PriorityAssignment pa;
      if (toks.size() == 3 && (toks[1] == "above" || toks[1] == "below")) {
        auto l = priority_ref(toks[0], n_concepts);
        auto k = priority_ref(toks[2], n_concepts);
        if (!l || !k) fail("invalid priority reference");
        pa.concept_index = *l;
        pa.anchor = *k;
        pa.value = toks[1] == "above" ? kDefaultPriorityOffset : -kDefaultPriorityOffset;
      } else {
        auto eq = line.find('=');
        if (eq == std::string_view::npos) fail("expected 'O<i> = value', 'O<i> = O<k> +/- z' or 'O<i> above|below O<k>'");
        auto l = priority_ref(line.substr(0, eq), n_concepts);
        if (!l) fail("invalid priority reference");
        pa.concept_index = *l;
        auto rhs = trim_sv(line.substr(eq + 1));
        auto rt = tokens(rhs);
        try {
          if (rt.size() == 1 && !rt[0].empty() && (rt[0].front() == 'O' || rt[0].front() == 'o')) {
            auto k = priority_ref(rt[0], n_concepts);
            if (!k) fail("invalid priority reference");
            pa.anchor = *k;
            pa.value = 0.0;
          } else if (rt.size() == 1) {
            pa.value = parse_double(rt[0]);
          } else if (rt.size() == 3 && (rt[1] == "+" || rt[1] == "-")) {
            auto k = priority_ref(rt[0], n_concepts);
            if (!k) fail("invalid priority reference");
            pa.anchor = *k;
            const double z = rt[2] == "z" ? kDefaultPriorityOffset : parse_double(rt[2]);
            pa.value = rt[1] == "+" ? z : -z;
          } else {
            fail("malformed priority expression");
          }
        } catch (const ParseError& e) {
          if (e.line() != 0) throw;
          fail(e.what());
        }
      }
      spec.priorities.push_back(pa);
    } else if (section == "options") {
      auto eq = line.find('=');
      if (eq == std::string_view::npos) fail("expected 'key = value'");
      auto key = trim_sv(line.substr(0, eq));
      auto val = trim_sv(line.substr(eq + 1));
      if (key != "pin_selection") fail("unknown option '" + std::string(key) + "'");
      if (val == "true") spec.pin_selection = true;
      else if (val == "false") spec.pin_selection = false;
      else fail("pin_selection must be true or false");
    }
  }
  return ConstraintSet(std::move(spec));
}

ConstraintSet load_constraints(const std::filesystem::path& path, int n_concepts, int n_rules) {
  return parse_constraints(read_text_file(path), n_concepts, n_rules);
}

}  // namespace hcmr
