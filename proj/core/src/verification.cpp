#include "hcmr/verification.hpp"

#include "hcmr/error.hpp"
#include "hcmr/rule_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace hcmr {

Formula Formula::constant(bool v) {
  Formula f;
  f.kind = Kind::Const;
  f.value = v;
  return f;
}

Formula Formula::variable(std::string name) {
  Formula f;
  f.kind = Kind::Atom;
  f.atom = std::move(name);
  return f;
}

Formula Formula::negation(Formula a) {
  Formula f;
  f.kind = Kind::Not;
  f.args.push_back(std::move(a));
  return f;
}

Formula Formula::binary(Kind k, Formula a, Formula b) {
  Formula f;
  f.kind = k;
  f.args.push_back(std::move(a));
  f.args.push_back(std::move(b));
  return f;
}

bool Formula::evaluate(const std::map<std::string, bool>& assignment) const {
  switch (kind) {
    case Kind::Const: return value;
    case Kind::Atom: {
      auto it = assignment.find(atom);
      if (it == assignment.end()) throw ArgumentError("no value for atom '" + atom + "'");
      return it->second;
    }
    case Kind::Not: return !args[0].evaluate(assignment);
    case Kind::And: return args[0].evaluate(assignment) && args[1].evaluate(assignment);
    case Kind::Or: return args[0].evaluate(assignment) || args[1].evaluate(assignment);
    case Kind::Implies: return !args[0].evaluate(assignment) || args[1].evaluate(assignment);
    case Kind::Iff: return args[0].evaluate(assignment) == args[1].evaluate(assignment);
  }
  return false;
}

void Formula::collect_atoms(std::vector<std::string>& out) const {
  if (kind == Kind::Atom && std::find(out.begin(), out.end(), atom) == out.end()) out.push_back(atom);
  for (const auto& a : args) a.collect_atoms(out);
}

std::string Formula::to_string() const {
  switch (kind) {
    case Kind::Const: return value ? "true" : "false";
    case Kind::Atom: return atom;
    case Kind::Not: return "!" + args[0].to_string();
    case Kind::And: return "(" + args[0].to_string() + " & " + args[1].to_string() + ")";
    case Kind::Or: return "(" + args[0].to_string() + " | " + args[1].to_string() + ")";
    case Kind::Implies: return "(" + args[0].to_string() + " -> " + args[1].to_string() + ")";
    case Kind::Iff: return "(" + args[0].to_string() + " <-> " + args[1].to_string() + ")";
  }
  return "";
}

namespace {

class FormulaParser {
 public:
  explicit FormulaParser(std::string_view text) : s_(text) {}

  Formula parse() {
    Formula f = iff();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("formula column " + std::to_string(pos_ + 1) + ": " + msg);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(std::string_view tok) {
    skip();
    if (s_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  Formula iff() {
    Formula a = implies();
    while (eat("<->")) a = Formula::binary(Formula::Kind::Iff, std::move(a), implies());
    return a;
  }

  Formula implies() {
    Formula a = disj();
    if (eat("->")) return Formula::binary(Formula::Kind::Implies, std::move(a), implies());
    return a;
  }

  Formula disj() {
    Formula a = conj();
    while (eat("|")) a = Formula::binary(Formula::Kind::Or, std::move(a), conj());
    return a;
  }

  Formula conj() {
    Formula a = unary();
    while (eat("&")) a = Formula::binary(Formula::Kind::And, std::move(a), unary());
    return a;
  }

  Formula unary() {
    if (eat("!") || eat("~")) return Formula::negation(unary());
    if (eat("(")) {
      Formula f = iff();
      if (!eat(")")) fail("expected ')'");
      return f;
    }
    skip();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    if (start == pos_) fail(pos_ < s_.size() ? "unexpected '" + std::string(1, s_[pos_]) + "'" : "unexpected end");
    std::string name(s_.substr(start, pos_ - start));
    if (std::isdigit(static_cast<unsigned char>(name[0]))) fail("atom names must start with a letter");
    if (name == "true") return Formula::constant(true);
    if (name == "false") return Formula::constant(false);
    if (name[0] == 'C' && name.size() > 1 &&
        std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      name[0] = 'c';
    }
    return Formula::variable(std::move(name));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

// Formula with atoms resolved to indices, for fast repeated evaluation.
struct Compiled {
  Formula::Kind kind;
  bool value = false;
  int atom = -1;
  std::vector<Compiled> args;

  bool eval(const std::vector<char>& v) const {
    switch (kind) {
      case Formula::Kind::Const: return value;
      case Formula::Kind::Atom: return v[static_cast<std::size_t>(atom)] != 0;
      case Formula::Kind::Not: return !args[0].eval(v);
      case Formula::Kind::And: return args[0].eval(v) && args[1].eval(v);
      case Formula::Kind::Or: return args[0].eval(v) || args[1].eval(v);
      case Formula::Kind::Implies: return !args[0].eval(v) || args[1].eval(v);
      case Formula::Kind::Iff: return args[0].eval(v) == args[1].eval(v);
    }
    return false;
  }
};

int atom_index(const PropositionalEncoding& enc, const std::string& name) {
  auto it = std::find(enc.atoms.begin(), enc.atoms.end(), name);
  if (it == enc.atoms.end()) throw ArgumentError("constraint references undeclared atom '" + name + "'");
  return static_cast<int>(it - enc.atoms.begin());
}

Compiled compile(const Formula& f, const PropositionalEncoding& enc) {
  Compiled c{f.kind, f.value, -1, {}};
  if (f.kind == Formula::Kind::Atom) c.atom = atom_index(enc, f.atom);
  for (const auto& a : f.args) c.args.push_back(compile(a, enc));
  return c;
}

bool body_holds(const std::vector<Literal>& body, const std::vector<char>& v) {
  for (const auto& lit : body) {
    if ((v[static_cast<std::size_t>(lit.concept_index)] != 0) == lit.negated) return false;
  }
  return true;
}

}  // namespace

Formula parse_formula(std::string_view text) { return FormulaParser(text).parse(); }

std::string concept_atom(int i) { return "c" + std::to_string(i); }
std::string selection_atom(int i, int k) { return "sel_" + std::to_string(i) + "_" + std::to_string(k); }

bool PropositionalEncoding::declares(const std::string& atom) const {
  return std::find(atoms.begin(), atoms.end(), atom) != atoms.end();
}

PropositionalEncoding export_propositional(const SymbolicRuleSet& rules) {
  PropositionalEncoding enc;
  enc.n_concepts = rules.n_concepts();
  enc.n_rules = rules.n_rules();
  for (int i = 0; i < enc.n_concepts; ++i) enc.atoms.push_back(concept_atom(i));
  const ConceptGraph graph = derive_graph(rules);
  for (int i = 0; i < enc.n_concepts; ++i) {
    if (rules.source(i)) enc.sources.push_back(i);
  }
  for (int i : graph.topo_order) {
    if (rules.source(i)) continue;
    ConceptDefinition def;
    def.concept_index = i;
    for (int k = 0; k < enc.n_rules; ++k) {
      def.selection_atoms.push_back(selection_atom(i, k));
      def.bodies.push_back(rule_body(rules, i, k));
    }
    enc.definitions.push_back(std::move(def));
  }
  // Selection atoms in concept order for a stable numbering.
  std::vector<const ConceptDefinition*> by_concept;
  for (const auto& d : enc.definitions) by_concept.push_back(&d);
  std::sort(by_concept.begin(), by_concept.end(),
            [](const auto* a, const auto* b) { return a->concept_index < b->concept_index; });
  for (const auto* d : by_concept) {
    for (const auto& a : d->selection_atoms) enc.atoms.push_back(a);
  }
  return enc;
}

std::string PropositionalEncoding::to_text() const {
  std::ostringstream os;
  os << "atoms:";
  for (const auto& a : atoms) os << ' ' << a;
  os << "\nsources:";
  for (int s : sources) os << ' ' << concept_atom(s);
  os << '\n';
  for (const auto& d : definitions) {
    os << concept_atom(d.concept_index) << " <->";
    for (std::size_t k = 0; k < d.bodies.size(); ++k) {
      os << (k ? " |" : "") << " (" << d.selection_atoms[k];
      for (const auto& lit : d.bodies[k]) os << " & " << (lit.negated ? "!" : "") << concept_atom(lit.concept_index);
      os << ')';
    }
    os << "\nexactly_one(";
    for (std::size_t k = 0; k < d.selection_atoms.size(); ++k) os << (k ? ", " : "") << d.selection_atoms[k];
    os << ")\n";
  }
  return os.str();
}

bool PropositionalEncoding::satisfied_by(const std::map<std::string, bool>& assignment) const {
  auto val = [&](const std::string& a) {
    auto it = assignment.find(a);
    if (it == assignment.end()) throw ArgumentError("assignment lacks atom '" + a + "'");
    return it->second;
  };
  std::vector<char> concepts(static_cast<std::size_t>(n_concepts));
  for (int i = 0; i < n_concepts; ++i) concepts[static_cast<std::size_t>(i)] = val(concept_atom(i)) ? 1 : 0;
  for (const auto& d : definitions) {
    int selected = 0;
    bool any = false;
    for (std::size_t k = 0; k < d.bodies.size(); ++k) {
      const bool s = val(d.selection_atoms[k]);
      selected += s ? 1 : 0;
      any = any || (s && body_holds(d.bodies[k], concepts));
    }
    if (selected != 1) return false;
    if (any != (concepts[static_cast<std::size_t>(d.concept_index)] != 0)) return false;
  }
  return true;
}

VerificationResult verify_constraint(const PropositionalEncoding& encoding, const Formula& constraint) {
  const Compiled compiled = compile(constraint, encoding);
  const double bits = static_cast<double>(encoding.sources.size()) +
                      static_cast<double>(encoding.definitions.size()) * std::log2(std::max(1, encoding.n_rules));
  if (bits > kMaxVerificationBits + 1e-9) {
    throw TractabilityError("verification would enumerate 2^" + std::to_string(bits) + " assignments (limit 2^" +
                            std::to_string(kMaxVerificationBits) + "); use the CNF export with an external solver");
  }

  const std::size_t n_src = encoding.sources.size();
  const std::size_t n_def = encoding.definitions.size();
  std::vector<int> sel(n_def, 0);
  std::vector<char> values(encoding.atoms.size(), 0);
  // Atom index of each selection atom.
  std::vector<std::vector<int>> sel_index(n_def);
  for (std::size_t d = 0; d < n_def; ++d) {
    for (const auto& a : encoding.definitions[d].selection_atoms) sel_index[d].push_back(atom_index(encoding, a));
  }

  VerificationResult result;
  const std::uint64_t src_count = std::uint64_t{1} << n_src;
  for (std::uint64_t sm = 0; sm < src_count; ++sm) {
    for (std::size_t s = 0; s < n_src; ++s) {
      values[static_cast<std::size_t>(encoding.sources[s])] = ((sm >> s) & 1) ? 1 : 0;
    }
    std::fill(sel.begin(), sel.end(), 0);
    while (true) {
      for (std::size_t d = 0; d < n_def; ++d) {
        const auto& def = encoding.definitions[d];
        for (std::size_t k = 0; k < sel_index[d].size(); ++k) {
          values[static_cast<std::size_t>(sel_index[d][k])] = static_cast<int>(k) == sel[d] ? 1 : 0;
        }
        values[static_cast<std::size_t>(def.concept_index)] =
            body_holds(def.bodies[static_cast<std::size_t>(sel[d])], values) ? 1 : 0;
      }
      ++result.assignments_checked;
      if (!compiled.eval(values)) {
        result.holds = false;
        std::map<std::string, bool> cex;
        for (std::size_t a = 0; a < encoding.atoms.size(); ++a) cex[encoding.atoms[a]] = values[a] != 0;
        result.counterexample = std::move(cex);
        return result;
      }
      // Mixed-radix increment over rule selections.
      std::size_t d = 0;
      for (; d < n_def; ++d) {
        if (++sel[d] < encoding.n_rules) break;
        sel[d] = 0;
      }
      if (d == n_def) break;
    }
  }
  return result;
}

namespace {

class CnfBuilder {
 public:
  explicit CnfBuilder(int n_atoms) : next_(n_atoms + 1) {}

  int fresh() { return next_++; }
  void clause(std::vector<int> lits) { clauses_.push_back(std::move(lits)); }
  int vars() const { return next_ - 1; }
  const std::vector<std::vector<int>>& clauses() const { return clauses_; }

  // Returns a literal equivalent to f.
  int encode(const Compiled& f) {
    switch (f.kind) {
      case Formula::Kind::Const: {
        const int v = fresh();
        clause({f.value ? v : -v});
        return v;
      }
      case Formula::Kind::Atom: return f.atom + 1;
      case Formula::Kind::Not: return -encode(f.args[0]);
      default: break;
    }
    const int a = encode(f.args[0]);
    const int b = encode(f.args[1]);
    const int t = fresh();
    switch (f.kind) {
      case Formula::Kind::And:
        clause({-t, a});
        clause({-t, b});
        clause({t, -a, -b});
        break;
      case Formula::Kind::Or:
        clause({-t, a, b});
        clause({t, -a});
        clause({t, -b});
        break;
      case Formula::Kind::Implies:
        clause({-t, -a, b});
        clause({t, a});
        clause({t, -b});
        break;
      case Formula::Kind::Iff:
        clause({-t, -a, b});
        clause({-t, a, -b});
        clause({t, a, b});
        clause({t, -a, -b});
        break;
      default: break;
    }
    return t;
  }

 private:
  int next_;
  std::vector<std::vector<int>> clauses_;
};

}  // namespace

std::string export_cnf(const PropositionalEncoding& encoding, const Formula& constraint) {
  const Compiled compiled = compile(constraint, encoding);
  CnfBuilder cnf(static_cast<int>(encoding.atoms.size()));
  auto var = [&](const std::string& atom) { return atom_index(encoding, atom) + 1; };

  for (const auto& d : encoding.definitions) {
    const int c = var(concept_atom(d.concept_index));
    std::vector<int> any{-c};
    for (std::size_t k = 0; k < d.bodies.size(); ++k) {
      const int s = var(d.selection_atoms[k]);
      // t <-> s & body
      const int t = cnf.fresh();
      std::vector<int> back{t, -s};
      cnf.clause({-t, s});
      for (const auto& lit : d.bodies[k]) {
        const int l = lit.negated ? -var(concept_atom(lit.concept_index)) : var(concept_atom(lit.concept_index));
        cnf.clause({-t, l});
        back.push_back(-l);
      }
      cnf.clause(back);
      any.push_back(t);
      cnf.clause({c, -t});
    }
    cnf.clause(any);
    std::vector<int> at_least;
    for (const auto& a : d.selection_atoms) at_least.push_back(var(a));
    cnf.clause(at_least);
    for (std::size_t a = 0; a < at_least.size(); ++a) {
      for (std::size_t b = a + 1; b < at_least.size(); ++b) cnf.clause({-at_least[a], -at_least[b]});
    }
  }
  const int root = cnf.encode(compiled);
  cnf.clause({-root});

  std::ostringstream os;
  os << "c encoding of learned rules and the negated constraint: " << constraint.to_string() << '\n';
  for (std::size_t a = 0; a < encoding.atoms.size(); ++a) os << "c var " << a + 1 << ' ' << encoding.atoms[a] << '\n';
  os << "p cnf " << cnf.vars() << ' ' << cnf.clauses().size() << '\n';
  for (const auto& cl : cnf.clauses()) {
    for (int l : cl) os << l << ' ';
    os << "0\n";
  }
  return os.str();
}

}  // namespace hcmr
