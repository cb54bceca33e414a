#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "util.hpp"

namespace sash {

/// Distinguished "no satisfying valuation" distance. Absorbing for +,
/// neutral for min, which is exactly how IEEE infinity behaves.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Domain and valuations
// ---------------------------------------------------------------------------

struct Variable {
  std::string name;
  int lo = 0;
  int hi = 0;
};

/// An assignment of one integer to each domain variable, positionally.
using Valuation = std::vector<int>;

/// A finite integer box domain: an ordered list of variables, each ranging
/// over an inclusive interval. The induced valuation space is the cartesian
/// product of the ranges.
class Domain {
 public:
  Domain() = default;

  explicit Domain(std::vector<Variable> vars) : vars_(std::move(vars)) {
    if (vars_.empty()) throw std::invalid_argument("domain needs at least one variable");
    for (const auto& v : vars_) {
      if (v.name.empty()) throw std::invalid_argument("domain variable with empty name");
      if (v.lo > v.hi)
        throw std::invalid_argument("domain variable '" + v.name + "' has lo > hi");
    }
    for (std::size_t i = 0; i < vars_.size(); ++i)
      for (std::size_t j = i + 1; j < vars_.size(); ++j)
        if (vars_[i].name == vars_[j].name)
          throw std::invalid_argument("duplicate domain variable '" + vars_[i].name + "'");
  }

  const std::vector<Variable>& variables() const { return vars_; }
  std::size_t size() const { return vars_.size(); }

  int index_of(std::string_view name) const {
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  int require_index(std::string_view name) const {
    int i = index_of(name);
    if (i < 0) throw std::invalid_argument("unknown variable '" + std::string(name) + "'");
    return i;
  }

  std::size_t cardinality() const {
    std::size_t n = 1;
    for (const auto& v : vars_) n *= static_cast<std::size_t>(v.hi - v.lo + 1);
    return n;
  }

  bool contains(const Valuation& v) const {
    if (v.size() != vars_.size()) return false;
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (v[i] < vars_[i].lo || v[i] > vars_[i].hi) return false;
    return true;
  }

  /// All valuations, first variable most significant. The order is total and
  /// deterministic, so enumeration doubles as a canonical set order.
  std::vector<Valuation> enumerate() const {
    std::vector<Valuation> out;
    out.reserve(cardinality());
    Valuation cur(vars_.size());
    for (std::size_t i = 0; i < vars_.size(); ++i) cur[i] = vars_[i].lo;
    while (true) {
      out.push_back(cur);
      std::size_t i = vars_.size();
      while (i > 0) {
        --i;
        if (cur[i] < vars_[i].hi) {
          ++cur[i];
          for (std::size_t j = i + 1; j < vars_.size(); ++j) cur[j] = vars_[j].lo;
          break;
        }
        if (i == 0) return out;
      }
    }
  }

  bool operator==(const Domain& o) const {
    if (vars_.size() != o.vars_.size()) return false;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i].name != o.vars_[i].name || vars_[i].lo != o.vars_[i].lo ||
          vars_[i].hi != o.vars_[i].hi)
        return false;
    }
    return true;
  }
  bool operator!=(const Domain& o) const { return !(*this == o); }

 private:
  std::vector<Variable> vars_;
};

// ---------------------------------------------------------------------------
// Predicates
// ---------------------------------------------------------------------------

enum class Cmp { lt, le, gt, ge, eq };

inline std::string_view cmp_text(Cmp c) {
  switch (c) {
    case Cmp::lt: return "<";
    case Cmp::le: return "<=";
    case Cmp::gt: return ">";
    case Cmp::ge: return ">=";
    case Cmp::eq: return "==";
  }
  return "?";
}

inline bool cmp_holds(int value, Cmp c, int bound) {
  switch (c) {
    case Cmp::lt: return value < bound;
    case Cmp::le: return value <= bound;
    case Cmp::gt: return value > bound;
    case Cmp::ge: return value >= bound;
    case Cmp::eq: return value == bound;
  }
  return false;
}

/// Immutable predicate AST: true | false | x ~ k | !p | p & p.
/// Disjunction is surface syntax only and is stored desugared as
/// !(!a & !b). Nodes are shared, so copies are cheap.
class Predicate {
 public:
  enum class Kind { constant_true, constant_false, atom, negation, conjunction };

  Predicate() : Predicate(truth()) {}

  static Predicate truth() { return Predicate(make_node(Kind::constant_true)); }
  static Predicate falsity() { return Predicate(make_node(Kind::constant_false)); }

  static Predicate atom(std::string var, Cmp cmp, int bound) {
    auto n = make_node(Kind::atom);
    n->var = std::move(var);
    n->cmp = cmp;
    n->bound = bound;
    return Predicate(std::move(n));
  }

  friend Predicate operator!(const Predicate& p) {
    auto n = make_node(Kind::negation);
    n->lhs = p.node_;
    return Predicate(std::move(n));
  }

  friend Predicate operator&(const Predicate& a, const Predicate& b) {
    auto n = make_node(Kind::conjunction);
    n->lhs = a.node_;
    n->rhs = b.node_;
    return Predicate(std::move(n));
  }

  // a | b  ==  !(!a & !b)
  friend Predicate operator|(const Predicate& a, const Predicate& b) {
    return !((!a) & (!b));
  }

  Kind kind() const { return node_->kind; }
  const std::string& var() const { return node_->var; }
  Cmp cmp() const { return node_->cmp; }
  int bound() const { return node_->bound; }
  /// Child of a negation.
  Predicate child() const { return Predicate(node_->lhs); }
  Predicate left() const { return Predicate(node_->lhs); }
  Predicate right() const { return Predicate(node_->rhs); }

  /// Variables referenced by atoms, in first-occurrence order.
  std::vector<std::string> referenced_variables() const {
    std::vector<std::string> out;
    collect_vars(*node_, out);
    return out;
  }

 private:
  struct Node {
    Kind kind = Kind::constant_true;
    std::string var;
    Cmp cmp = Cmp::eq;
    int bound = 0;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  explicit Predicate(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static std::shared_ptr<Node> make_node(Kind k) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    return n;
  }

  static void collect_vars(const Node& n, std::vector<std::string>& out) {
    switch (n.kind) {
      case Kind::atom:
        if (std::find(out.begin(), out.end(), n.var) == out.end()) out.push_back(n.var);
        break;
      case Kind::negation:
        collect_vars(*n.lhs, out);
        break;
      case Kind::conjunction:
        collect_vars(*n.lhs, out);
        collect_vars(*n.rhs, out);
        break;
      default:
        break;
    }
  }

  friend bool satisfies(const Valuation&, const Predicate&, const Domain&);
  friend std::string to_string(const Predicate&);

  std::shared_ptr<const Node> node_;

  static bool eval(const Node& n, const Valuation& v, const Domain& dom) {
    switch (n.kind) {
      case Kind::constant_true: return true;
      case Kind::constant_false: return false;
      case Kind::atom: return cmp_holds(v.at(static_cast<std::size_t>(dom.require_index(n.var))), n.cmp, n.bound);
      case Kind::negation: return !eval(*n.lhs, v, dom);
      case Kind::conjunction: return eval(*n.lhs, v, dom) && eval(*n.rhs, v, dom);
    }
    return false;
  }

  static void print(const Node& n, std::ostream& os) {
    switch (n.kind) {
      case Kind::constant_true: os << "true"; break;
      case Kind::constant_false: os << "false"; break;
      case Kind::atom: os << n.var << ' ' << cmp_text(n.cmp) << ' ' << n.bound; break;
      case Kind::negation:
        os << '!';
        if (n.lhs->kind == Kind::constant_true || n.lhs->kind == Kind::constant_false) {
          print(*n.lhs, os);
        } else {
          os << '(';
          print(*n.lhs, os);
          os << ')';
        }
        break;
      case Kind::conjunction:
        print(*n.lhs, os);
        os << " & ";
        print(*n.rhs, os);
        break;
    }
  }
};

/// Recursive satisfaction semantics: v |= psi. Throws on atoms over
/// variables absent from the domain.
inline bool satisfies(const Valuation& v, const Predicate& psi, const Domain& dom) {
  return Predicate::eval(*psi.node_, v, dom);
}

inline std::string to_string(const Predicate& p) {
  std::ostringstream os;
  Predicate::print(*p.node_, os);
  return os.str();
}

inline std::ostream& operator<<(std::ostream& os, const Predicate& p) {
  return os << to_string(p);
}

// ---------------------------------------------------------------------------
// Concrete syntax
// ---------------------------------------------------------------------------
//
//   expr   := term ('|' term)*
//   term   := factor ('&' factor)*
//   factor := '!' factor | '(' expr ')' | 'true' | 'false' | ident op int
//   op     := '<' | '<=' | '>' | '>=' | '=='

namespace detail {

class PredicateParser {
 public:
  explicit PredicateParser(std::string_view text) : text_(text) {}

  Predicate parse() {
    Predicate p = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return p;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("predicate syntax error at position " + std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  Predicate expr() {
    Predicate p = term();
    while (eat('|')) p = p | term();
    return p;
  }

  Predicate term() {
    Predicate p = factor();
    while (true) {
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '&') {
        ++pos_;
        p = p & factor();
      } else {
        break;
      }
    }
    return p;
  }

  Predicate factor() {
    if (eat('!')) return !factor();
    if (eat('(')) {
      Predicate p = expr();
      if (!eat(')')) fail("expected ')'");
      return p;
    }
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string word = ident();
      if (word == "true") return Predicate::truth();
      if (word == "false") return Predicate::falsity();
      Cmp op = comparator();
      int k = integer();
      return Predicate::atom(std::move(word), op, k);
    }
    fail("expected predicate");
  }

  std::string ident() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_')
        ++pos_;
      else
        break;
    }
    if (pos_ == start) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  Cmp comparator() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expected comparison operator");
    char c = text_[pos_];
    if (c == '<') {
      ++pos_;
      if (pos_ < text_.size() && text_[pos_] == '=') {
        ++pos_;
        return Cmp::le;
      }
      return Cmp::lt;
    }
    if (c == '>') {
      ++pos_;
      if (pos_ < text_.size() && text_[pos_] == '=') {
        ++pos_;
        return Cmp::ge;
      }
      return Cmp::gt;
    }
    if (c == '=') {
      ++pos_;
      if (pos_ < text_.size() && text_[pos_] == '=') {
        ++pos_;
        return Cmp::eq;
      }
      fail("unknown operator '=' (use '==')");
    }
    fail(std::string("unknown operator '") + c + "'");
  }

  int integer() {
    skip_ws();
    std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    std::size_t digits = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == digits) fail("expected integer constant");
    long long v = 0;
    [[maybe_unused]] bool ok = util::parse_int(text_.substr(start, pos_ - start), v);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
      fail("integer constant out of range");
    return static_cast<int>(v);
  }
};

}  // namespace detail

inline Predicate parse_predicate(std::string_view text) {
  return detail::PredicateParser(text).parse();
}

// ---------------------------------------------------------------------------
// Metrics and distances
// ---------------------------------------------------------------------------

enum class Metric { manhattan, euclidean, chebyshev };

inline Metric parse_metric(std::string_view name) {
  if (name == "manhattan") return Metric::manhattan;
  if (name == "euclidean") return Metric::euclidean;
  if (name == "chebyshev") return Metric::chebyshev;
  throw ParseError("unknown metric '" + std::string(name) + "'");
}

inline std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::manhattan: return "manhattan";
    case Metric::euclidean: return "euclidean";
    case Metric::chebyshev: return "chebyshev";
  }
  return "?";
}

inline double distance(Metric m, const Valuation& a, const Valuation& b) {
  if (a.size() != b.size()) throw std::invalid_argument("valuation dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    switch (m) {
      case Metric::manhattan: acc += d; break;
      case Metric::euclidean: acc += d * d; break;
      case Metric::chebyshev: acc = std::max(acc, d); break;
    }
  }
  return m == Metric::euclidean ? std::sqrt(acc) : acc;
}

/// The finite set of domain valuations satisfying a predicate, in the
/// domain's canonical enumeration order (deduplicated by construction).
using ValueSet = std::vector<Valuation>;

inline ValueSet value_set(const Predicate& psi, const Domain& dom) {
  ValueSet out;
  for (const auto& v : dom.enumerate())
    if (satisfies(v, psi, dom)) out.push_back(v);
  return out;
}

/// min_{v' in set} d(v, v'); infinity on an empty set.
inline double vpd(const Valuation& v, const ValueSet& set, Metric m) {
  double best = kInfinity;
  for (const auto& w : set) best = std::min(best, distance(m, v, w));
  return best;
}

/// Value-predicate distance: distance from v to the nearest valuation
/// satisfying psi. Infinity when psi is unsatisfiable over the domain.
inline double vpd(const Valuation& v, const Predicate& psi, const Domain& dom, Metric m) {
  double best = kInfinity;
  for (const auto& w : dom.enumerate())
    if (satisfies(w, psi, dom)) best = std::min(best, distance(m, v, w));
  return best;
}

/// Symmetric Hausdorff distance between two finite valuation sets;
/// infinity if either side is empty.
inline double hausdorff(const ValueSet& s1, const ValueSet& s2, Metric m) {
  if (s1.empty() || s2.empty()) return kInfinity;
  double worst = 0.0;
  for (const auto& a : s1) worst = std::max(worst, vpd(a, s2, m));
  for (const auto& b : s2) worst = std::max(worst, vpd(b, s1, m));
  return worst;
}

inline double hausdorff(const Predicate& psi1, const Predicate& psi2, const Domain& dom,
                        Metric m) {
  return hausdorff(value_set(psi1, dom), value_set(psi2, dom), m);
}

}  // namespace sash
