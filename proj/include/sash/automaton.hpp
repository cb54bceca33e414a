#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "predicate.hpp"
#include "util.hpp"

namespace sash {

// ---------------------------------------------------------------------------
// Symbolic automaton
// ---------------------------------------------------------------------------

/// A symbolic automaton: finitely many locations, guarded transitions over
/// predicate constraints, one initial location and a nonempty accepting set.
/// Usable automata are terminally accepting and deterministic-complete;
/// `validate` checks all three properties by exhaustive enumeration of the
/// domain.
class SymbolicAutomaton {
 public:
  struct Transition {
    int from = -1;
    int to = -1;
    Predicate guard;
  };

  SymbolicAutomaton() = default;

  SymbolicAutomaton(Domain domain, std::vector<std::string> locations, int initial,
                    std::vector<int> accepting, std::vector<Transition> transitions)
      : domain_(std::move(domain)),
        locations_(std::move(locations)),
        initial_(initial),
        transitions_(std::move(transitions)) {
    const int n = static_cast<int>(locations_.size());
    if (n == 0) throw std::invalid_argument("automaton needs at least one location");
    if (initial_ < 0 || initial_ >= n) throw std::invalid_argument("initial location out of range");
    if (accepting.empty()) throw std::invalid_argument("automaton needs an accepting location");
    if (transitions_.empty()) throw std::invalid_argument("automaton needs transitions");
    accepting_.assign(static_cast<std::size_t>(n), false);
    for (int q : accepting) {
      if (q < 0 || q >= n) throw std::invalid_argument("accepting location out of range");
      accepting_[static_cast<std::size_t>(q)] = true;
    }
    out_.assign(static_cast<std::size_t>(n), {});
    for (std::size_t t = 0; t < transitions_.size(); ++t) {
      const Transition& tr = transitions_[t];
      if (tr.from < 0 || tr.from >= n || tr.to < 0 || tr.to >= n)
        throw std::invalid_argument("transition endpoint out of range");
      for (std::size_t u = 0; u < t; ++u)
        if (transitions_[u].from == tr.from && transitions_[u].to == tr.to)
          throw std::invalid_argument("duplicate transition " + locations_[tr.from] + " -> " +
                                      locations_[tr.to]);
      for (const std::string& var : tr.guard.referenced_variables())
        if (domain_.index_of(var) < 0)
          throw std::invalid_argument("guard references unknown variable '" + var + "'");
      out_[static_cast<std::size_t>(tr.from)].push_back(static_cast<int>(t));
    }
  }

  const Domain& domain() const { return domain_; }
  int n_locations() const { return static_cast<int>(locations_.size()); }
  const std::vector<std::string>& locations() const { return locations_; }
  const std::string& location_name(int q) const { return locations_.at(static_cast<std::size_t>(q)); }
  int initial() const { return initial_; }
  bool is_accepting(int q) const { return accepting_.at(static_cast<std::size_t>(q)); }

  int location_index(std::string_view name) const {
    for (std::size_t i = 0; i < locations_.size(); ++i)
      if (locations_[i] == name) return static_cast<int>(i);
    return -1;
  }

  const std::vector<Transition>& transitions() const { return transitions_; }
  const Transition& transition(int t) const { return transitions_.at(static_cast<std::size_t>(t)); }
  int n_transitions() const { return static_cast<int>(transitions_.size()); }

  /// Indices into transitions() leaving q, in declaration order.
  const std::vector<int>& outgoing(int q) const { return out_.at(static_cast<std::size_t>(q)); }

 private:
  Domain domain_;
  std::vector<std::string> locations_;
  int initial_ = -1;
  std::vector<bool> accepting_;
  std::vector<Transition> transitions_;
  std::vector<std::vector<int>> out_;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationIssue {
  enum class Kind { terminal_acceptance, determinism, completeness };
  Kind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

inline std::string to_string(const ValidationReport& report) {
  if (report.ok()) return "valid\n";
  std::ostringstream os;
  for (const auto& issue : report.issues) os << issue.message << '\n';
  return os.str();
}

namespace detail {

inline std::string valuation_text(const Domain& dom, const Valuation& v) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    os << dom.variables()[i].name << '=' << v[i];
  }
  os << ')';
  return os.str();
}

}  // namespace detail

/// Checks terminal acceptance plus determinism and completeness of the
/// guards, the latter two by enumerating every valuation of the domain.
/// An empty report means the automaton is usable as a specification.
inline ValidationReport validate(const SymbolicAutomaton& a) {
  ValidationReport report;

  for (const auto& tr : a.transitions()) {
    if (a.is_accepting(tr.from) && !a.is_accepting(tr.to)) {
      report.issues.push_back(
          {ValidationIssue::Kind::terminal_acceptance,
           "terminal acceptance violated: accepting location " + a.location_name(tr.from) +
               " has a transition to non-accepting " + a.location_name(tr.to)});
    }
  }

  const auto space = a.domain().enumerate();
  for (int q = 0; q < a.n_locations(); ++q) {
    bool incomplete_reported = false;
    std::vector<std::pair<int, int>> reported_pairs;
    for (const auto& v : space) {
      int first = -1;
      for (int t : a.outgoing(q)) {
        if (!satisfies(v, a.transition(t).guard, a.domain())) continue;
        if (first < 0) {
          first = t;
          continue;
        }
        auto pair = std::minmax(first, t);
        std::pair<int, int> key{pair.first, pair.second};
        if (std::find(reported_pairs.begin(), reported_pairs.end(), key) == reported_pairs.end()) {
          reported_pairs.push_back(key);
          report.issues.push_back(
              {ValidationIssue::Kind::determinism,
               "determinism violated at " + a.location_name(q) + ": guards to " +
                   a.location_name(a.transition(first).to) + " and " +
                   a.location_name(a.transition(t).to) + " both hold at " +
                   detail::valuation_text(a.domain(), v)});
        }
      }
      if (first < 0 && !incomplete_reported) {
        incomplete_reported = true;
        report.issues.push_back({ValidationIssue::Kind::completeness,
                                 "completeness violated at " + a.location_name(q) +
                                     ": no guard holds at " +
                                     detail::valuation_text(a.domain(), v)});
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Run semantics
// ---------------------------------------------------------------------------

/// The unique successor location of q on valuation v. Throws when zero or
/// several guards fire, which is only reachable on automata that do not
/// pass `validate`.
inline int step(const SymbolicAutomaton& a, int q, const Valuation& v) {
  int chosen = -1;
  for (int t : a.outgoing(q)) {
    if (satisfies(v, a.transition(t).guard, a.domain())) {
      if (chosen >= 0)
        throw std::runtime_error("automaton step: multiple guards fire at " + a.location_name(q));
      chosen = a.transition(t).to;
    }
  }
  if (chosen < 0)
    throw std::runtime_error("automaton step: no guard fires at " + a.location_name(q));
  return chosen;
}

/// Folds `step` over the trace from the initial location; accepting iff the
/// final location is accepting. On terminally accepting automata this
/// coincides with "some prefix reaches an accepting location".
inline bool accepts(const SymbolicAutomaton& a, const std::vector<Valuation>& trace) {
  int q = a.initial();
  for (const auto& v : trace) q = step(a, q, v);
  return a.is_accepting(q);
}

// ---------------------------------------------------------------------------
// Task progress level (eta)
// ---------------------------------------------------------------------------

/// Per-location distance to acceptance: number of transitions on a shortest
/// path to the accepting set, ignoring self-loops; infinity when no such
/// path exists.
struct ProgressLevels {
  std::vector<double> eta;
  double operator[](int q) const { return eta.at(static_cast<std::size_t>(q)); }
};

/// Reverse breadth-first search from the accepting set.
inline ProgressLevels compute_eta(const SymbolicAutomaton& a) {
  const int n = a.n_locations();
  std::vector<std::vector<int>> rev(static_cast<std::size_t>(n));
  for (const auto& tr : a.transitions())
    if (tr.from != tr.to) rev[static_cast<std::size_t>(tr.to)].push_back(tr.from);

  ProgressLevels levels;
  levels.eta.assign(static_cast<std::size_t>(n), kInfinity);
  std::deque<int> frontier;
  for (int q = 0; q < n; ++q) {
    if (a.is_accepting(q)) {
      levels.eta[static_cast<std::size_t>(q)] = 0.0;
      frontier.push_back(q);
    }
  }
  while (!frontier.empty()) {
    int q = frontier.front();
    frontier.pop_front();
    for (int p : rev[static_cast<std::size_t>(q)]) {
      if (levels.eta[static_cast<std::size_t>(p)] == kInfinity) {
        levels.eta[static_cast<std::size_t>(p)] = levels.eta[static_cast<std::size_t>(q)] + 1.0;
        frontier.push_back(p);
      }
    }
  }
  return levels;
}

// ---------------------------------------------------------------------------
// Symbolic subtask progress (per transition)
// ---------------------------------------------------------------------------

/// Per-transition heuristic distance from a subgoal set to the final goal:
///   phi_sym(q,q') = 0 if q' is accepting, otherwise
///   min over (q',q''), q' != q'' of
///     hausdorff(guard(q,q'), guard(q',q'')) + phi_sym(q',q'').
/// On cyclic automata the recursion is read as its least fixed point, which
/// is a single-source shortest path over the transition graph.
struct SubtaskProgress {
  std::vector<double> phi_sym;  // indexed like SymbolicAutomaton::transitions()
  double operator[](int t) const { return phi_sym.at(static_cast<std::size_t>(t)); }
};

inline SubtaskProgress compute_phi_sym(const SymbolicAutomaton& a, Metric m) {
  const int nt = a.n_transitions();

  std::vector<ValueSet> guard_sets;
  guard_sets.reserve(static_cast<std::size_t>(nt));
  for (const auto& tr : a.transitions()) guard_sets.push_back(value_set(tr.guard, a.domain()));

  // Dijkstra from all accepting-headed transitions over reversed edges.
  // An edge t -> t' (weight d_H between the guard sets) exists when t' leaves
  // the head of t and is not a self-loop.
  SubtaskProgress result;
  result.phi_sym.assign(static_cast<std::size_t>(nt), kInfinity);

  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  for (int t = 0; t < nt; ++t) {
    if (a.is_accepting(a.transition(t).to)) {
      result.phi_sym[static_cast<std::size_t>(t)] = 0.0;
      queue.emplace(0.0, t);
    }
  }

  // Reverse adjacency: predecessors of t' are the transitions into its tail.
  std::vector<std::vector<int>> into(static_cast<std::size_t>(a.n_locations()));
  for (int t = 0; t < nt; ++t) into[static_cast<std::size_t>(a.transition(t).to)].push_back(t);

  while (!queue.empty()) {
    auto [dist, t_prime] = queue.top();
    queue.pop();
    if (dist > result.phi_sym[static_cast<std::size_t>(t_prime)]) continue;
    const auto& succ = a.transition(t_prime);
    if (succ.from == succ.to) continue;  // self-loops never count as progress
    for (int t : into[static_cast<std::size_t>(succ.from)]) {
      double w = hausdorff(guard_sets[static_cast<std::size_t>(t)],
                           guard_sets[static_cast<std::size_t>(t_prime)], m);
      if (w == kInfinity) continue;
      double cand = dist + w;
      if (cand < result.phi_sym[static_cast<std::size_t>(t)]) {
        result.phi_sym[static_cast<std::size_t>(t)] = cand;
        queue.emplace(cand, t);
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Automaton-level potential (Lavaei-style baseline)
// ---------------------------------------------------------------------------

/// Location potential built from eta alone:
///   phi_k(q) = 1 if eta(q) = 0, else kappa * (eta(q) - eta(q_init)) / (1 - eta_max)
/// with eta_max = 1 + max finite eta. Locations with infinite eta use
/// eta_max in place of eta to keep the potential finite.
struct LavaeiPotential {
  double kappa = 1.0;
  int eta_max = 0;
  std::vector<double> phi_k;
  double operator[](int q) const { return phi_k.at(static_cast<std::size_t>(q)); }
};

inline LavaeiPotential compute_lavaei(const SymbolicAutomaton& a, const ProgressLevels& eta,
                                      double kappa) {
  if (kappa <= 0.0) throw std::invalid_argument("kappa must be positive");
  LavaeiPotential lp;
  lp.kappa = kappa;
  double max_finite = 0.0;
  for (double e : eta.eta)
    if (e != kInfinity) max_finite = std::max(max_finite, e);
  lp.eta_max = static_cast<int>(max_finite) + 1;

  const double eta_init = eta[a.initial()] == kInfinity ? static_cast<double>(lp.eta_max)
                                                        : eta[a.initial()];
  lp.phi_k.resize(static_cast<std::size_t>(a.n_locations()));
  for (int q = 0; q < a.n_locations(); ++q) {
    double e = eta[q];
    if (e == 0.0) {
      lp.phi_k[static_cast<std::size_t>(q)] = 1.0;
    } else {
      if (e == kInfinity) e = static_cast<double>(lp.eta_max);
      lp.phi_k[static_cast<std::size_t>(q)] = kappa * (e - eta_init) / (1.0 - lp.eta_max);
    }
  }
  return lp;
}

// ---------------------------------------------------------------------------
// Automaton file format
// ---------------------------------------------------------------------------
//
//   # comment
//   vars: x 0 5, y 0 5
//   states: q0 q1 qF qR
//   init: q0
//   accepting: qF
//   q0 -> qF : (x >= 4) & (y >= 4)
//
// Declarations must precede transitions; every self-loop is written
// explicitly; duplicate transitions are rejected.

inline SymbolicAutomaton parse_automaton(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;

  std::optional<Domain> domain;
  std::vector<std::string> locations;
  std::optional<std::string> init_name;
  std::vector<std::string> accepting_names;
  std::vector<std::tuple<std::string, std::string, std::string>> transition_lines;

  int line_no = 0;
  auto fail = [&](const std::string& what) -> void {
    throw ParseError("automaton line " + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = util::trim(line);
    if (line.empty()) continue;

    if (line.rfind("vars:", 0) == 0) {
      if (domain) fail("duplicate vars declaration");
      std::vector<Variable> vars;
      for (const std::string& part : util::split(line.substr(5), ',')) {
        std::istringstream ps(part);
        std::string name;
        long long lo = 0, hi = 0;
        std::string lo_s, hi_s;
        if (!(ps >> name >> lo_s >> hi_s) || !util::parse_int(lo_s, lo) ||
            !util::parse_int(hi_s, hi))
          fail("expected 'name lo hi' in vars entry '" + part + "'");
        vars.push_back({name, static_cast<int>(lo), static_cast<int>(hi)});
      }
      try {
        domain = Domain(vars);
      } catch (const std::exception& e) {
        fail(e.what());
      }
      continue;
    }
    if (line.rfind("states:", 0) == 0) {
      if (!locations.empty()) fail("duplicate states declaration");
      std::istringstream ps{std::string(line.substr(7))};
      std::string name;
      while (ps >> name) {
        if (std::find(locations.begin(), locations.end(), name) != locations.end())
          fail("duplicate state '" + name + "'");
        locations.push_back(name);
      }
      if (locations.empty()) fail("empty states declaration");
      continue;
    }
    if (line.rfind("init:", 0) == 0) {
      if (init_name) fail("duplicate init declaration");
      std::string name{util::trim(line.substr(5))};
      if (name.empty()) fail("empty init declaration");
      init_name = name;
      continue;
    }
    if (line.rfind("accepting:", 0) == 0) {
      if (!accepting_names.empty()) fail("duplicate accepting declaration");
      std::istringstream ps{std::string(line.substr(10))};
      std::string name;
      while (ps >> name) accepting_names.push_back(name);
      if (accepting_names.empty()) fail("empty accepting declaration");
      continue;
    }

    auto arrow = line.find("->");
    auto colon = line.find(':');
    if (arrow == std::string_view::npos || colon == std::string_view::npos || colon < arrow)
      fail("expected 'from -> to : guard'");
    std::string from{util::trim(line.substr(0, arrow))};
    std::string to{util::trim(line.substr(arrow + 2, colon - arrow - 2))};
    std::string guard{util::trim(line.substr(colon + 1))};
    if (from.empty() || to.empty() || guard.empty()) fail("expected 'from -> to : guard'");
    transition_lines.emplace_back(from, to, guard);
  }

  if (!domain) throw ParseError("automaton: missing vars declaration");
  if (locations.empty()) throw ParseError("automaton: missing states declaration");
  if (!init_name) throw ParseError("automaton: missing init declaration");
  if (accepting_names.empty()) throw ParseError("automaton: missing accepting declaration");

  auto index_of = [&](const std::string& name) -> int {
    auto it = std::find(locations.begin(), locations.end(), name);
    if (it == locations.end())
      throw ParseError("automaton: undeclared state '" + name + "'");
    return static_cast<int>(it - locations.begin());
  };

  int initial = index_of(*init_name);
  std::vector<int> accepting;
  for (const auto& name : accepting_names) accepting.push_back(index_of(name));

  std::vector<SymbolicAutomaton::Transition> transitions;
  for (const auto& [from, to, guard] : transition_lines)
    transitions.push_back({index_of(from), index_of(to), parse_predicate(guard)});

  try {
    return SymbolicAutomaton(*domain, std::move(locations), initial, std::move(accepting),
                             std::move(transitions));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("automaton: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Builders for the standard task patterns
// ---------------------------------------------------------------------------

namespace detail {

/// Collects transitions while merging parallel edges by disjunction and
/// dropping edges whose guard is unsatisfiable over the domain.
class AutomatonBuilder {
 public:
  explicit AutomatonBuilder(Domain dom) : domain_(std::move(dom)) {}

  int add_location(const std::string& name) {
    locations_.push_back(name);
    return static_cast<int>(locations_.size()) - 1;
  }

  void add_edge(int from, int to, const Predicate& guard) {
    if (value_set(guard, domain_).empty()) return;
    for (auto& tr : transitions_) {
      if (tr.from == from && tr.to == to) {
        tr.guard = tr.guard | guard;
        return;
      }
    }
    transitions_.push_back({from, to, guard});
  }

  SymbolicAutomaton finish(int initial, std::vector<int> accepting) && {
    return SymbolicAutomaton(std::move(domain_), std::move(locations_), initial,
                             std::move(accepting), std::move(transitions_));
  }

  const Domain& domain() const { return domain_; }

 private:
  Domain domain_;
  std::vector<std::string> locations_;
  std::vector<SymbolicAutomaton::Transition> transitions_;
};

}  // namespace detail

/// Reach `goal` within `deadline` steps: a counter chain q0..q{deadline-1}
/// with the goal edge to the accepting sink from every counter state and a
/// reject sink once the deadline passes.
inline SymbolicAutomaton build_bounded_reach(const Predicate& goal, int deadline,
                                             const Domain& dom) {
  if (deadline < 1) throw std::invalid_argument("deadline must be at least 1");
  if (value_set(goal, dom).empty())
    throw std::invalid_argument("bounded reach: goal set is empty over the domain");

  detail::AutomatonBuilder b(dom);
  std::vector<int> counters;
  for (int i = 0; i < deadline; ++i) counters.push_back(b.add_location("q" + std::to_string(i)));
  int accept = b.add_location("qF");
  int reject = b.add_location("qR");

  for (int i = 0; i < deadline; ++i) {
    b.add_edge(counters[static_cast<std::size_t>(i)], accept, goal);
    int next = (i + 1 < deadline) ? counters[static_cast<std::size_t>(i) + 1] : reject;
    b.add_edge(counters[static_cast<std::size_t>(i)], next, !goal);
  }
  b.add_edge(accept, accept, Predicate::truth());
  b.add_edge(reject, reject, Predicate::truth());
  return std::move(b).finish(counters[0], {accept});
}

/// Visit the given regions in order; no deadline. Each stage self-loops
/// until its region is entered; the final stage is an absorbing accept.
inline SymbolicAutomaton build_sequential(const std::vector<Predicate>& goals, const Domain& dom) {
  if (goals.empty()) throw std::invalid_argument("sequential: needs at least one goal");
  for (const auto& g : goals)
    if (value_set(g, dom).empty())
      throw std::invalid_argument("sequential: a goal set is empty over the domain");

  detail::AutomatonBuilder b(dom);
  std::vector<int> stages;
  for (std::size_t i = 0; i < goals.size(); ++i)
    stages.push_back(b.add_location("q" + std::to_string(i)));
  int accept = b.add_location("qF");

  for (std::size_t i = 0; i < goals.size(); ++i) {
    int next = (i + 1 < goals.size()) ? stages[i + 1] : accept;
    b.add_edge(stages[i], next, goals[i]);
    b.add_edge(stages[i], stages[i], !goals[i]);
  }
  b.add_edge(accept, accept, Predicate::truth());
  return std::move(b).finish(stages[0], {accept});
}

/// Alternating-visit (patrol) semantics used by build_recurrence and by its
/// trace oracle:
///   - initially either region is awaited; after a visit to A the next
///     awaited region is B and vice versa; a step satisfying both resets to
///     "either";
///   - each awaited visit must happen within `gap` steps of the previous
///     one (and the first within `gap` steps of the start); the run is
///     rejected on the gap-th consecutive miss;
///   - the run is accepted when `span` steps elapse without a rejection.
/// Obligations whose window extends past the span are vacuously met.
inline bool recurrence_trace_accepted(const Predicate& region_a, const Predicate& region_b,
                                      int gap, int span, const Domain& dom,
                                      const std::vector<Valuation>& trace) {
  if (gap < 1 || span < gap) throw std::invalid_argument("recurrence: need 1 <= gap <= span");
  if (static_cast<int>(trace.size()) < span)
    throw std::invalid_argument("recurrence: trace shorter than the span");
  enum class Need { either, region_a, region_b };
  Need need = Need::either;
  int misses = 0;
  for (int t = 0; t < span; ++t) {
    const Valuation& v = trace[static_cast<std::size_t>(t)];
    bool hit_a = satisfies(v, region_a, dom);
    bool hit_b = satisfies(v, region_b, dom);
    bool useful = (need == Need::either) ? (hit_a || hit_b)
                                         : (need == Need::region_a ? hit_a : hit_b);
    if (useful) {
      misses = 0;
      if (hit_a && hit_b)
        need = Need::either;
      else if (hit_a)
        need = Need::region_b;
      else
        need = Need::region_a;
    } else {
      if (++misses >= gap) return false;
    }
  }
  return true;
}

/// Counter encoding of the alternating-visit semantics above. Locations are
/// reachable (awaited-region, misses, elapsed) triples plus absorbing accept
/// and reject sinks. Guards partition on membership in the two regions, so
/// the output always passes `validate`.
inline SymbolicAutomaton build_recurrence(const Predicate& region_a, const Predicate& region_b,
                                          int gap, int span, const Domain& dom) {
  if (gap < 1) throw std::invalid_argument("recurrence: gap must be at least 1");
  if (span < gap) throw std::invalid_argument("recurrence: span must be at least gap");
  if (value_set(region_a, dom).empty() || value_set(region_b, dom).empty())
    throw std::invalid_argument("recurrence: a region is empty over the domain");

  enum Phase { either = 0, need_a = 1, need_b = 2 };
  const char phase_letter[3] = {'E', 'A', 'B'};
  struct Key {
    int phase, misses, elapsed;
    bool operator<(const Key& o) const {
      return std::tie(phase, misses, elapsed) < std::tie(o.phase, o.misses, o.elapsed);
    }
  };

  detail::AutomatonBuilder b(dom);
  std::map<Key, int> ids;
  std::deque<Key> frontier;

  auto locate = [&](Key k) {
    auto it = ids.find(k);
    if (it != ids.end()) return it->second;
    std::ostringstream name;
    name << 'q' << phase_letter[k.phase] << '_' << k.misses << '_' << k.elapsed;
    int id = b.add_location(name.str());
    ids.emplace(k, id);
    frontier.push_back(k);
    return id;
  };

  Key start{either, 0, 0};
  int init = locate(start);
  int accept = b.add_location("qF");
  int reject = b.add_location("qR");

  // Guard minterms over (in A, in B); builder drops unsatisfiable ones.
  const Predicate minterms[4] = {(!region_a) & (!region_b), region_a & (!region_b),
                                 (!region_a) & region_b, region_a & region_b};

  while (!frontier.empty()) {
    Key k = frontier.front();
    frontier.pop_front();
    int from = ids.at(k);
    for (int mask = 0; mask < 4; ++mask) {
      bool hit_a = mask & 1;
      bool hit_b = mask & 2;
      bool useful = (k.phase == either) ? (hit_a || hit_b)
                                        : (k.phase == need_a ? hit_a : hit_b);
      int to;
      if (!useful && k.misses + 1 >= gap) {
        to = reject;
      } else if (k.elapsed + 1 >= span) {
        to = accept;
      } else if (useful) {
        int phase = (hit_a && hit_b) ? either : (hit_a ? need_b : need_a);
        to = locate(Key{phase, 0, k.elapsed + 1});
      } else {
        to = locate(Key{k.phase, k.misses + 1, k.elapsed + 1});
      }
      b.add_edge(from, to, minterms[mask]);
    }
  }
  b.add_edge(accept, accept, Predicate::truth());
  b.add_edge(reject, reject, Predicate::truth());
  return std::move(b).finish(init, {accept});
}

}  // namespace sash
