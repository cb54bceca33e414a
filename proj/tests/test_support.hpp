#pragma once

// Shared test utilities: independent brute-force oracles and generators.
// Everything here must stay independent of the library code paths it is
// used to check.

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sash/automaton.hpp"
#include "sash/predicate.hpp"
#include "sash/product.hpp"

namespace test {

inline std::string fixture_path(const std::string& name) {
  return std::string(SASH_FIXTURES_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline sash::SymbolicAutomaton load_fixture_automaton(const std::string& name) {
  return sash::parse_automaton(read_file(fixture_path(name)));
}

// --------------------------------------------------------------------------
// Brute-force distance oracles (plain double loops over the enumerated box)
// --------------------------------------------------------------------------

inline double oracle_metric(sash::Metric m, const sash::Valuation& a, const sash::Valuation& b) {
  double manhattan = 0.0, sq = 0.0, cheb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = std::abs(double(a[i]) - double(b[i]));
    manhattan += d;
    sq += d * d;
    cheb = std::max(cheb, d);
  }
  switch (m) {
    case sash::Metric::manhattan: return manhattan;
    case sash::Metric::euclidean: return std::sqrt(sq);
    case sash::Metric::chebyshev: return cheb;
  }
  return 0.0;
}

inline double oracle_vpd(const sash::Valuation& v, const sash::Predicate& psi,
                         const sash::Domain& dom, sash::Metric m) {
  double best = sash::kInfinity;
  for (const auto& w : dom.enumerate())
    if (sash::satisfies(w, psi, dom)) best = std::min(best, oracle_metric(m, v, w));
  return best;
}

inline double oracle_hausdorff(const sash::Predicate& p1, const sash::Predicate& p2,
                               const sash::Domain& dom, sash::Metric m) {
  std::vector<sash::Valuation> s1, s2;
  for (const auto& v : dom.enumerate()) {
    if (sash::satisfies(v, p1, dom)) s1.push_back(v);
    if (sash::satisfies(v, p2, dom)) s2.push_back(v);
  }
  if (s1.empty() || s2.empty()) return sash::kInfinity;
  double worst = 0.0;
  for (const auto& a : s1) {
    double best = sash::kInfinity;
    for (const auto& b : s2) best = std::min(best, oracle_metric(m, a, b));
    worst = std::max(worst, best);
  }
  for (const auto& b : s2) {
    double best = sash::kInfinity;
    for (const auto& a : s1) best = std::min(best, oracle_metric(m, a, b));
    worst = std::max(worst, best);
  }
  return worst;
}

// --------------------------------------------------------------------------
// Random predicate generator
// --------------------------------------------------------------------------

inline sash::Predicate random_predicate(std::mt19937_64& rng, const sash::Domain& dom,
                                        int depth) {
  std::uniform_int_distribution<int> pick(0, 99);
  if (depth <= 0 || pick(rng) < 40) {
    int roll = pick(rng);
    if (roll < 10) return sash::Predicate::truth();
    if (roll < 20) return sash::Predicate::falsity();
    const auto& vars = dom.variables();
    const auto& var = vars[std::uniform_int_distribution<std::size_t>(0, vars.size() - 1)(rng)];
    auto cmp = static_cast<sash::Cmp>(std::uniform_int_distribution<int>(0, 4)(rng));
    int bound = std::uniform_int_distribution<int>(var.lo - 1, var.hi + 1)(rng);
    return sash::Predicate::atom(var.name, cmp, bound);
  }
  int roll = pick(rng);
  if (roll < 34) return !random_predicate(rng, dom, depth - 1);
  if (roll < 67)
    return random_predicate(rng, dom, depth - 1) & random_predicate(rng, dom, depth - 1);
  return random_predicate(rng, dom, depth - 1) | random_predicate(rng, dom, depth - 1);
}

// --------------------------------------------------------------------------
// Automaton-level oracles
// --------------------------------------------------------------------------

/// Shortest simple path to the accepting set by exhaustive DFS over simple
/// paths; usable on automata with few locations.
inline double oracle_eta_simple_paths(const sash::SymbolicAutomaton& a, int from) {
  if (a.is_accepting(from)) return 0.0;
  double best = sash::kInfinity;
  std::vector<bool> visited(static_cast<std::size_t>(a.n_locations()), false);
  auto dfs = [&](auto&& self, int q, int length) -> void {
    if (a.is_accepting(q)) {
      best = std::min(best, double(length));
      return;
    }
    visited[static_cast<std::size_t>(q)] = true;
    for (int t : a.outgoing(q)) {
      int to = a.transition(t).to;
      if (to != q && !visited[static_cast<std::size_t>(to)]) self(self, to, length + 1);
    }
    visited[static_cast<std::size_t>(q)] = false;
  };
  dfs(dfs, from, 0);
  return best;
}

/// Least fixed point of the subtask-progress recursion by repeated Bellman
/// relaxation until no update changes anything. Independent of the Dijkstra
/// route used by the library.
inline std::vector<double> oracle_phi_sym_bellman(const sash::SymbolicAutomaton& a,
                                                  sash::Metric m) {
  const int nt = a.n_transitions();
  std::vector<sash::ValueSet> sets;
  for (const auto& tr : a.transitions()) sets.push_back(sash::value_set(tr.guard, a.domain()));

  std::vector<double> phi(static_cast<std::size_t>(nt), sash::kInfinity);
  for (int t = 0; t < nt; ++t)
    if (a.is_accepting(a.transition(t).to)) phi[static_cast<std::size_t>(t)] = 0.0;

  bool changed = true;
  while (changed) {
    changed = false;
    for (int t = 0; t < nt; ++t) {
      if (a.is_accepting(a.transition(t).to)) continue;
      int mid = a.transition(t).to;
      double best = sash::kInfinity;
      for (int t2 : a.outgoing(mid)) {
        const auto& succ = a.transition(t2);
        if (succ.to == succ.from) continue;
        double w = sash::hausdorff(sets[static_cast<std::size_t>(t)],
                                   sets[static_cast<std::size_t>(t2)], m);
        best = std::min(best, w + phi[static_cast<std::size_t>(t2)]);
      }
      if (best < phi[static_cast<std::size_t>(t)] - 1e-12) {
        phi[static_cast<std::size_t>(t)] = best;
        changed = true;
      }
    }
  }
  return phi;
}

/// Plain memoized recursion; terminates only on automata whose non-self-loop
/// transition graph is acyclic (all shipped chain/stage fixtures qualify).
inline double oracle_phi_sym_recursive(const sash::SymbolicAutomaton& a, sash::Metric m, int t,
                                       std::vector<double>& memo) {
  double& slot = memo[static_cast<std::size_t>(t)];
  if (slot == slot) return slot;  // already computed (NaN marks "unknown")
  const auto& tr = a.transition(t);
  if (a.is_accepting(tr.to)) return slot = 0.0;
  double best = sash::kInfinity;
  for (int t2 : a.outgoing(tr.to)) {
    const auto& succ = a.transition(t2);
    if (succ.from == succ.to) continue;
    double w = sash::hausdorff(tr.guard, succ.guard, a.domain(), m);
    best = std::min(best, w + oracle_phi_sym_recursive(a, m, t2, memo));
  }
  return slot = best;
}

/// Fewest product transitions (any action, any positive-probability outcome)
/// from the initial state to the accepting set; -1 when unreachable. The
/// optional filter restricts usable automaton moves (loc_from, loc_to).
inline int oracle_bfs_steps_to_acceptance(
    const sash::ProductMDP& p,
    const std::function<bool(int, int)>& allow_edge = nullptr) {
  std::vector<int> dist(static_cast<std::size_t>(p.n_states()), -1);
  std::deque<int> frontier;
  dist[static_cast<std::size_t>(p.initial_index())] = 0;
  frontier.push_back(p.initial_index());
  while (!frontier.empty()) {
    int x = frontier.front();
    frontier.pop_front();
    if (p.is_accepting(x)) return dist[static_cast<std::size_t>(x)];
    for (int a = 0; a < sash::kNumActions; ++a) {
      for (const auto& o : p.outcomes(p.cell_of(x), a)) {
        int x2 = p.successor(x, o.cell);
        if (allow_edge && !allow_edge(p.loc_of(x), p.loc_of(x2))) continue;
        if (dist[static_cast<std::size_t>(x2)] < 0) {
          dist[static_cast<std::size_t>(x2)] = dist[static_cast<std::size_t>(x)] + 1;
          frontier.push_back(x2);
        }
      }
    }
  }
  return -1;
}

/// Alternating-visit recurrence semantics, restated from scratch: track the
/// last useful-visit position and the awaited region; reject when a window
/// of `gap` steps closes unmet.
inline bool oracle_recurrence_trace(const sash::Predicate& region_a,
                                    const sash::Predicate& region_b, int gap, int span,
                                    const sash::Domain& dom,
                                    const std::vector<sash::Valuation>& trace) {
  enum { either, want_a, want_b } need = either;
  int last_reset = 0;
  for (int t = 1; t <= span; ++t) {
    const auto& v = trace[static_cast<std::size_t>(t - 1)];
    bool in_a = sash::satisfies(v, region_a, dom);
    bool in_b = sash::satisfies(v, region_b, dom);
    bool useful = need == either ? (in_a || in_b) : (need == want_a ? in_a : in_b);
    if (useful) {
      last_reset = t;
      need = (in_a && in_b) ? either : (in_a ? want_b : want_a);
    } else if (t - last_reset >= gap) {
      return false;
    }
  }
  return true;
}

// --------------------------------------------------------------------------
// Exact binomial (Clopper-Pearson) interval by direct CDF summation
// --------------------------------------------------------------------------

inline double binomial_cdf(int k, int n, double p) {
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return k >= n ? 1.0 : 0.0;
  double cdf = 0.0;
  for (int i = 0; i <= k; ++i) {
    double log_pmf = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                     i * std::log(p) + (n - i) * std::log1p(-p);
    cdf += std::exp(log_pmf);
  }
  return std::min(cdf, 1.0);
}

inline std::pair<double, double> oracle_clopper_pearson(int k, int n, double level) {
  const double alpha = 1.0 - level;
  auto bisect = [](auto&& f, double lo, double hi) {
    for (int i = 0; i < 200; ++i) {
      double mid = 0.5 * (lo + hi);
      if (f(mid)) lo = mid;
      else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  double lo = 0.0, hi = 1.0;
  if (k > 0) {
    // Largest p with P(X >= k; p) <= alpha/2.
    lo = bisect([&](double p) { return 1.0 - binomial_cdf(k - 1, n, p) <= alpha / 2.0; }, 0.0,
                1.0);
  }
  if (k < n) {
    // Smallest p with P(X <= k; p) <= alpha/2.
    hi = bisect([&](double p) { return binomial_cdf(k, n, p) > alpha / 2.0; }, 0.0, 1.0);
  }
  return {lo, hi};
}

}  // namespace test
