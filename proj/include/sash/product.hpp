#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "automaton.hpp"
#include "gridworld.hpp"
#include "predicate.hpp"

namespace sash {

/// Which valuation triggers automaton transitions on a product move s -> s':
/// `next` (default) feeds the arriving cell s', matching the automaton's run
/// semantics; `current` feeds the departed cell s.
enum class GuardSemantics { next, current };

enum class RewardStrategy { sparse, symbolic_shaped, lavaei_shaped };

inline std::string_view strategy_name(RewardStrategy s) {
  switch (s) {
    case RewardStrategy::sparse: return "sparse";
    case RewardStrategy::symbolic_shaped: return "symbolic_shaped";
    case RewardStrategy::lavaei_shaped: return "lavaei_shaped";
  }
  return "?";
}

inline RewardStrategy parse_strategy(std::string_view name) {
  if (name == "sparse") return RewardStrategy::sparse;
  if (name == "symbolic_shaped") return RewardStrategy::symbolic_shaped;
  if (name == "lavaei_shaped") return RewardStrategy::lavaei_shaped;
  throw ParseError("unknown reward strategy '" + std::string(name) + "'");
}

struct ProductState {
  Cell cell;
  int loc = 0;  // automaton location index
  bool operator==(const ProductState& o) const { return cell == o.cell && loc == o.loc; }
};

// ---------------------------------------------------------------------------
// Product MDP
// ---------------------------------------------------------------------------

/// Synchronous composition of a grid MDP with a symbolic automaton. The
/// state space is cells x locations; a state is accepting iff its automaton
/// location is. Environment dynamics and automaton steps are compiled into
/// lookup tables at construction, so stepping and exact sweeps are cheap.
class ProductMDP {
 public:
  ProductMDP(GridWorld env, SymbolicAutomaton spec,
             GuardSemantics semantics = GuardSemantics::next)
      : env_(std::move(env)), spec_(std::move(spec)), semantics_(semantics) {
    if (spec_.domain() != env_.domain())
      throw std::invalid_argument("automaton domain does not match the grid bounds");

    n_cells_ = env_.n_cells();
    n_locs_ = spec_.n_locations();

    // delta[q][cell]: successor location when the automaton reads `cell`.
    auto_step_.assign(static_cast<std::size_t>(n_locs_) * n_cells_, -1);
    for (int cell = 0; cell < n_cells_; ++cell) {
      Valuation v = valuation_of(env_.cell_at(static_cast<std::size_t>(cell)));
      for (int q = 0; q < n_locs_; ++q)
        auto_step_[static_cast<std::size_t>(q) * n_cells_ + cell] = step(spec_, q, v);
    }

    env_outcomes_.resize(static_cast<std::size_t>(n_cells_) * kNumActions);
    for (int cell = 0; cell < n_cells_; ++cell) {
      Cell c = env_.cell_at(static_cast<std::size_t>(cell));
      if (!env_.is_free(c)) continue;
      for (int a = 0; a < kNumActions; ++a) {
        auto dist = transition_dist(env_, c, static_cast<Action>(a));
        auto& out = env_outcomes_[static_cast<std::size_t>(cell) * kNumActions + a];
        for (const auto& e : dist.entries)
          out.push_back({static_cast<int>(env_.index(e.cell)), e.prob});
      }
    }
  }

  const GridWorld& env() const { return env_; }
  const SymbolicAutomaton& spec() const { return spec_; }
  GuardSemantics semantics() const { return semantics_; }

  int n_cells() const { return n_cells_; }
  int n_locations() const { return n_locs_; }
  int n_states() const { return n_cells_ * n_locs_; }

  int state_index(ProductState s) const {
    return static_cast<int>(env_.index(s.cell)) * n_locs_ + s.loc;
  }
  int state_index(int cell, int loc) const { return cell * n_locs_ + loc; }
  ProductState state_at(int index) const {
    return ProductState{env_.cell_at(static_cast<std::size_t>(index / n_locs_)),
                        index % n_locs_};
  }
  int cell_of(int state) const { return state / n_locs_; }
  int loc_of(int state) const { return state % n_locs_; }

  ProductState initial() const { return ProductState{env_.start(), spec_.initial()}; }
  int initial_index() const { return state_index(initial()); }

  bool is_accepting(int state) const { return spec_.is_accepting(loc_of(state)); }
  bool is_accepting(ProductState s) const { return spec_.is_accepting(s.loc); }

  /// Compiled automaton step on a cell index.
  int automaton_successor(int loc, int cell) const {
    return auto_step_[static_cast<std::size_t>(loc) * n_cells_ + cell];
  }

  struct Outcome {
    int cell;
    double prob;
  };
  const std::vector<Outcome>& outcomes(int cell, int action) const {
    return env_outcomes_[static_cast<std::size_t>(cell) * kNumActions + action];
  }

  /// Product successor state for a concrete environment move cell -> cell'.
  int successor(int state, int cell_to) const {
    int q = loc_of(state);
    int q_next = semantics_ == GuardSemantics::next ? automaton_successor(q, cell_to)
                                                    : automaton_successor(q, cell_of(state));
    return state_index(cell_to, q_next);
  }

 private:
  GridWorld env_;
  SymbolicAutomaton spec_;
  GuardSemantics semantics_;
  int n_cells_ = 0;
  int n_locs_ = 0;
  std::vector<int> auto_step_;
  std::vector<std::vector<Outcome>> env_outcomes_;
};

inline ProductMDP make_product(GridWorld env, SymbolicAutomaton spec,
                               GuardSemantics semantics = GuardSemantics::next) {
  return ProductMDP(std::move(env), std::move(spec), semantics);
}

/// Samples one product transition.
inline ProductState product_step(const ProductMDP& p, ProductState state, Action a,
                                 std::mt19937_64& rng) {
  int from = p.state_index(state);
  const auto& outs = p.outcomes(p.cell_of(from), static_cast<int>(a));
  if (outs.empty()) throw std::invalid_argument("product_step from an obstacle cell");
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int cell_to = outs.back().cell;
  for (const auto& o : outs) {
    acc += o.prob;
    if (u < acc) {
      cell_to = o.cell;
      break;
    }
  }
  return p.state_at(p.successor(from, cell_to));
}

// ---------------------------------------------------------------------------
// Rewards
// ---------------------------------------------------------------------------

/// Knobs shared by the reward strategies. `d_max` is the sparse acceptance
/// payoff; `phi_cap` bounds the symbolic potential (and is its value at dead
/// states); `kappa` scales the automaton-level baseline potential.
struct RewardConfig {
  double d_max = 1.0;
  Metric metric = Metric::manhattan;
  double phi_cap = 1.0;
  double kappa = 1.0;
};

/// d_max exactly on transitions entering the accepting set from outside it.
inline double sparse_reward(const ProductMDP& p, ProductState from, ProductState to,
                            const RewardConfig& cfg) {
  return (p.is_accepting(to) && !p.is_accepting(from)) ? cfg.d_max : 0.0;
}

/// Per-(cell, location) potential; zero on accepting states, phi_cap on
/// states with no accepting continuation, everything clamped to phi_cap.
struct PotentialTable {
  int n_locs = 0;
  double cap = 0.0;
  std::vector<double> phi;  // indexed like ProductMDP state indices

  double at_state(int state) const { return phi.at(static_cast<std::size_t>(state)); }
  double at(int cell, int loc) const {
    return phi.at(static_cast<std::size_t>(cell) * n_locs + loc);
  }
};

namespace detail {

/// Uncapped symbolic potential:
///   Phi(s,q) = 0 on accepting states, else
///   min over transitions (q,q') with eta(q) != eta(q') or s not|= guard of
///     vpd(s, guard) + phi_sym(q,q');
/// infinity when every candidate is filtered out or infinite.
inline std::vector<double> raw_potential(const ProductMDP& p, Metric metric) {
  const SymbolicAutomaton& a = p.spec();
  const ProgressLevels eta = compute_eta(a);
  const SubtaskProgress phi_sym = compute_phi_sym(a, metric);

  std::vector<ValueSet> guard_sets;
  guard_sets.reserve(static_cast<std::size_t>(a.n_transitions()));
  for (const auto& tr : a.transitions()) guard_sets.push_back(value_set(tr.guard, a.domain()));

  std::vector<double> phi(static_cast<std::size_t>(p.n_states()), kInfinity);
  for (int cell = 0; cell < p.n_cells(); ++cell) {
    Valuation v = valuation_of(p.env().cell_at(static_cast<std::size_t>(cell)));
    for (int q = 0; q < a.n_locations(); ++q) {
      double& slot = phi[static_cast<std::size_t>(p.state_index(cell, q))];
      if (a.is_accepting(q)) {
        slot = 0.0;
        continue;
      }
      for (int t : a.outgoing(q)) {
        const auto& tr = a.transition(t);
        bool progress = eta[tr.from] != eta[tr.to];
        if (!progress && satisfies(v, tr.guard, a.domain())) continue;
        double cand = vpd(v, guard_sets[static_cast<std::size_t>(t)], metric) + phi_sym[t];
        slot = std::min(slot, cand);
      }
    }
  }
  return phi;
}

}  // namespace detail

inline PotentialTable compute_potential(const ProductMDP& p, const RewardConfig& cfg) {
  PotentialTable table;
  table.n_locs = p.n_locations();
  table.cap = cfg.phi_cap;
  table.phi = detail::raw_potential(p, cfg.metric);
  for (double& x : table.phi) x = std::min(x, cfg.phi_cap);
  return table;
}

/// Default reward configuration for a product: d_max exceeds both the grid
/// diameter and the largest finite potential, so an accepting return always
/// dominates any shaping residue; phi_cap = d_max.
inline RewardConfig default_reward_config(const ProductMDP& p, Metric metric = Metric::manhattan,
                                          double kappa = 1.0) {
  RewardConfig cfg;
  cfg.metric = metric;
  cfg.kappa = kappa;

  Valuation lo, hi;
  for (const auto& var : p.env().domain().variables()) {
    lo.push_back(var.lo);
    hi.push_back(var.hi);
  }
  double diameter = distance(metric, lo, hi);

  double max_phi = 0.0;
  for (double x : detail::raw_potential(p, metric))
    if (x != kInfinity) max_phi = std::max(max_phi, x);

  cfg.d_max = std::max(diameter, max_phi) + 1.0;
  cfg.phi_cap = cfg.d_max;
  return cfg;
}

/// Potential-based shaping on top of the sparse reward:
///   R(from, to) + Phi(from) - Phi(to).
inline double shaped_reward(const ProductMDP& p, ProductState from, ProductState to,
                            const PotentialTable& table, const RewardConfig& cfg) {
  return sparse_reward(p, from, to, cfg) + table.at_state(p.state_index(from)) -
         table.at_state(p.state_index(to));
}

/// The automaton-level baseline reward: potential difference only, no base
/// term.
inline double lavaei_reward(int from_loc, int to_loc, const LavaeiPotential& lp) {
  return lp[to_loc] - lp[from_loc];
}

/// One reward strategy bound to its precomputed tables; callable on state
/// indices in the hot loops.
class RewardModel {
 public:
  static RewardModel make(const ProductMDP& p, RewardStrategy strategy, const RewardConfig& cfg) {
    RewardModel m;
    m.product_ = &p;
    m.strategy_ = strategy;
    m.cfg_ = cfg;
    switch (strategy) {
      case RewardStrategy::sparse: break;
      case RewardStrategy::symbolic_shaped:
        m.phi_state_ = compute_potential(p, cfg).phi;
        break;
      case RewardStrategy::lavaei_shaped: {
        LavaeiPotential lp = compute_lavaei(p.spec(), compute_eta(p.spec()), cfg.kappa);
        m.phi_loc_ = lp.phi_k;
        break;
      }
    }
    return m;
  }

  RewardStrategy strategy() const { return strategy_; }
  const RewardConfig& config() const { return cfg_; }

  double operator()(int from, int to) const {
    switch (strategy_) {
      case RewardStrategy::sparse: return base(from, to);
      case RewardStrategy::symbolic_shaped:
        return base(from, to) + phi_state_[static_cast<std::size_t>(from)] -
               phi_state_[static_cast<std::size_t>(to)];
      case RewardStrategy::lavaei_shaped:
        return phi_loc_[static_cast<std::size_t>(product_->loc_of(to))] -
               phi_loc_[static_cast<std::size_t>(product_->loc_of(from))];
    }
    return 0.0;
  }

 private:
  double base(int from, int to) const {
    return (product_->is_accepting(to) && !product_->is_accepting(from)) ? cfg_.d_max : 0.0;
  }

  const ProductMDP* product_ = nullptr;
  RewardStrategy strategy_ = RewardStrategy::sparse;
  RewardConfig cfg_;
  std::vector<double> phi_state_;
  std::vector<double> phi_loc_;
};

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

/// Tabular policy over product states: stationary (deterministic or
/// stochastic) or deterministic time-indexed (from finite-horizon DP).
/// Episode time t is 1-based.
class Policy {
 public:
  static Policy stationary(std::vector<std::uint8_t> actions) {
    Policy p;
    p.data_ = std::move(actions);
    return p;
  }

  /// plan[t-1][state] for t = 1..N.
  static Policy time_indexed(std::vector<std::vector<std::uint8_t>> plan) {
    Policy p;
    p.data_ = std::move(plan);
    return p;
  }

  static Policy stochastic(std::vector<std::array<double, kNumActions>> probs) {
    Policy p;
    p.data_ = std::move(probs);
    return p;
  }

  static Policy uniform_random(int n_states) {
    std::array<double, kNumActions> u{};
    u.fill(1.0 / kNumActions);
    return stochastic(std::vector<std::array<double, kNumActions>>(
        static_cast<std::size_t>(n_states), u));
  }

  void probabilities(int t, int state, std::array<double, kNumActions>& out) const {
    if (const auto* st = std::get_if<std::vector<std::uint8_t>>(&data_)) {
      out.fill(0.0);
      out[(*st)[static_cast<std::size_t>(state)]] = 1.0;
    } else if (const auto* plan = std::get_if<std::vector<std::vector<std::uint8_t>>>(&data_)) {
      out.fill(0.0);
      std::size_t step = std::min<std::size_t>(static_cast<std::size_t>(t) - 1, plan->size() - 1);
      out[(*plan)[step][static_cast<std::size_t>(state)]] = 1.0;
    } else {
      out = std::get<std::vector<std::array<double, kNumActions>>>(data_)
          [static_cast<std::size_t>(state)];
    }
  }

  int sample(int t, int state, std::mt19937_64& rng) const {
    if (const auto* st = std::get_if<std::vector<std::uint8_t>>(&data_))
      return (*st)[static_cast<std::size_t>(state)];
    if (const auto* plan = std::get_if<std::vector<std::vector<std::uint8_t>>>(&data_)) {
      std::size_t step = std::min<std::size_t>(static_cast<std::size_t>(t) - 1, plan->size() - 1);
      return (*plan)[step][static_cast<std::size_t>(state)];
    }
    std::array<double, kNumActions> probs{};
    probabilities(t, state, probs);
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (int a = 0; a < kNumActions; ++a) {
      acc += probs[static_cast<std::size_t>(a)];
      if (u < acc) return a;
    }
    return kNumActions - 1;
  }

 private:
  std::variant<std::vector<std::uint8_t>, std::vector<std::vector<std::uint8_t>>,
               std::vector<std::array<double, kNumActions>>>
      data_;
};

// ---------------------------------------------------------------------------
// Exact finite-horizon dynamic programming
// ---------------------------------------------------------------------------

/// Backward-induction result. value[r][x] is the optimal expected total
/// reward over the next r transitions from state x; action[r][x] is the
/// corresponding greedy action (ties to the lowest action index).
struct DpResult {
  int horizon = 0;
  std::vector<std::vector<double>> value;          // r = 0..horizon
  std::vector<std::vector<std::uint8_t>> action;   // r = 1..horizon (index 0 unused)

  double initial_value(const ProductMDP& p) const {
    return value.back()[static_cast<std::size_t>(p.initial_index())];
  }

  /// Deterministic time-indexed policy: at episode time t, N-t+1 steps remain.
  Policy to_policy() const {
    std::vector<std::vector<std::uint8_t>> plan;
    plan.reserve(static_cast<std::size_t>(horizon));
    for (int t = 1; t <= horizon; ++t)
      plan.push_back(action[static_cast<std::size_t>(horizon - t + 1)]);
    return Policy::time_indexed(std::move(plan));
  }
};

/// Exact finite-horizon optimal values and greedy policy for a reward model.
inline DpResult value_iteration(const ProductMDP& p, const RewardModel& reward, int horizon) {
  const int ns = p.n_states();
  DpResult dp;
  dp.horizon = horizon;
  dp.value.assign(static_cast<std::size_t>(horizon) + 1,
                  std::vector<double>(static_cast<std::size_t>(ns), 0.0));
  dp.action.assign(static_cast<std::size_t>(horizon) + 1,
                   std::vector<std::uint8_t>(static_cast<std::size_t>(ns), 0));

  for (int r = 1; r <= horizon; ++r) {
    const auto& next = dp.value[static_cast<std::size_t>(r) - 1];
    auto& cur = dp.value[static_cast<std::size_t>(r)];
    auto& act = dp.action[static_cast<std::size_t>(r)];
    for (int cell = 0; cell < p.n_cells(); ++cell) {
      if (!p.env().is_free(p.env().cell_at(static_cast<std::size_t>(cell)))) continue;
      for (int q = 0; q < p.n_locations(); ++q) {
        int x = p.state_index(cell, q);
        double best = -kInfinity;
        int best_a = 0;
        for (int a = 0; a < kNumActions; ++a) {
          double ev = 0.0;
          for (const auto& o : p.outcomes(cell, a)) {
            int x2 = p.successor(x, o.cell);
            ev += o.prob * (reward(x, x2) + next[static_cast<std::size_t>(x2)]);
          }
          if (ev > best) {
            best = ev;
            best_a = a;
          }
        }
        cur[static_cast<std::size_t>(x)] = best;
        act[static_cast<std::size_t>(x)] = static_cast<std::uint8_t>(best_a);
      }
    }
  }
  return dp;
}

inline DpResult value_iteration(const ProductMDP& p, RewardStrategy strategy,
                                const RewardConfig& cfg, int horizon) {
  return value_iteration(p, RewardModel::make(p, strategy, cfg), horizon);
}

/// Exact probability that an episode of N steps under the policy ends in the
/// accepting set, by forward propagation of the state distribution.
inline double acceptance_probability_exact(const ProductMDP& p, const Policy& policy, int horizon) {
  const int ns = p.n_states();
  std::vector<double> dist(static_cast<std::size_t>(ns), 0.0);
  dist[static_cast<std::size_t>(p.initial_index())] = 1.0;

  std::array<double, kNumActions> probs{};
  for (int t = 1; t <= horizon; ++t) {
    std::vector<double> next(static_cast<std::size_t>(ns), 0.0);
    for (int x = 0; x < ns; ++x) {
      double mass = dist[static_cast<std::size_t>(x)];
      if (mass == 0.0) continue;
      policy.probabilities(t, x, probs);
      int cell = p.cell_of(x);
      for (int a = 0; a < kNumActions; ++a) {
        double pa = probs[static_cast<std::size_t>(a)];
        if (pa == 0.0) continue;
        for (const auto& o : p.outcomes(cell, a))
          next[static_cast<std::size_t>(p.successor(x, o.cell))] += mass * pa * o.prob;
      }
    }
    dist.swap(next);
  }

  double acc = 0.0;
  for (int x = 0; x < ns; ++x)
    if (p.is_accepting(x)) acc += dist[static_cast<std::size_t>(x)];
  return acc;
}

/// Exact expected total reward of a fixed policy from the initial state over
/// N transitions (backward policy evaluation).
inline double policy_value_exact(const ProductMDP& p, const Policy& policy,
                                 const RewardModel& reward, int horizon) {
  const int ns = p.n_states();
  std::vector<double> value(static_cast<std::size_t>(ns), 0.0);

  std::array<double, kNumActions> probs{};
  for (int t = horizon; t >= 1; --t) {
    std::vector<double> cur(static_cast<std::size_t>(ns), 0.0);
    for (int cell = 0; cell < p.n_cells(); ++cell) {
      if (!p.env().is_free(p.env().cell_at(static_cast<std::size_t>(cell)))) continue;
      for (int q = 0; q < p.n_locations(); ++q) {
        int x = p.state_index(cell, q);
        policy.probabilities(t, x, probs);
        double ev = 0.0;
        for (int a = 0; a < kNumActions; ++a) {
          double pa = probs[static_cast<std::size_t>(a)];
          if (pa == 0.0) continue;
          for (const auto& o : p.outcomes(cell, a)) {
            int x2 = p.successor(x, o.cell);
            ev += pa * o.prob * (reward(x, x2) + value[static_cast<std::size_t>(x2)]);
          }
        }
        cur[static_cast<std::size_t>(x)] = ev;
      }
    }
    value.swap(cur);
  }
  return value[static_cast<std::size_t>(p.initial_index())];
}

/// Reward-free DP for the maximum acceptance probability p*. Independent of
/// the reward machinery; used as the oracle side of the optimality checks.
inline double max_acceptance_probability(const ProductMDP& p, int horizon) {
  const int ns = p.n_states();
  std::vector<double> w(static_cast<std::size_t>(ns), 0.0);
  for (int x = 0; x < ns; ++x)
    if (p.is_accepting(x)) w[static_cast<std::size_t>(x)] = 1.0;

  for (int r = 1; r <= horizon; ++r) {
    std::vector<double> cur(static_cast<std::size_t>(ns), 0.0);
    for (int cell = 0; cell < p.n_cells(); ++cell) {
      if (!p.env().is_free(p.env().cell_at(static_cast<std::size_t>(cell)))) continue;
      for (int q = 0; q < p.n_locations(); ++q) {
        int x = p.state_index(cell, q);
        if (p.is_accepting(x)) {
          cur[static_cast<std::size_t>(x)] = 1.0;  // terminally accepting: stays accepted
          continue;
        }
        double best = 0.0;
        for (int a = 0; a < kNumActions; ++a) {
          double ev = 0.0;
          for (const auto& o : p.outcomes(cell, a))
            ev += o.prob * w[static_cast<std::size_t>(p.successor(x, o.cell))];
          best = std::max(best, ev);
        }
        cur[static_cast<std::size_t>(x)] = best;
      }
    }
    w.swap(cur);
  }
  return w[static_cast<std::size_t>(p.initial_index())];
}

}  // namespace sash
