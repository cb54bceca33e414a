#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>

#include "sash/learner.hpp"
#include "sash/product.hpp"
#include "test_support.hpp"

using namespace sash;

namespace {

GridWorld reach_env() { return load_map(test::read_file(test::fixture_path("reach.map"))); }

ProductMDP reach4_product(GuardSemantics sem = GuardSemantics::next) {
  return ProductMDP(reach_env(), test::load_fixture_automaton("bounded_reach4.aut"), sem);
}

ProductMDP small_recurrence_product() {
  GridWorld env = load_map(test::read_file(test::fixture_path("recurrence.map")));
  SymbolicAutomaton spec =
      build_recurrence(parse_predicate("(x == 2) & (y == 2)"),
                       parse_predicate("(x == 1) & (y == 3)"), 3, 6, env.domain());
  return ProductMDP(env, std::move(spec));
}

Policy random_stochastic_policy(const ProductMDP& p, std::mt19937_64& rng) {
  std::vector<std::array<double, kNumActions>> probs(static_cast<std::size_t>(p.n_states()));
  for (auto& row : probs) {
    double total = 0.0;
    for (double& x : row) total += x = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    for (double& x : row) x /= total;
  }
  return Policy::stochastic(std::move(probs));
}

}  // namespace

TEST_CASE("make_product composes the state space") {
  ProductMDP p = reach4_product();
  CHECK(p.n_states() == 216);  // 36 cells x 6 locations
  CHECK(p.initial().cell == Cell{0, 0});
  CHECK(p.initial().loc == p.spec().initial());
  CHECK_FALSE(p.is_accepting(p.initial()));
}

TEST_CASE("make_product rejects a domain mismatch") {
  GridWorld env(4, 4, Cell{0, 0}, {}, 0.1);
  CHECK_THROWS_AS(ProductMDP(env, test::load_fixture_automaton("bounded_reach4.aut")),
                  std::invalid_argument);
}

TEST_CASE("guard semantics: next reads the arriving cell, current the departed one") {
  ProductMDP next = reach4_product(GuardSemantics::next);
  ProductMDP current = reach4_product(GuardSemantics::current);

  int q0 = next.spec().location_index("q0");
  int qF = next.spec().location_index("qF");
  int q1 = next.spec().location_index("q1");

  int from = next.state_index(ProductState{Cell{3, 4}, q0});
  int land = static_cast<int>(next.env().index(Cell{4, 4}));

  CHECK(next.loc_of(next.successor(from, land)) == qF);
  CHECK(current.loc_of(current.successor(from, land)) == q1);

  // Under current semantics the goal cell fires on the step that leaves it.
  int on_goal = current.state_index(ProductState{Cell{4, 4}, q0});
  int off = static_cast<int>(current.env().index(Cell{3, 3}));
  CHECK(current.loc_of(current.successor(on_goal, off)) == qF);
}

TEST_CASE("product transition probabilities sum to one") {
  ProductMDP p = reach4_product();
  for (int cell = 0; cell < p.n_cells(); ++cell) {
    for (int a = 0; a < kNumActions; ++a) {
      double total = 0.0;
      for (const auto& o : p.outcomes(cell, a)) total += o.prob;
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("product_step absorbs in the accepting component and reproduces under a seed") {
  ProductMDP p = reach4_product();
  int qF = p.spec().location_index("qF");

  std::mt19937_64 rng(3);
  ProductState s{Cell{4, 4}, qF};
  for (int i = 0; i < 50; ++i) {
    s = product_step(p, s, static_cast<Action>(i % kNumActions), rng);
    CHECK(s.loc == qF);
  }

  std::mt19937_64 r1(99), r2(99);
  ProductState a = p.initial(), b = p.initial();
  for (int i = 0; i < 100; ++i) {
    Action act = static_cast<Action>(i % kNumActions);
    a = product_step(p, a, act, r1);
    b = product_step(p, b, act, r2);
    CHECK(a == b);
  }
}

TEST_CASE("product_step cell marginal matches transition_dist") {
  ProductMDP p = reach4_product();
  const int n = 100000;
  std::mt19937_64 rng(2024);
  std::map<std::pair<int, int>, int> counts;
  ProductState from{Cell{2, 2}, p.spec().initial()};
  for (int i = 0; i < n; ++i) {
    ProductState to = product_step(p, from, Action::north_east, rng);
    ++counts[{to.cell.x, to.cell.y}];
  }
  for (const auto& e : transition_dist(p.env(), Cell{2, 2}, Action::north_east).entries) {
    double sigma = std::sqrt(n * e.prob * (1.0 - e.prob));
    CHECK(std::abs(counts[{e.cell.x, e.cell.y}] - n * e.prob) <= 3.0 * sigma);
  }
}

TEST_CASE("sparse reward fires exactly on entry into the accepting set") {
  ProductMDP p = reach4_product();
  RewardConfig cfg = default_reward_config(p);
  int q0 = p.spec().location_index("q0");
  int qF = p.spec().location_index("qF");

  ProductState outside{Cell{3, 3}, q0};
  ProductState inside{Cell{4, 4}, qF};
  ProductState inside2{Cell{4, 5}, qF};

  CHECK(sparse_reward(p, outside, inside, cfg) == cfg.d_max);
  CHECK(sparse_reward(p, inside, inside2, cfg) == 0.0);
  CHECK(sparse_reward(p, outside, outside, cfg) == 0.0);
}

TEST_CASE("potential is zero on accepting states and capped at dead states") {
  ProductMDP p = reach4_product();
  RewardConfig cfg = default_reward_config(p);
  PotentialTable table = compute_potential(p, cfg);

  int qF = p.spec().location_index("qF");
  int qR = p.spec().location_index("qR");
  for (int cell = 0; cell < p.n_cells(); ++cell) {
    CHECK(table.at(cell, qF) == 0.0);
    CHECK(table.at(cell, qR) == cfg.phi_cap);  // no accepting continuation
  }
  for (double v : table.phi) {
    CHECK(v >= 0.0);
    CHECK(v <= cfg.phi_cap);
  }
}

TEST_CASE("potential at the last sequential stage is the distance to the final region") {
  GridWorld env = load_map(test::read_file(test::fixture_path("sequential.map")));
  ProductMDP p(env, test::load_fixture_automaton("sequential.aut"));
  RewardConfig cfg = default_reward_config(p);
  PotentialTable table = compute_potential(p, cfg);

  Predicate region_c = parse_predicate("(x <= 3) & (y >= 22)");
  int q2 = p.spec().location_index("q2");
  for (int cell = 0; cell < p.n_cells(); ++cell) {
    Valuation v = valuation_of(env.cell_at(static_cast<std::size_t>(cell)));
    double expected = test::oracle_vpd(v, region_c, env.domain(), Metric::manhattan);
    CHECK(table.at(cell, q2) == std::min(expected, cfg.phi_cap));
  }
}

TEST_CASE("default reward config dominates diameter and potential range") {
  GridWorld env = load_map(test::read_file(test::fixture_path("sequential.map")));
  ProductMDP p(env, test::load_fixture_automaton("sequential.aut"));
  RewardConfig cfg = default_reward_config(p);

  // Grid diameter 48; largest finite potential 44 + 22 + 43 = 109 at
  // ((0,0), q0). The default adds one on top of the larger of the two.
  CHECK(cfg.d_max == 110.0);
  CHECK(cfg.phi_cap == cfg.d_max);

  PotentialTable table = compute_potential(p, cfg);
  int q0 = p.spec().location_index("q0");
  CHECK(table.at(static_cast<int>(env.index(Cell{0, 0})), q0) == 109.0);
}

TEST_CASE("shaped reward adds the potential difference") {
  ProductMDP p = reach4_product();
  RewardConfig cfg = default_reward_config(p);
  PotentialTable table = compute_potential(p, cfg);

  int q0 = p.spec().location_index("q0");
  int q1 = p.spec().location_index("q1");
  int qF = p.spec().location_index("qF");

  ProductState from{Cell{3, 4}, q0};  // one step from the goal region
  ProductState to{Cell{4, 4}, qF};
  CHECK(table.at_state(p.state_index(from)) == 1.0);
  CHECK(shaped_reward(p, from, to, table, cfg) == cfg.d_max + 1.0);

  // Equal potentials telescope away.
  CHECK(shaped_reward(p, from, from, table, cfg) == 0.0);

  // Moving away from the goal costs the potential increase.
  ProductState back{Cell{2, 4}, q1};
  double delta = table.at_state(p.state_index(back)) - table.at_state(p.state_index(from));
  CHECK(delta > 0.0);
  CHECK(shaped_reward(p, from, back, table, cfg) == -delta);
}

TEST_CASE("lavaei reward on the bounded-reach automaton") {
  SymbolicAutomaton a = test::load_fixture_automaton("bounded_reach4.aut");
  LavaeiPotential lp = compute_lavaei(a, compute_eta(a), 1.0);

  // Counter-to-counter transitions yield exactly zero.
  for (const char* from : {"q0", "q1", "q2"}) {
    int f = a.location_index(from);
    for (const char* to : {"q1", "q2", "q3"})
      CHECK(lavaei_reward(f, a.location_index(to), lp) == 0.0);
  }
  CHECK(lavaei_reward(a.location_index("q3"), a.location_index("qF"), lp) == 1.0);
  CHECK(lavaei_reward(a.location_index("qF"), a.location_index("qF"), lp) == 0.0);
}

TEST_CASE("value iteration with an empty horizon is identically zero") {
  ProductMDP p = reach4_product();
  RewardConfig cfg = default_reward_config(p);
  DpResult dp = value_iteration(p, RewardStrategy::sparse, cfg, 0);
  CHECK(dp.initial_value(p) == 0.0);
  for (double v : dp.value[0]) CHECK(v == 0.0);
}

TEST_CASE("sparse DP value equals d_max times the optimal acceptance probability") {
  ProductMDP p = reach4_product();
  RewardConfig cfg = default_reward_config(p);
  const int horizon = 4;

  DpResult dp = value_iteration(p, RewardStrategy::sparse, cfg, horizon);
  double p_star = max_acceptance_probability(p, horizon);
  CHECK(p_star > 0.0);
  CHECK(dp.initial_value(p) == Catch::Approx(cfg.d_max * p_star).margin(1e-9));

  // The DP-greedy policy attains p_star exactly.
  double attained = acceptance_probability_exact(p, dp.to_policy(), horizon);
  CHECK(std::abs(attained - p_star) < 1e-9);
}

TEST_CASE("policy invariance: shaped DP optimum matches the sparse optimum") {
  std::vector<ProductMDP> products;
  products.push_back(reach4_product());
  products.push_back(small_recurrence_product());
  std::vector<int> horizons = {4, 6};

  for (std::size_t i = 0; i < products.size(); ++i) {
    const ProductMDP& p = products[i];
    int horizon = horizons[i];
    RewardConfig cfg = default_reward_config(p);

    double p_star = max_acceptance_probability(p, horizon);
    DpResult shaped = value_iteration(p, RewardStrategy::symbolic_shaped, cfg, horizon);
    double attained = acceptance_probability_exact(p, shaped.to_policy(), horizon);
    CHECK(std::abs(attained - p_star) < 1e-9);
  }
}

TEST_CASE("acceptance probability is one when the initial state accepts") {
  GridWorld env(2, 2, Cell{0, 0}, {}, 0.1);
  SymbolicAutomaton a = parse_automaton(
      "vars: x 0 1, y 0 1\n"
      "states: qF\n"
      "init: qF\n"
      "accepting: qF\n"
      "qF -> qF : true\n");
  ProductMDP p(env, std::move(a));
  CHECK(acceptance_probability_exact(p, Policy::uniform_random(p.n_states()), 5) ==
        Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("exact acceptance matches Monte Carlo for a uniform policy") {
  GridWorld env(3, 3, Cell{0, 0}, {}, 0.1);
  SymbolicAutomaton spec =
      build_sequential({parse_predicate("(x == 2) & (y == 2)")}, env.domain());
  ProductMDP p(env, std::move(spec));

  const int horizon = 5;
  Policy uniform = Policy::uniform_random(p.n_states());
  double exact = acceptance_probability_exact(p, uniform, horizon);

  const int n = 1000000;
  std::mt19937_64 rng(31337);
  int hits = evaluate(p, uniform, n, horizon, rng);
  double sigma = std::sqrt(n * exact * (1.0 - exact));
  CHECK(std::abs(hits - n * exact) <= 3.0 * sigma);
}

TEST_CASE("acceptance is impossible below the BFS distance") {
  ProductMDP p = reach4_product();
  int bfs = test::oracle_bfs_steps_to_acceptance(p);
  REQUIRE(bfs == 4);  // diagonal moves: (0,0) to (4,4) needs 4 steps
  CHECK(max_acceptance_probability(p, bfs - 1) == 0.0);
  CHECK(max_acceptance_probability(p, bfs) > 0.0);
}

TEST_CASE("theorem 1: sparse return equals d_max times acceptance, for any policy") {
  ProductMDP p = small_recurrence_product();
  RewardConfig cfg = default_reward_config(p);
  RewardModel sparse = RewardModel::make(p, RewardStrategy::sparse, cfg);
  const int horizon = 6;

  std::mt19937_64 rng(64);
  for (int round = 0; round < 20; ++round) {
    Policy pi = random_stochastic_policy(p, rng);
    double value = policy_value_exact(p, pi, sparse, horizon);
    double prob = acceptance_probability_exact(p, pi, horizon);
    CHECK(std::abs(value - cfg.d_max * prob) < 1e-9);
  }
}

TEST_CASE("sparse values order policies exactly like acceptance probabilities") {
  ProductMDP p = reach4_product();
  RewardConfig cfg = default_reward_config(p);
  RewardModel sparse = RewardModel::make(p, RewardStrategy::sparse, cfg);
  const int horizon = 4;

  std::mt19937_64 rng(65);
  for (int round = 0; round < 20; ++round) {
    Policy pi1 = random_stochastic_policy(p, rng);
    Policy pi2 = random_stochastic_policy(p, rng);
    double v1 = policy_value_exact(p, pi1, sparse, horizon);
    double v2 = policy_value_exact(p, pi2, sparse, horizon);
    double a1 = acceptance_probability_exact(p, pi1, horizon);
    double a2 = acceptance_probability_exact(p, pi2, horizon);
    if (a1 > a2 + 1e-12) CHECK(v1 > v2);
    if (a2 > a1 + 1e-12) CHECK(v2 > v1);
  }
}

TEST_CASE("shaped episode returns telescope to the endpoint potentials") {
  ProductMDP p = reach4_product();
  RewardConfig cfg = default_reward_config(p);
  PotentialTable table = compute_potential(p, cfg);
  RewardModel sparse = RewardModel::make(p, RewardStrategy::sparse, cfg);
  RewardModel shaped = RewardModel::make(p, RewardStrategy::symbolic_shaped, cfg);

  std::mt19937_64 rng(12345);
  std::uniform_int_distribution<int> any_action(0, kNumActions - 1);
  for (int episode = 0; episode < 500; ++episode) {
    int state = p.initial_index();
    double sparse_sum = 0.0, shaped_sum = 0.0;
    for (int t = 0; t < 10; ++t) {
      int a = any_action(rng);
      ProductState s = p.state_at(state);
      ProductState s2 = product_step(p, s, static_cast<Action>(a), rng);
      int next = p.state_index(s2);
      sparse_sum += sparse(state, next);
      shaped_sum += shaped(state, next);
      state = next;
    }
    double expected_diff = table.at_state(p.initial_index()) - table.at_state(state);
    CHECK(std::abs((shaped_sum - sparse_sum) - expected_diff) < 1e-9);
  }
}
