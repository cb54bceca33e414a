#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "product.hpp"
#include "util.hpp"

namespace sash {

// ---------------------------------------------------------------------------
// Configuration and result types
// ---------------------------------------------------------------------------

struct LearnerConfig {
  double alpha = 0.1;           // learning rate
  double epsilon_start = 0.3;   // exploration, decayed linearly per episode
  double epsilon_end = 0.05;
  int episodes = 1000;
  int horizon = 15;             // steps per episode (N)
  int eval_interval = 100;      // episodes between greedy evaluations
  int eval_episodes = 100;
  double discount = 1.0;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  void check() const {
    if (alpha <= 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in (0,1]");
    if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 || epsilon_end > 1.0)
      throw ConfigError("epsilon must lie in [0,1]");
    if (episodes <= 0) throw ConfigError("episodes must be positive");
    if (horizon <= 0) throw ConfigError("horizon must be positive");
    if (eval_interval <= 0 || eval_interval > episodes)
      throw ConfigError("eval_interval must lie in [1, episodes]");
    if (eval_episodes <= 0) throw ConfigError("eval_episodes must be positive");
    if (discount <= 0.0 || discount > 1.0) throw ConfigError("discount must lie in (0,1]");
    if (seeds.empty()) throw ConfigError("at least one seed required");
  }
};

/// Dense action-value table over the product state space, default 0.
struct QTable {
  int n_states = 0;
  std::vector<double> q;

  explicit QTable(int states = 0)
      : n_states(states), q(static_cast<std::size_t>(states) * kNumActions, 0.0) {}

  double& at(int state, int action) {
    return q[static_cast<std::size_t>(state) * kNumActions + action];
  }
  double at(int state, int action) const {
    return q[static_cast<std::size_t>(state) * kNumActions + action];
  }

  int greedy_action(int state) const {
    const double* row = &q[static_cast<std::size_t>(state) * kNumActions];
    int best = 0;
    for (int a = 1; a < kNumActions; ++a)
      if (row[a] > row[best]) best = a;  // ties keep the lowest index
    return best;
  }

  double max_value(int state) const {
    const double* row = &q[static_cast<std::size_t>(state) * kNumActions];
    double best = row[0];
    for (int a = 1; a < kNumActions; ++a) best = std::max(best, row[a]);
    return best;
  }
};

/// One greedy-evaluation checkpoint: k successes out of n episodes plus the
/// Wilson interval around k/n.
struct CurveRow {
  int epoch = 0;  // episodes completed at this checkpoint
  std::uint64_t seed = 0;
  int successes = 0;
  int trials = 0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

using LearningCurve = std::vector<CurveRow>;

// ---------------------------------------------------------------------------
// Binomial confidence interval (Wilson score)
// ---------------------------------------------------------------------------

namespace detail {

/// Inverse standard normal CDF: Acklam's rational approximation polished
/// with one Halley step on erfc.
inline double probit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("probit: p must lie in (0,1)");

  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};

  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

}  // namespace detail

/// Wilson score interval for k successes in n trials at the given
/// confidence level. Well behaved at k = 0 and k = n.
inline std::pair<double, double> binomial_ci(int k, int n, double level = 0.95) {
  if (n < 1) throw std::invalid_argument("binomial_ci: n must be at least 1");
  if (k < 0 || k > n) throw std::invalid_argument("binomial_ci: k must lie in [0, n]");
  if (level <= 0.0 || level >= 1.0) throw std::invalid_argument("binomial_ci: bad level");

  double z = detail::probit(0.5 + level / 2.0);
  double z2 = z * z;
  double nn = static_cast<double>(n);
  double p_hat = static_cast<double>(k) / nn;

  double denom = 1.0 + z2 / nn;
  double center = (p_hat + z2 / (2.0 * nn)) / denom;
  double half = (z / denom) * std::sqrt(p_hat * (1.0 - p_hat) / nn + z2 / (4.0 * nn * nn));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// ---------------------------------------------------------------------------
// Policy extraction and Monte Carlo evaluation
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> greedy_actions(const QTable& q) {
  std::vector<std::uint8_t> actions(static_cast<std::size_t>(q.n_states), 0);
  for (int x = 0; x < q.n_states; ++x)
    actions[static_cast<std::size_t>(x)] = static_cast<std::uint8_t>(q.greedy_action(x));
  return actions;
}

inline Policy greedy_policy(const QTable& q) { return Policy::stationary(greedy_actions(q)); }

namespace detail {

/// Index-level product step shared by the simulation loops.
inline int sample_successor(const ProductMDP& p, int state, int action, std::mt19937_64& rng) {
  const auto& outs = p.outcomes(p.cell_of(state), action);
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
  return p.successor(state, cell_to);
}

}  // namespace detail

/// Simulates n_episodes of exactly `horizon` steps and counts episodes whose
/// final product state is accepting.
inline int evaluate(const ProductMDP& p, const Policy& policy, int n_episodes, int horizon,
                    std::mt19937_64& rng) {
  int successes = 0;
  for (int e = 0; e < n_episodes; ++e) {
    int state = p.initial_index();
    for (int t = 1; t <= horizon; ++t) {
      int a = policy.sample(t, state, rng);
      state = detail::sample_successor(p, state, a, rng);
    }
    if (p.is_accepting(state)) ++successes;
  }
  return successes;
}

// ---------------------------------------------------------------------------
// Q-learning
// ---------------------------------------------------------------------------

struct TrainResult {
  QTable q{0};
  LearningCurve curve;
};

/// Episodic tabular Q-learning with epsilon-greedy behavior. Episodes run
/// exactly `horizon` steps from the initial product state; the bootstrap
/// term is dropped on the final step of each episode. Every eval_interval
/// episodes the greedy policy is frozen and evaluated with an RNG stream
/// independent of the training stream.
inline TrainResult train(const ProductMDP& p, const RewardModel& reward,
                         const LearnerConfig& cfg, std::uint64_t seed) {
  cfg.check();

  TrainResult result;
  result.q = QTable(p.n_states());
  QTable& q = result.q;

  std::mt19937_64 train_rng(util::mix_seed(seed, 0x745241494eULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> any_action(0, kNumActions - 1);

  const double gamma = cfg.discount;
  int checkpoint = 0;

  for (int episode = 0; episode < cfg.episodes; ++episode) {
    double frac = cfg.episodes > 1
                      ? static_cast<double>(episode) / static_cast<double>(cfg.episodes - 1)
                      : 0.0;
    double epsilon = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;

    int state = p.initial_index();
    for (int t = 1; t <= cfg.horizon; ++t) {
      int action = unit(train_rng) < epsilon ? any_action(train_rng) : q.greedy_action(state);
      int next = detail::sample_successor(p, state, action, train_rng);
      double target = reward(state, next);
      if (t < cfg.horizon) target += gamma * q.max_value(next);
      double& slot = q.at(state, action);
      slot += cfg.alpha * (target - slot);
      state = next;
    }

    if ((episode + 1) % cfg.eval_interval == 0) {
      ++checkpoint;
      std::mt19937_64 eval_rng(
          util::mix_seed(seed, 0x4556414cULL + static_cast<std::uint64_t>(checkpoint)));
      Policy greedy = greedy_policy(q);
      int k = evaluate(p, greedy, cfg.eval_episodes, cfg.horizon, eval_rng);
      auto [lo, hi] = binomial_ci(k, cfg.eval_episodes);
      result.curve.push_back({episode + 1, seed, k, cfg.eval_episodes,
                              static_cast<double>(k) / cfg.eval_episodes, lo, hi});
    }
  }
  return result;
}

inline TrainResult train(const ProductMDP& p, RewardStrategy strategy, const LearnerConfig& cfg,
                         const RewardConfig& rcfg, std::uint64_t seed) {
  return train(p, RewardModel::make(p, strategy, rcfg), cfg, seed);
}

}  // namespace sash
