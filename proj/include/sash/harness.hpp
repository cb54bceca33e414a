#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "automaton.hpp"
#include "gridworld.hpp"
#include "learner.hpp"
#include "predicate.hpp"
#include "product.hpp"
#include "util.hpp"

namespace sash {

/// Environment variable consulted for the seed list when a config does not
/// set one (comma-separated integers).
inline constexpr const char* kSeedsEnvVar = "SASH_SEEDS";

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

enum class BuilderKind { none, bounded_reach, sequential, recurrence };

struct ExperimentConfig {
  std::string task;
  std::string map_path;

  // Specification: either an automaton file or a builder pattern.
  std::string automaton_path;
  BuilderKind builder = BuilderKind::none;
  std::string goal;                 // bounded_reach
  int deadline = 0;                 // bounded_reach
  std::vector<std::string> goals;   // sequential
  std::string region_a, region_b;   // recurrence
  int gap = 0, span = 0;            // recurrence

  std::vector<RewardStrategy> strategies;
  LearnerConfig learner;
  GuardSemantics semantics = GuardSemantics::next;

  Metric metric = Metric::manhattan;
  double kappa = 1.0;
  std::optional<double> d_max;    // default: derived from the product
  std::optional<double> phi_cap;  // default: d_max

  void check() const {
    if (task.empty()) throw ConfigError("config: missing task name");
    if (map_path.empty()) throw ConfigError("config: missing map");
    bool has_file = !automaton_path.empty();
    bool has_builder = builder != BuilderKind::none;
    if (has_file == has_builder)
      throw ConfigError("config: exactly one of 'automaton' or 'builder' required");
    if (strategies.empty()) throw ConfigError("config: at least one strategy required");
    learner.check();
  }
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& part : util::split(text, ',')) {
    long long v = 0;
    if (part.empty() || !util::parse_int(part, v) || v < 0)
      throw ConfigError("invalid seed list entry '" + part + "'");
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  if (seeds.empty()) throw ConfigError("empty seed list");
  return seeds;
}

inline std::vector<std::uint64_t> default_seeds() {
  if (const char* env = std::getenv(kSeedsEnvVar); env && *env) return parse_seed_list(env);
  return {1, 2, 3, 4, 5};
}

}  // namespace detail

/// Parses the flat key/value experiment format. Unknown keys are errors;
/// relative paths are resolved against `base_dir`.
inline ExperimentConfig parse_experiment_config(std::string_view text,
                                                const std::string& base_dir = ".") {
  ExperimentConfig cfg;
  cfg.learner.seeds = detail::default_seeds();

  auto resolve = [&](std::string_view p) {
    std::filesystem::path fp{std::string(p)};
    if (fp.is_absolute()) return fp.string();
    return (std::filesystem::path(base_dir) / fp).string();
  };

  auto to_int = [](std::string_view key, std::string_view val) {
    long long v = 0;
    if (!util::parse_int(val, v))
      throw ConfigError("config: expected integer for '" + std::string(key) + "'");
    return static_cast<int>(v);
  };
  auto to_double = [](std::string_view key, const std::string& val) {
    try {
      return std::stod(val);
    } catch (const std::exception&) {
      throw ConfigError("config: expected number for '" + std::string(key) + "'");
    }
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = util::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key{util::trim(line.substr(0, eq))};
    std::string val{util::trim(line.substr(eq + 1))};

    if (key == "task") cfg.task = val;
    else if (key == "map") cfg.map_path = resolve(val);
    else if (key == "automaton") cfg.automaton_path = resolve(val);
    else if (key == "builder") {
      if (val == "bounded_reach") cfg.builder = BuilderKind::bounded_reach;
      else if (val == "sequential") cfg.builder = BuilderKind::sequential;
      else if (val == "recurrence") cfg.builder = BuilderKind::recurrence;
      else throw ConfigError("config: unknown builder '" + val + "'");
    } else if (key == "goal") cfg.goal = val;
    else if (key == "deadline") cfg.deadline = to_int(key, val);
    else if (key == "goals") {
      for (const std::string& g : util::split(val, ';'))
        if (!g.empty()) cfg.goals.push_back(g);
    } else if (key == "region_a") cfg.region_a = val;
    else if (key == "region_b") cfg.region_b = val;
    else if (key == "gap") cfg.gap = to_int(key, val);
    else if (key == "span") cfg.span = to_int(key, val);
    else if (key == "strategies") {
      for (const std::string& s : util::split(val, ','))
        if (!s.empty()) cfg.strategies.push_back(parse_strategy(s));
    } else if (key == "episodes") cfg.learner.episodes = to_int(key, val);
    else if (key == "horizon") cfg.learner.horizon = to_int(key, val);
    else if (key == "eval_interval") cfg.learner.eval_interval = to_int(key, val);
    else if (key == "eval_episodes") cfg.learner.eval_episodes = to_int(key, val);
    else if (key == "alpha") cfg.learner.alpha = to_double(key, val);
    else if (key == "epsilon_start") cfg.learner.epsilon_start = to_double(key, val);
    else if (key == "epsilon_end") cfg.learner.epsilon_end = to_double(key, val);
    else if (key == "discount") cfg.learner.discount = to_double(key, val);
    else if (key == "seeds") cfg.learner.seeds = detail::parse_seed_list(val);
    else if (key == "metric") cfg.metric = parse_metric(val);
    else if (key == "kappa") cfg.kappa = to_double(key, val);
    else if (key == "d_max") cfg.d_max = to_double(key, val);
    else if (key == "phi_cap") cfg.phi_cap = to_double(key, val);
    else if (key == "guard_semantics") {
      if (val == "next") cfg.semantics = GuardSemantics::next;
      else if (val == "current") cfg.semantics = GuardSemantics::current;
      else throw ConfigError("config: unknown guard_semantics '" + val + "'");
    } else {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }

  cfg.check();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::string dir = std::filesystem::path(path).parent_path().string();
  if (dir.empty()) dir = ".";
  return parse_experiment_config(detail::read_file(path), dir);
}

/// Instantiates the automaton named by the config over the map's domain.
inline SymbolicAutomaton build_specification(const ExperimentConfig& cfg, const GridWorld& env) {
  const Domain dom = env.domain();
  switch (cfg.builder) {
    case BuilderKind::none:
      return parse_automaton(detail::read_file(cfg.automaton_path));
    case BuilderKind::bounded_reach:
      if (cfg.goal.empty() || cfg.deadline < 1)
        throw ConfigError("bounded_reach builder needs 'goal' and 'deadline'");
      return build_bounded_reach(parse_predicate(cfg.goal), cfg.deadline, dom);
    case BuilderKind::sequential: {
      if (cfg.goals.empty()) throw ConfigError("sequential builder needs 'goals'");
      std::vector<Predicate> goals;
      for (const auto& g : cfg.goals) goals.push_back(parse_predicate(g));
      return build_sequential(goals, dom);
    }
    case BuilderKind::recurrence:
      if (cfg.region_a.empty() || cfg.region_b.empty() || cfg.gap < 1 || cfg.span < cfg.gap)
        throw ConfigError("recurrence builder needs 'region_a', 'region_b', 'gap', 'span'");
      return build_recurrence(parse_predicate(cfg.region_a), parse_predicate(cfg.region_b),
                              cfg.gap, cfg.span, dom);
  }
  throw ConfigError("unreachable builder kind");
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

/// One pooled checkpoint of one strategy's learning curve.
struct ResultRow {
  std::string task;
  std::string strategy;
  int epoch = 0;
  int successes = 0;
  int trials = 0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Trains every (strategy, seed) pair, evaluating the greedy policy at fixed
/// intervals, and pools the per-checkpoint success counts across seeds
/// before computing the Wilson interval. Deterministic for fixed seeds.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.check();

  GridWorld env = load_map(detail::read_file(cfg.map_path));
  SymbolicAutomaton spec = build_specification(cfg, env);
  ValidationReport report = validate(spec);
  if (!report.ok())
    throw ConfigError("config: automaton is not a valid specification:\n" + to_string(report));

  ProductMDP product(env, std::move(spec), cfg.semantics);

  RewardConfig rcfg = default_reward_config(product, cfg.metric, cfg.kappa);
  if (cfg.d_max) rcfg.d_max = *cfg.d_max;
  if (cfg.phi_cap) rcfg.phi_cap = *cfg.phi_cap;
  else if (cfg.d_max) rcfg.phi_cap = *cfg.d_max;

  const int n_checkpoints = cfg.learner.episodes / cfg.learner.eval_interval;

  std::vector<ResultRow> rows;
  for (RewardStrategy strategy : cfg.strategies) {
    RewardModel reward = RewardModel::make(product, strategy, rcfg);

    // Seeds are independent runs; pooling is a single-writer merge afterward.
    std::vector<std::future<LearningCurve>> runs;
    runs.reserve(cfg.learner.seeds.size());
    for (std::uint64_t seed : cfg.learner.seeds)
      runs.push_back(std::async(std::launch::async, [&, seed] {
        return train(product, reward, cfg.learner, seed).curve;
      }));

    std::vector<int> pooled_k(static_cast<std::size_t>(n_checkpoints), 0);
    std::vector<int> pooled_n(static_cast<std::size_t>(n_checkpoints), 0);
    for (auto& run : runs) {
      LearningCurve curve = run.get();
      for (std::size_t i = 0; i < curve.size() && i < pooled_k.size(); ++i) {
        pooled_k[i] += curve[i].successes;
        pooled_n[i] += curve[i].trials;
      }
    }

    for (int i = 0; i < n_checkpoints; ++i) {
      int k = pooled_k[static_cast<std::size_t>(i)];
      int n = pooled_n[static_cast<std::size_t>(i)];
      auto [lo, hi] = binomial_ci(k, n);
      rows.push_back({cfg.task, std::string(strategy_name(strategy)),
                      (i + 1) * cfg.learner.eval_interval, k, n,
                      static_cast<double>(k) / n, lo, hi});
    }
  }

  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.task, a.strategy, a.epoch) < std::tie(b.task, b.strategy, b.epoch);
  });
  return rows;
}

inline void write_csv(const std::vector<ResultRow>& rows, std::ostream& os) {
  os << "task,strategy,epoch,k,n,estimate,ci_low,ci_high\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.task << ',' << r.strategy << ',' << r.epoch << ',' << r.successes << ','
       << r.trials;
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f", r.estimate, r.ci_low, r.ci_high);
    os << buf << '\n';
  }
}

inline void write_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  write_csv(rows, out);
}

// ---------------------------------------------------------------------------
// Potential dumps
// ---------------------------------------------------------------------------

/// Phi(s, q) laid out as grid text: one value per cell, rows from the top of
/// the map down (y descending), columns x ascending.
struct PotentialGrid {
  std::string location;
  int width = 0;
  int height = 0;
  std::vector<double> values;  // indexed y * width + x

  double at(int x, int y) const {
    return values.at(static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x));
  }
};

inline std::vector<PotentialGrid> potential_grids(const ProductMDP& p, const RewardConfig& cfg) {
  PotentialTable table = compute_potential(p, cfg);
  const GridWorld& env = p.env();
  std::vector<PotentialGrid> grids;
  for (int q = 0; q < p.n_locations(); ++q) {
    PotentialGrid g;
    g.location = p.spec().location_name(q);
    g.width = env.width();
    g.height = env.height();
    g.values.resize(static_cast<std::size_t>(env.n_cells()));
    for (int cell = 0; cell < env.n_cells(); ++cell) {
      Cell c = env.cell_at(static_cast<std::size_t>(cell));
      g.values[static_cast<std::size_t>(c.y) * env.width() + static_cast<std::size_t>(c.x)] =
          table.at(cell, q);
    }
    grids.push_back(std::move(g));
  }
  return grids;
}

inline void write_potential_grid(const PotentialGrid& g, std::ostream& os) {
  char buf[64];
  for (int y = g.height - 1; y >= 0; --y) {
    for (int x = 0; x < g.width; ++x) {
      std::snprintf(buf, sizeof buf, "%.6f", g.at(x, y));
      os << (x ? "," : "") << buf;
    }
    os << '\n';
  }
}

/// Writes one CSV per automaton location to `<prefix><location>.csv`;
/// returns the paths written.
inline std::vector<std::string> write_potential_dump(const ProductMDP& p, const RewardConfig& cfg,
                                                     const std::string& prefix) {
  std::vector<std::string> paths;
  for (const auto& g : potential_grids(p, cfg)) {
    std::string path = prefix + g.location + ".csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    write_potential_grid(g, out);
    paths.push_back(path);
  }
  return paths;
}

// ---------------------------------------------------------------------------
// Shipped benchmark fixtures
// ---------------------------------------------------------------------------

/// The four benchmark configurations shipped under fixtures/: reach,
/// recurrence, sequential, branching. `dir` is the fixtures directory.
inline std::vector<ExperimentConfig> fixtures(const std::string& dir) {
  std::vector<ExperimentConfig> out;
  for (const char* name : {"reach.cfg", "recurrence.cfg", "sequential.cfg", "branching.cfg"})
    out.push_back(load_experiment_config((std::filesystem::path(dir) / name).string()));
  return out;
}

}  // namespace sash
