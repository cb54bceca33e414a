// Command-line front end: run experiment configs, validate automaton files,
// and dump symbolic potential grids.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sash/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_path) {
  sash::ExperimentConfig cfg = sash::load_experiment_config(config_path);
  std::vector<sash::ResultRow> rows = sash::run_experiment(cfg);
  sash::write_csv(rows, out_path);
  std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  return 0;
}

int cmd_validate(const std::string& automaton_path) {
  sash::SymbolicAutomaton automaton =
      sash::parse_automaton(sash::detail::read_file(automaton_path));
  sash::ValidationReport report = sash::validate(automaton);
  std::cout << sash::to_string(report);
  return report.ok() ? 0 : 1;
}

int cmd_potential(const std::string& map_path, const std::string& automaton_path,
                  const std::string& metric_name, const std::string& out_prefix) {
  sash::GridWorld env = sash::load_map(sash::detail::read_file(map_path));
  sash::SymbolicAutomaton automaton =
      sash::parse_automaton(sash::detail::read_file(automaton_path));
  sash::ValidationReport report = sash::validate(automaton);
  if (!report.ok()) {
    std::cerr << sash::to_string(report);
    return 1;
  }
  sash::ProductMDP product(env, std::move(automaton));
  sash::RewardConfig cfg =
      sash::default_reward_config(product, sash::parse_metric(metric_name));
  for (const std::string& path : sash::write_potential_dump(product, cfg, out_prefix))
    std::cout << "wrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reinforcement learning against symbolic-automaton task specifications"};
  app.require_subcommand(1);

  std::string config_path, out_path, automaton_path, map_path;
  std::string metric_name = "manhattan";

  CLI::App* run = app.add_subcommand("run", "train the configured strategies and write a CSV");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--out", out_path, "output CSV path")->required();

  CLI::App* validate = app.add_subcommand("validate", "check an automaton file");
  validate->add_option("--automaton", automaton_path, "automaton file")->required();

  CLI::App* potential =
      app.add_subcommand("potential", "dump the symbolic potential grid per location");
  potential->add_option("--map", map_path, "map file")->required();
  potential->add_option("--automaton", automaton_path, "automaton file")->required();
  potential->add_option("--metric", metric_name, "manhattan|euclidean|chebyshev");
  potential->add_option("--out", out_path, "output file prefix")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_path);
    if (validate->parsed()) return cmd_validate(automaton_path);
    if (potential->parsed()) return cmd_potential(map_path, automaton_path, metric_name, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
