#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <fairlab/config.hpp>
#include <fairlab/harness.hpp>

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  size_t pos = 0;
  while (pos <= csv.size()) {
    const size_t comma = csv.find(',', pos);
    const std::string token =
        csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!token.empty()) {
      try {
        seeds.push_back(std::stoull(token));
      } catch (const std::exception&) {
        throw fairlab::ContractError("sweep: bad seed '" + token + "'");
      }
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  fairlab::require(!seeds.empty(), "sweep: seed list is empty");
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequential-decision fairness laboratory"};
  app.require_subcommand(1);

  std::string config_path, policy_path, out_dir, in_dir, seeds_csv;
  std::uint64_t seed_override = 0;

  auto* train = app.add_subcommand("train", "train (when the agent learns) and evaluate");
  train->add_option("--config", config_path, "experiment config file")->required();
  auto* seed_opt = train->add_option("--seed", seed_override, "run a single seed");
  train->add_option("--out", out_dir, "output directory override");

  auto* eval = app.add_subcommand("eval", "evaluate a saved policy");
  eval->add_option("--config", config_path, "experiment config file")->required();
  eval->add_option("--policy", policy_path, "saved policy file")->required();
  eval->add_option("--out", out_dir, "output directory override");

  auto* sweep = app.add_subcommand("sweep", "run a list of seeds");
  sweep->add_option("--config", config_path, "experiment config file")->required();
  sweep->add_option("--seeds", seeds_csv, "comma-separated seed list")->required();
  sweep->add_option("--out", out_dir, "output directory override");

  auto* report = app.add_subcommand("report", "rebuild aggregate outputs from run CSVs");
  report->add_option("--in", in_dir, "directory holding run_*.csv files")->required();

  try {
    app.parse(argc, argv);

    if (*report) {
      fairlab::rebuild_report(in_dir);
      return 0;
    }

    fairlab::ExperimentConfig cfg = fairlab::load_experiment_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    if (*train) {
      if (seed_opt->count() > 0) cfg.seeds = {seed_override};
      fairlab::run_experiment(cfg);
    } else if (*eval) {
      fairlab::run_saved_policy_evaluation(cfg, policy_path);
    } else if (*sweep) {
      cfg.seeds = parse_seed_list(seeds_csv);
      fairlab::run_experiment(cfg);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
