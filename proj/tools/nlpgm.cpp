#include <iostream>

#include <CLI11.hpp>

#include "nlpgm/certify.hpp"
#include "nlpgm/config.hpp"
#include "nlpgm/experiment.hpp"

namespace {

void add_common(CLI::App* cmd, nlpgm::CommandOptions& options, std::string& out) {
  cmd->add_option("--out", out, "Output directory (overrides output_dir)");
  cmd->add_option("--jobs", options.jobs, "Parallel runs")->check(CLI::PositiveNumber);
  cmd->add_option("--seed-offset", options.seed_offset, "Added to every configured seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinearly preconditioned gradient methods: runs, sweeps and certificates"};
  app.require_subcommand(1);

  nlpgm::CommandOptions options;
  std::string out;
  std::string config_path;

  auto* run = app.add_subcommand("run", "Run every seed of a config and write trace CSVs");
  run->add_option("config", config_path, "JSON config")->required();
  add_common(run, options, out);

  std::vector<std::string> grid;
  auto* sweep = app.add_subcommand("sweep", "Cross product of hyperparameter values");
  sweep->add_option("config", config_path, "JSON config")->required();
  sweep->add_option("--grid", grid, "Axis such as gamma=5,1,0.5 (repeatable)")->required();
  add_common(sweep, options, out);

  std::vector<std::string> suites;
  nlpgm::VerifyOptions verify_options;
  bool list = false;
  auto* verify = app.add_subcommand("verify", "Run certifier suites ('all' for every suite)");
  verify->add_option("suites", suites, "Suite names");
  verify->add_option("--out", out, "Report directory (default verify-report)");
  verify->add_option("--seed", verify_options.seed, "Seed of the sample points");
  verify->add_option("--perturb-dual", verify_options.perturb_dual,
                     "Shift every kernel's dual map by this amount (fault injection)");
  verify->add_flag("--list", list, "List suite names and exit");

  std::string movielens;
  auto* ingest = app.add_subcommand("ingest-movielens", "Report the shape of a MovieLens u.data file");
  ingest->add_option("path", movielens, "Tab-separated user item rating timestamp rows")->required();

  CLI11_PARSE(app, argc, argv);
  if (!out.empty()) {
    options.out = out;
    verify_options.out = out;
  }

  try {
    if (*run) return nlpgm::cmd_run(nlpgm::parse_config(config_path), options, std::cout);
    if (*sweep) {
      std::vector<nlpgm::GridAxis> axes;
      for (const auto& g : grid) axes.push_back(nlpgm::parse_grid_axis(g));
      return nlpgm::cmd_sweep(nlpgm::parse_config(config_path), axes, options, std::cout);
    }
    if (*verify) {
      if (list) {
        for (const auto& name : nlpgm::suite_names()) std::cout << name << "\n";
        return 0;
      }
      return nlpgm::cmd_verify(suites, verify_options, std::cout);
    }
    if (*ingest) return nlpgm::cmd_ingest_movielens(movielens, std::cout);
  } catch (const nlpgm::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
