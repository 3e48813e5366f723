// tramfl: run travelling-model federated learning experiments from a config file.
//
//   tramfl run <config> --out <dir> [--csv-header] [--dump-model <path>] [--count-exchanges-once]
//
// Exit codes: 0 success, 2 config error, 3 runtime/simulation error.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tramfl/config.hpp"
#include "tramfl/errors.hpp"
#include "tramfl/experiment.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Travelling-model decentralized federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string dump_model;
  tramfl::ExperimentOptions opts;

  auto* run = app.add_subcommand("run", "Run every policy of an experiment config");
  run->add_option("config", config_path, "Experiment config file")->required();
  run->add_option("--out", out_dir, "Output directory for CSV and JSON results")->required();
  run->add_flag("--csv-header", opts.csv_header, "CSV datasets start with a header line");
  run->add_option("--dump-model", dump_model, "Write the first trial's final model of the first policy");
  run->add_flag("--count-exchanges-once", opts.count_exchanges_once,
                "Gossip: count each pairwise exchange as one transmission");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  if (!dump_model.empty()) opts.dump_model = dump_model;

  tramfl::ExperimentConfig cfg;
  try {
    cfg = tramfl::parse_config(config_path);
  } catch (const tramfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    tramfl::run_experiment(cfg, out_dir, opts, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
