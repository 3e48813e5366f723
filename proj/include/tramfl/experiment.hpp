#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tramfl/config.hpp"
#include "tramfl/datasets.hpp"
#include "tramfl/simulator.hpp"

namespace tramfl {

// All routes over `nodes` nodes that start at node 0, as "0,i,j,..." strings in
// lexicographic order. Accepts 2 <= nodes <= 8.
std::vector<std::string> enumerate_static_routes(std::size_t nodes);

struct ExperimentOptions {
  bool csv_header = false;
  bool count_exchanges_once = false;
  std::optional<std::filesystem::path> dump_model;
};

struct LoadedData {
  LabeledDataset train;
  LabeledDataset test;
};

LoadedData load_data(const DatasetSection& section, bool csv_header);

/// Centralized reference: plain SGD on the pooled training set for
/// `iterations` steps, evaluated 20 times at even spacing. Returns the mean
/// test accuracy over the second half of those evaluations.
double centralized_reference_accuracy(const LabeledDataset& train, const LabeledDataset& test,
                                      const RunConfig& cfg, std::size_t iterations);

// Run parameters shared by every policy (target left empty).
RunConfig make_run_config(const ExperimentConfig& cfg, std::size_t dims, std::size_t num_classes,
                          const ExperimentOptions& opts);

struct PolicyOutcome {
  std::string name;
  Policy policy;
  TrialSummary summary;
};

struct ExperimentResult {
  double target_accuracy = 0.0;
  std::vector<PolicyOutcome> outcomes;  // config order
};

ExperimentResult execute_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opts);

// `trial,iteration,transmissions,holder,test_loss,test_accuracy` rows with a
// header line; holder is empty for gossip.
std::string results_csv(const TrialSummary& summary);

// {"<policy>": {"mean", "std", "n_trials", "n_reached", "per_trial"}, ...}
std::string summary_json(const ExperimentResult& result);

// Table ordered by mean transmissions-to-target; policies that never reach it last.
void print_comparison(const ExperimentResult& result, std::ostream& out);

/// Runs every policy, writes results_<policy>.csv and summary.json into
/// out_dir and prints the comparison table. Throws on any failure.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                const ExperimentOptions& opts, std::ostream& log);

}  // namespace tramfl
