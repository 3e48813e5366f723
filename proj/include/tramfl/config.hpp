#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tramfl/partition.hpp"
#include "tramfl/simulator.hpp"

namespace tramfl {

enum class DatasetKind { synthetic, csv };

struct DatasetSection {
  DatasetKind kind = DatasetKind::synthetic;
  // synthetic
  std::size_t num_classes = 0;
  std::size_t dims = 0;
  std::size_t per_class = 0;
  std::size_t test_per_class = 0;
  double separation = 0.0;
  std::uint64_t seed = 0;
  // csv
  std::string path;
  std::string test_path;

  bool operator==(const DatasetSection&) const = default;
};

struct LearnerSection {
  std::vector<std::size_t> hidden;  // hidden layer widths; empty = linear softmax model
  double eta = 0.0;
  std::size_t batch_size = 0;

  bool operator==(const LearnerSection&) const = default;
};

struct RunSection {
  std::size_t interval = 0;    // T
  std::size_t iterations = 0;  // K
  std::size_t eval_every = 1;  // E
  std::optional<double> target_accuracy;
  // Alternative to target_accuracy: target = centralized reference accuracy - margin.
  std::optional<double> target_margin;
  std::size_t reference_iterations = 2000;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  bool operator==(const RunSection&) const = default;
};

struct NamedPolicy {
  std::string name;  // used in output file names
  Policy policy;

  bool operator==(const NamedPolicy&) const = default;
};

struct ExperimentConfig {
  DatasetSection dataset;
  PartitionPlan partition;
  LearnerSection learner;
  RunSection run;
  std::vector<NamedPolicy> policies;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Line-oriented format: `[section]` headers, `key = value` entries, `#`
/// comments. Sections: dataset, partition, learner, run, policies. In
/// [policies] every entry is `name = dynamic | random | gossip | static:i,j,...`,
/// and `static:all` expands to every route starting at node 0 (named
/// name_01, name_02, ...). Unknown or duplicate keys are rejected.
/// Throws ConfigError naming the offending key path.
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config(const std::filesystem::path& path);

// Canonical text form; parse_config_text(to_text(c)) == c.
std::string to_text(const ExperimentConfig& cfg);

}  // namespace tramfl
