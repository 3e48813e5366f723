#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tramfl/datasets.hpp"
#include "tramfl/learner.hpp"
#include "tramfl/routing.hpp"

namespace tramfl {

enum class PolicyKind { dynamic, static_route, random, gossip };

struct Policy {
  PolicyKind kind = PolicyKind::dynamic;
  std::vector<std::size_t> route;  // static_route only

  static Policy dynamic() { return {PolicyKind::dynamic, {}}; }
  static Policy random() { return {PolicyKind::random, {}}; }
  static Policy gossip() { return {PolicyKind::gossip, {}}; }
  static Policy fixed(std::vector<std::size_t> order) { return {PolicyKind::static_route, std::move(order)}; }

  // "dynamic" | "random" | "gossip" | "static:0,2,1,3,4". Throws ArgumentError.
  static Policy parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const Policy&) const = default;
};

// "0,2,1" <-> {0, 2, 1}. parse_route throws ArgumentError on malformed input.
std::vector<std::size_t> parse_route(std::string_view text);
std::string format_route(std::span<const std::size_t> route);

struct RunConfig {
  ArchSpec arch;
  double eta = 0.05;
  std::size_t batch_size = 16;        // B
  std::size_t interval = 1;           // T
  std::size_t max_iterations = 1000;  // K; rounds for gossip
  std::size_t eval_every = 1;         // E, in transmissions (iterations for centralized runs)
  std::optional<double> target_accuracy;
  std::uint64_t seed = 0;
  // Gossip only: count each pairwise exchange once instead of as two sends.
  bool count_exchanges_once = false;

  // Throws ArgumentError on out-of-range fields.
  void validate() const;
};

struct EvalRecord {
  std::size_t iteration = 0;
  std::size_t transmissions = 0;
  std::optional<std::size_t> holder;  // empty for gossip and centralized runs
  double test_accuracy = 0.0;
  double test_loss = 0.0;

  bool operator==(const EvalRecord&) const = default;
};

struct TrialResult {
  std::vector<EvalRecord> records;
  std::optional<std::size_t> transmissions_to_target;
  std::uint64_t final_params_digest = 0;
  ModelParams final_params;

  std::size_t iterations = 0;     // batch updates (travelling model) or rounds (gossip) executed
  std::size_t transmissions = 0;
  std::size_t trained_batches = 0;
  LabelHistogram ledger;          // travelling-model label usage
  std::vector<std::size_t> path;  // travelling model: initial node, then the node after each transmission
};

/// Travelling-model training. The model starts at a node drawn from the trial
/// seed; the holder trains one minibatch per iteration and after every T
/// iterations forwards the model according to `policy`. Evaluates on
/// `test_set` every E transmissions and at termination; stops at the first
/// evaluation reaching `target_accuracy`. Visits to empty shards pass the
/// model on without training.
TrialResult run_tram_fl(std::span<const DatasetShard> shards, const LabeledDataset& test_set,
                        const RunConfig& cfg, const Policy& policy);

// Full-mesh synchronous gossip state: every node trains one local batch, then
// every node replaces its model with the uniform average of all models.
class GossipNetwork {
 public:
  GossipNetwork(std::span<const DatasetShard> shards, const RunConfig& cfg);

  // One round; returns the transmissions it costs.
  std::size_t round();

  std::span<const ModelParams> models() const { return models_; }
  ModelParams consensus() const;
  std::size_t trained_batches() const { return trained_batches_; }

 private:
  std::span<const DatasetShard> shards_;
  RunConfig cfg_;
  std::vector<ModelParams> models_;
  Rng batch_rng_;
  std::size_t trained_batches_ = 0;
};

/// Gossip-SGD baseline over K rounds. Each round costs V(V-1) directed sends
/// (V(V-1)/2 with count_exchanges_once). The averaged model is evaluated
/// whenever the counter crosses a multiple of E, and at termination.
TrialResult run_gossip(std::span<const DatasetShard> shards, const LabeledDataset& test_set,
                       const RunConfig& cfg);

// Plain minibatch SGD on pooled data; evaluated every E iterations.
TrialResult run_centralized(const LabeledDataset& train_set, const LabeledDataset& test_set,
                            const RunConfig& cfg);

// Dispatches on policy kind.
TrialResult run_policy(std::span<const DatasetShard> shards, const LabeledDataset& test_set,
                       const RunConfig& cfg, const Policy& policy);

// Smallest recorded transmission count whose accuracy is >= threshold.
std::optional<std::size_t> transmissions_to_accuracy(const TrialResult& result, double threshold);

struct TrialSummary {
  std::vector<TrialResult> trials;
  std::vector<std::optional<std::size_t>> per_trial;
  std::optional<double> mean;  // over trials that reached the target
  double std = 0.0;            // sample std over those; 0 when fewer than two
  std::size_t n_trials = 0;
  std::size_t n_reached = 0;
};

/// Runs trials with seeds cfg.seed, cfg.seed + 1, ... Results are collected in
/// trial order whatever the thread count (0 = hardware concurrency).
TrialSummary run_trials(std::span<const DatasetShard> shards, const LabeledDataset& test_set,
                        const RunConfig& cfg, const Policy& policy, std::size_t n_trials,
                        std::size_t threads = 1);

// Mean and sample standard deviation of the values present.
TrialSummary summarize(std::vector<TrialResult> trials);

}  // namespace tramfl
