#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tramfl/datasets.hpp"
#include "tramfl/rng.hpp"

namespace tramfl {

struct RoutingConfig {
  std::size_t batch_size = 1;  // B
  std::size_t interval = 1;    // T, batches per visit
};

// Cumulative label usage of the travelling model plus where it currently is.
struct RoutingState {
  LabelHistogram cumulative;
  std::size_t round = 0;
  std::size_t holder = 0;

  RoutingState() = default;
  RoutingState(std::size_t num_classes, std::size_t start)
      : cumulative(num_classes), round(0), holder(start) {}
};

// Population variance of the entries: (1/|C|) sum_c (h_c - mean)^2.
double dispersion(const LabelHistogram& h);

// (B*T / N_j) * L_j, the expected label counts a visit to the shard consumes.
LabelHistogram expected_usage(const DatasetShard& shard, const RoutingConfig& cfg);

/// Node whose expected visit leaves the ledger closest to uniform:
/// argmin_j dispersion(ledger + expected_usage(shard_j)). The current holder is
/// a candidate, empty shards are not, ties go to the lowest index.
std::size_t select_next_dynamic(const RoutingState& state, std::span<const DatasetShard> shards,
                                const RoutingConfig& cfg);

// Fixed cyclic visiting order; `position` indexes the node currently holding the model.
class StaticRoute {
 public:
  // Throws ArgumentError unless `order` is a permutation of 0..n-1.
  explicit StaticRoute(std::vector<std::size_t> order, std::size_t position = 0);

  // Route positioned at `node`.
  static StaticRoute starting_at(std::vector<std::size_t> order, std::size_t node);

  // Advances the cursor (wrapping) and returns the node it lands on.
  std::size_t next();

  std::size_t position() const { return position_; }
  std::size_t current() const { return order_[position_]; }
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  std::vector<std::size_t> order_;
  std::size_t position_;
};

// True iff `order` is a permutation of 0..order.size()-1.
bool is_permutation_of_nodes(std::span<const std::size_t> order);

// Uniform over every node except `holder` (full mesh). Needs nodes >= 2.
std::size_t next_random(std::size_t nodes, std::size_t holder, Rng& rng);

// Adds one visit's realized batch counts to the ledger and closes the round.
RoutingState update_ledger(RoutingState state, const LabelHistogram& batch_counts);

}  // namespace tramfl
