#include "tramfl/routing.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "tramfl/errors.hpp"

namespace tramfl {

double dispersion(const LabelHistogram& h) {
  if (h.size() == 0) throw ArgumentError("dispersion: empty histogram");
  const double n = static_cast<double>(h.size());
  const double mean = h.total() / n;
  double acc = 0.0;
  for (double v : h.counts) acc += (v - mean) * (v - mean);
  return acc / n;
}

LabelHistogram expected_usage(const DatasetShard& shard, const RoutingConfig& cfg) {
  if (shard.empty()) {
    throw ArgumentError("expected_usage: shard " + std::to_string(shard.node_id) + " is empty");
  }
  const double scale = static_cast<double>(cfg.batch_size * cfg.interval) / static_cast<double>(shard.total());
  LabelHistogram out = shard.hist;
  for (auto& v : out.counts) v *= scale;
  return out;
}

std::size_t select_next_dynamic(const RoutingState& state, std::span<const DatasetShard> shards,
                                const RoutingConfig& cfg) {
  std::size_t best = shards.size();
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < shards.size(); ++j) {
    if (shards[j].empty()) continue;
    const double score = dispersion(state.cumulative + expected_usage(shards[j], cfg));
    if (score < best_score) {
      best_score = score;
      best = j;
    }
  }
  if (best == shards.size()) throw StateError("select_next_dynamic: every shard is empty");
  return best;
}

bool is_permutation_of_nodes(std::span<const std::size_t> order) {
  std::vector<bool> seen(order.size(), false);
  for (std::size_t v : order) {
    if (v >= order.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

StaticRoute::StaticRoute(std::vector<std::size_t> order, std::size_t position)
    : order_(std::move(order)), position_(position) {
  if (order_.empty() || !is_permutation_of_nodes(order_)) {
    throw ArgumentError("static route is not a permutation of the node indices");
  }
  if (position_ >= order_.size()) throw ArgumentError("static route position out of range");
}

StaticRoute StaticRoute::starting_at(std::vector<std::size_t> order, std::size_t node) {
  const auto it = std::find(order.begin(), order.end(), node);
  if (it == order.end()) throw ArgumentError("node " + std::to_string(node) + " is not on the route");
  const auto pos = static_cast<std::size_t>(it - order.begin());
  return StaticRoute(std::move(order), pos);
}

std::size_t StaticRoute::next() {
  position_ = (position_ + 1) % order_.size();
  return order_[position_];
}

std::size_t next_random(std::size_t nodes, std::size_t holder, Rng& rng) {
  if (nodes < 2) throw ArgumentError("next_random: need at least two nodes");
  if (holder >= nodes) throw ArgumentError("next_random: holder out of range");
  std::uniform_int_distribution<std::size_t> pick(0, nodes - 2);
  const std::size_t r = pick(rng);
  return r >= holder ? r + 1 : r;
}

RoutingState update_ledger(RoutingState state, const LabelHistogram& batch_counts) {
  state.cumulative += batch_counts;
  ++state.round;
  return state;
}

}  // namespace tramfl
