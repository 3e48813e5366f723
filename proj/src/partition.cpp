#include "tramfl/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tramfl/errors.hpp"

namespace tramfl {

std::vector<std::vector<std::size_t>> contiguous_label_groups(std::size_t num_classes,
                                                              std::size_t nodes) {
  if (nodes < 1) throw ArgumentError("contiguous split: need at least one node");
  if (nodes > num_classes) {
    throw ArgumentError("contiguous split: " + std::to_string(nodes) + " nodes but only " +
                        std::to_string(num_classes) + " labels");
  }
  const std::size_t base = num_classes / nodes;
  const std::size_t extra = num_classes % nodes;
  std::vector<std::vector<std::size_t>> groups(nodes);
  std::size_t next = 0;
  for (std::size_t v = 0; v < nodes; ++v) {
    const std::size_t size = base + (v >= nodes - extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) groups[v].push_back(next++);
  }
  return groups;
}

std::vector<DatasetShard> split_by_label_sets(const LabeledDataset& ds,
                                              const std::vector<std::vector<std::size_t>>& sets) {
  // holders[c] = nodes that own label c
  std::vector<std::vector<std::size_t>> holders(ds.num_classes);
  for (std::size_t v = 0; v < sets.size(); ++v) {
    for (std::size_t c : sets[v]) {
      if (c >= ds.num_classes) throw ArgumentError("label set refers to unknown label " + std::to_string(c));
      holders[c].push_back(v);
    }
  }
  std::vector<std::vector<LabeledSample>> parts(sets.size());
  for (const auto& s : ds.samples) {
    for (std::size_t v : holders[s.label]) parts[v].push_back(s);
  }
  std::vector<DatasetShard> shards;
  shards.reserve(sets.size());
  for (std::size_t v = 0; v < sets.size(); ++v) {
    shards.push_back(make_shard(v, std::move(parts[v]), ds.num_classes));
  }
  return shards;
}

std::vector<DatasetShard> split_contiguous_labels(const LabeledDataset& ds, std::size_t nodes) {
  return split_by_label_sets(ds, contiguous_label_groups(ds.num_classes, nodes));
}

std::vector<std::vector<std::size_t>> random_label_sets(std::size_t num_classes, std::size_t nodes,
                                                        std::size_t k_min, std::size_t k_max,
                                                        Rng& rng) {
  if (nodes < 1) throw ArgumentError("random_k split: need at least one node");
  if (k_min < 1 || k_min > k_max || k_max > num_classes) {
    throw ArgumentError("random_k split: need 1 <= k_min <= k_max <= " + std::to_string(num_classes));
  }
  if (nodes * k_max < num_classes) {
    throw ArgumentError("random_k split: " + std::to_string(nodes) + " nodes with at most " +
                        std::to_string(k_max) + " labels cannot cover " +
                        std::to_string(num_classes) + " labels");
  }

  constexpr int kMaxAttempts = 10000;
  std::uniform_int_distribution<std::size_t> label_count(k_min, k_max);
  std::vector<std::size_t> labels(num_classes);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<std::vector<std::size_t>> sets(nodes);
    std::vector<bool> covered(num_classes, false);
    for (auto& set : sets) {
      const std::size_t k = label_count(rng);
      std::iota(labels.begin(), labels.end(), std::size_t{0});
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, num_classes - 1);
        std::swap(labels[i], labels[pick(rng)]);
      }
      set.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(set.begin(), set.end());
      for (std::size_t c : set) covered[c] = true;
    }
    if (std::all_of(covered.begin(), covered.end(), [](bool b) { return b; })) return sets;
  }
  throw ArgumentError("random_k split: no covering label assignment found in " +
                      std::to_string(kMaxAttempts) + " attempts");
}

std::vector<DatasetShard> split_random_k_labels(const LabeledDataset& ds, std::size_t nodes,
                                                std::size_t k_min, std::size_t k_max, Rng& rng) {
  return split_by_label_sets(ds, random_label_sets(ds.num_classes, nodes, k_min, k_max, rng));
}

std::vector<DatasetShard> split_by_count_table(const LabeledDataset& ds, const CountTable& counts) {
  const LabelHistogram available = histogram(ds);
  for (std::size_t v = 0; v < counts.size(); ++v) {
    if (counts[v].size() != ds.num_classes) {
      throw ArgumentError("count table row " + std::to_string(v) + " has " +
                          std::to_string(counts[v].size()) + " entries, expected " +
                          std::to_string(ds.num_classes));
    }
  }
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    std::size_t wanted = 0;
    for (const auto& row : counts) wanted += row[c];
    if (static_cast<double>(wanted) > available[c]) {
      throw ArgumentError("count table asks for " + std::to_string(wanted) + " samples of class " +
                          std::to_string(c) + " but only " +
                          std::to_string(static_cast<std::size_t>(available[c])) + " exist");
    }
  }

  // Per class: current receiving node and how many it still needs.
  std::vector<std::size_t> node_of(ds.num_classes, 0);
  std::vector<std::size_t> taken(ds.num_classes, 0);
  std::vector<std::vector<LabeledSample>> parts(counts.size());
  for (const auto& s : ds.samples) {
    const std::size_t c = s.label;
    while (node_of[c] < counts.size() && taken[c] == counts[node_of[c]][c]) {
      ++node_of[c];
      taken[c] = 0;
    }
    if (node_of[c] == counts.size()) continue;
    parts[node_of[c]].push_back(s);
    ++taken[c];
  }
  std::vector<DatasetShard> shards;
  shards.reserve(counts.size());
  for (std::size_t v = 0; v < counts.size(); ++v) {
    shards.push_back(make_shard(v, std::move(parts[v]), ds.num_classes));
  }
  return shards;
}

CountTable exponential_binary_counts(std::size_t class0_total, std::size_t class1_total,
                                     std::size_t nodes, double rate) {
  if (nodes < 1) throw ArgumentError("exponential split: need at least one node");
  if (!(rate > 0.0) || !std::isfinite(rate)) throw ArgumentError("exponential split: rate must be positive");

  std::vector<double> share0(nodes), share1(nodes);
  for (std::size_t v = 0; v < nodes; ++v) {
    const double x = static_cast<double>(v);
    share0[v] = rate * std::exp(-rate * x);
    share1[v] = 1.0 - std::exp(-rate * (x + 1.0));
  }
  const auto normalize = [](std::vector<double>& w) {
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= sum;
  };
  normalize(share0);
  normalize(share1);

  CountTable table(nodes, std::vector<std::size_t>(2, 0));
  const auto distribute = [&](const std::vector<double>& share, std::size_t total, std::size_t c) {
    std::size_t remaining = total;
    for (std::size_t v = 0; v + 1 < nodes; ++v) {
      const auto n = static_cast<std::size_t>(std::llround(share[v] * static_cast<double>(total)));
      table[v][c] = std::min(n, remaining);
      remaining -= table[v][c];
    }
    table[nodes - 1][c] = remaining;
  };
  distribute(share0, class0_total, 0);
  distribute(share1, class1_total, 1);
  return table;
}

std::vector<DatasetShard> split_exponential_binary(const LabeledDataset& ds, std::size_t nodes,
                                                   const std::variant<ExponentialRate, CountTable>& mode) {
  if (ds.num_classes != 2) {
    throw ArgumentError("exponential split needs exactly 2 classes, got " + std::to_string(ds.num_classes));
  }
  if (const auto* table = std::get_if<CountTable>(&mode)) {
    if (table->size() != nodes) {
      throw ArgumentError("count table has " + std::to_string(table->size()) + " rows for " +
                          std::to_string(nodes) + " nodes");
    }
    return split_by_count_table(ds, *table);
  }
  const LabelHistogram h = histogram(ds);
  return split_by_count_table(
      ds, exponential_binary_counts(static_cast<std::size_t>(h[0]), static_cast<std::size_t>(h[1]), nodes,
                                    std::get<ExponentialRate>(mode).rate));
}

std::vector<DatasetShard> apply_partition(const LabeledDataset& ds, const PartitionPlan& plan) {
  switch (plan.scheme) {
    case PartitionScheme::contiguous:
      return split_contiguous_labels(ds, plan.nodes);
    case PartitionScheme::random_k: {
      Rng rng = make_rng(plan.seed, Stream::partition);
      return split_random_k_labels(ds, plan.nodes, plan.k_min, plan.k_max, rng);
    }
    case PartitionScheme::exponential:
      return split_exponential_binary(ds, plan.nodes, ExponentialRate{plan.rate});
    case PartitionScheme::table:
      if (plan.table.size() != plan.nodes) {
        throw ArgumentError("count table has " + std::to_string(plan.table.size()) + " rows for " +
                            std::to_string(plan.nodes) + " nodes");
      }
      return split_by_count_table(ds, plan.table);
  }
  throw ArgumentError("unknown partition scheme");
}

}  // namespace tramfl
