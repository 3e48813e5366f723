#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "tramfl/datasets.hpp"
#include "tramfl/rng.hpp"

namespace tramfl {

// counts[node][class]
using CountTable = std::vector<std::vector<std::size_t>>;

// Label index groups for a contiguous split: sizes differ by at most one and
// the larger groups go to the last nodes (10 labels, 3 nodes -> 3,3,4).
std::vector<std::vector<std::size_t>> contiguous_label_groups(std::size_t num_classes,
                                                              std::size_t nodes);

// Every sample whose label is in group v goes to node v. Throws ArgumentError
// when nodes > num_classes.
std::vector<DatasetShard> split_contiguous_labels(const LabeledDataset& ds, std::size_t nodes);

/// Draws, per node, a label count uniformly from [k_min, k_max] and then a
/// uniformly random label set of that size. The whole assignment is redrawn
/// until every label is held by at least one node (at most 10,000 attempts).
/// Returned sets are sorted.
std::vector<std::vector<std::size_t>> random_label_sets(std::size_t num_classes, std::size_t nodes,
                                                        std::size_t k_min, std::size_t k_max,
                                                        Rng& rng);

// Each node receives every sample of each of its labels; labels held by more
// than one node are duplicated into each holder's shard.
std::vector<DatasetShard> split_random_k_labels(const LabeledDataset& ds, std::size_t nodes,
                                                std::size_t k_min, std::size_t k_max, Rng& rng);

// Node v holds the samples of its listed labels.
std::vector<DatasetShard> split_by_label_sets(const LabeledDataset& ds,
                                              const std::vector<std::vector<std::size_t>>& sets);

// Assigns exactly counts[v][c] samples of class c to node v, walking the
// dataset in order. Columns may sum to less than the class total; leftovers
// are dropped.
std::vector<DatasetShard> split_by_count_table(const LabeledDataset& ds, const CountTable& counts);

struct ExponentialRate {
  double rate = 1.0;
};

/// Two-class skew. Class 0 is spread proportionally to rate*exp(-rate*v) and
/// class 1 proportionally to the cumulative mass 1 - exp(-rate*(v+1)), so node 0
/// is class-0 heavy and later nodes are class-1 heavy. Counts are rounded and
/// the last node absorbs the residue.
CountTable exponential_binary_counts(std::size_t class0_total, std::size_t class1_total,
                                     std::size_t nodes, double rate);

std::vector<DatasetShard> split_exponential_binary(const LabeledDataset& ds, std::size_t nodes,
                                                   const std::variant<ExponentialRate, CountTable>& mode);

enum class PartitionScheme { contiguous, random_k, exponential, table };

struct PartitionPlan {
  PartitionScheme scheme = PartitionScheme::contiguous;
  std::size_t nodes = 2;
  std::size_t k_min = 1;
  std::size_t k_max = 1;
  double rate = 1.0;
  CountTable table;
  std::uint64_t seed = 0;

  bool operator==(const PartitionPlan&) const = default;
};

std::vector<DatasetShard> apply_partition(const LabeledDataset& ds, const PartitionPlan& plan);

}  // namespace tramfl
