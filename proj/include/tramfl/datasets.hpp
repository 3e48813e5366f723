#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "tramfl/rng.hpp"

namespace tramfl {

struct LabeledSample {
  std::vector<double> features;
  std::size_t label = 0;

  bool operator==(const LabeledSample&) const = default;
};

struct LabeledDataset {
  std::vector<LabeledSample> samples;
  std::size_t num_classes = 0;
  std::size_t dims = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  bool operator==(const LabeledDataset&) const = default;
};

// Per-class sample counts. Real-valued so the same type also holds expected
// (fractional) usage.
struct LabelHistogram {
  std::vector<double> counts;

  LabelHistogram() = default;
  explicit LabelHistogram(std::size_t num_classes) : counts(num_classes, 0.0) {}
  explicit LabelHistogram(std::vector<double> c) : counts(std::move(c)) {}

  std::size_t size() const { return counts.size(); }
  double total() const;
  double operator[](std::size_t c) const { return counts[c]; }
  double& operator[](std::size_t c) { return counts[c]; }

  // Throws ArgumentError on length mismatch.
  LabelHistogram& operator+=(const LabelHistogram& other);
  friend LabelHistogram operator+(LabelHistogram a, const LabelHistogram& b) { return a += b; }

  bool operator==(const LabelHistogram&) const = default;
};

// One node's local data.
struct DatasetShard {
  std::size_t node_id = 0;
  std::vector<LabeledSample> samples;
  LabelHistogram hist;

  // N_i, the number of samples held by the node.
  std::size_t total() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// Builds a shard from samples, computing its histogram.
DatasetShard make_shard(std::size_t node_id, std::vector<LabeledSample> samples,
                        std::size_t num_classes);

/// Gaussian-blob classification data. Class means sit at `separation` times the
/// vertices of a cross-polytope (+e_0, ..., +e_{d-1}, -e_0, ...) while
/// num_classes <= 2*dims, and at seeded random unit directions beyond that.
/// Samples are unit-variance isotropic around their class mean, class-major order.
LabeledDataset generate_synthetic(std::size_t num_classes, std::size_t dims,
                                  std::size_t per_class, double separation, std::uint64_t seed);

// Moves the last `per_class` samples of every class into a held-out set.
// Returns {train, test}; relative order is preserved in both.
std::pair<LabeledDataset, LabeledDataset> holdout_per_class(const LabeledDataset& ds,
                                                            std::size_t per_class);

/// Reads `label,f1,...,fd` rows. num_classes = 1 + max label, dims from the
/// first data row. Throws ParseError (with line number) on ragged or
/// non-numeric rows, negative labels, or a file with no data rows.
LabeledDataset load_csv(const std::filesystem::path& path, bool has_header = false);

// Writes rows in the format load_csv reads, shortest round-trip decimals.
void write_csv(const LabeledDataset& ds, const std::filesystem::path& path);

LabelHistogram histogram(const LabeledDataset& ds);
LabelHistogram histogram(std::span<const LabeledSample> samples, std::size_t num_classes);
inline LabelHistogram histogram(const DatasetShard& shard) { return shard.hist; }

struct Minibatch {
  std::vector<LabeledSample> samples;
  LabelHistogram counts;
};

/// Draws `batch_size` samples uniformly without replacement within the batch
/// (with replacement only when the shard is smaller than the batch) and
/// returns them with their realized label counts.
Minibatch draw_minibatch(const DatasetShard& shard, std::size_t batch_size, Rng& rng);

}  // namespace tramfl
