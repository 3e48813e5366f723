#include "tramfl/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <string_view>

#include "tramfl/errors.hpp"
#include "tramfl/format.hpp"

namespace tramfl {

double LabelHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0.0);
}

LabelHistogram& LabelHistogram::operator+=(const LabelHistogram& other) {
  if (other.size() != size()) {
    throw ArgumentError("histogram length mismatch: " + std::to_string(size()) + " vs " +
                        std::to_string(other.size()));
  }
  for (std::size_t c = 0; c < counts.size(); ++c) counts[c] += other.counts[c];
  return *this;
}

DatasetShard make_shard(std::size_t node_id, std::vector<LabeledSample> samples,
                        std::size_t num_classes) {
  DatasetShard shard;
  shard.node_id = node_id;
  shard.hist = histogram(samples, num_classes);
  shard.samples = std::move(samples);
  return shard;
}

namespace {

std::vector<std::vector<double>> class_means(std::size_t num_classes, std::size_t dims,
                                             double separation, std::uint64_t seed) {
  std::vector<std::vector<double>> means(num_classes, std::vector<double>(dims, 0.0));
  if (num_classes <= 2 * dims) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      means[c][c % dims] = c < dims ? separation : -separation;
    }
    return means;
  }
  Rng rng = make_rng(seed, Stream::synthetic_means);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& mean : means) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& v : mean) {
        v = normal(rng);
        norm += v * v;
      }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (auto& v : mean) v *= separation / norm;
  }
  return means;
}

}  // namespace

LabeledDataset generate_synthetic(std::size_t num_classes, std::size_t dims,
                                  std::size_t per_class, double separation, std::uint64_t seed) {
  if (num_classes < 2) throw ArgumentError("generate_synthetic: num_classes must be >= 2");
  if (dims < 1) throw ArgumentError("generate_synthetic: dims must be >= 1");
  if (per_class < 1) throw ArgumentError("generate_synthetic: per_class must be >= 1");
  if (!(separation > 0.0) || !std::isfinite(separation)) {
    throw ArgumentError("generate_synthetic: separation must be positive");
  }

  const auto means = class_means(num_classes, dims, separation, seed);
  Rng rng = make_rng(seed, Stream::synthetic_samples);
  std::normal_distribution<double> normal(0.0, 1.0);

  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.dims = dims;
  ds.samples.reserve(num_classes * per_class);
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t n = 0; n < per_class; ++n) {
      LabeledSample s;
      s.label = c;
      s.features.resize(dims);
      for (std::size_t k = 0; k < dims; ++k) s.features[k] = means[c][k] + normal(rng);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> holdout_per_class(const LabeledDataset& ds,
                                                            std::size_t per_class) {
  const LabelHistogram hist = histogram(ds);
  std::vector<std::size_t> keep(ds.num_classes);
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    const auto have = static_cast<std::size_t>(hist[c]);
    if (have < per_class) {
      throw ArgumentError("holdout_per_class: class " + std::to_string(c) + " has only " +
                          std::to_string(have) + " samples");
    }
    keep[c] = have - per_class;
  }

  LabeledDataset train{{}, ds.num_classes, ds.dims};
  LabeledDataset test{{}, ds.num_classes, ds.dims};
  std::vector<std::size_t> seen(ds.num_classes, 0);
  for (const auto& s : ds.samples) {
    if (seen[s.label]++ < keep[s.label]) {
      train.samples.push_back(s);
    } else {
      test.samples.push_back(s);
    }
  }
  return {std::move(train), std::move(test)};
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path.string());

  LabeledDataset ds;
  std::size_t max_label = 0;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() < 2) throw ParseError(line_no, "expected label and at least one feature");
    if (ds.samples.empty()) {
      ds.dims = fields.size() - 1;
    } else if (fields.size() - 1 != ds.dims) {
      throw ParseError(line_no, "expected " + std::to_string(ds.dims) + " features, got " +
                                    std::to_string(fields.size() - 1));
    }

    LabeledSample s;
    const auto label_field = fields[0];
    if (!label_field.empty() && label_field.front() == '-') {
      throw ParseError(line_no, "negative label");
    }
    if (!parse_number(label_field, s.label)) {
      throw ParseError(line_no, "label is not a non-negative integer: '" +
                                    std::string(label_field) + "'");
    }
    s.features.resize(ds.dims);
    for (std::size_t k = 0; k < ds.dims; ++k) {
      if (!parse_number(fields[k + 1], s.features[k]) || !std::isfinite(s.features[k])) {
        throw ParseError(line_no, "feature " + std::to_string(k + 1) + " is not a finite number: '" +
                                      std::string(fields[k + 1]) + "'");
      }
    }
    max_label = std::max(max_label, s.label);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw ParseError(line_no == 0 ? 1 : line_no, "no data rows");
  ds.num_classes = max_label + 1;
  return ds;
}

void write_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::string row;
  for (const auto& s : ds.samples) {
    row = std::to_string(s.label);
    for (double v : s.features) {
      row += ',';
      row += format_double(v);
    }
    row += '\n';
    out << row;
  }
}

LabelHistogram histogram(std::span<const LabeledSample> samples, std::size_t num_classes) {
  LabelHistogram h(num_classes);
  for (const auto& s : samples) {
    if (s.label >= num_classes) {
      throw ArgumentError("label " + std::to_string(s.label) + " out of range for " +
                          std::to_string(num_classes) + " classes");
    }
    h[s.label] += 1.0;
  }
  return h;
}

LabelHistogram histogram(const LabeledDataset& ds) { return histogram(ds.samples, ds.num_classes); }

Minibatch draw_minibatch(const DatasetShard& shard, std::size_t batch_size, Rng& rng) {
  if (shard.empty()) throw StateError("draw_minibatch: shard " + std::to_string(shard.node_id) + " is empty");
  if (batch_size < 1) throw ArgumentError("draw_minibatch: batch size must be >= 1");

  const std::size_t n = shard.total();
  std::vector<std::size_t> picks;
  picks.reserve(batch_size);
  if (n < batch_size) {
    std::uniform_int_distribution<std::size_t> any(0, n - 1);
    for (std::size_t b = 0; b < batch_size; ++b) picks.push_back(any(rng));
  } else if (2 * batch_size > n) {
    // Dense draw: partial Fisher-Yates over all indices.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t b = 0; b < batch_size; ++b) {
      std::uniform_int_distribution<std::size_t> pick(b, n - 1);
      std::swap(idx[b], idx[pick(rng)]);
      picks.push_back(idx[b]);
    }
  } else {
    // Sparse draw: Floyd's algorithm, then the fixed insertion order.
    for (std::size_t j = n - batch_size; j < n; ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, j);
      const std::size_t t = pick(rng);
      if (std::find(picks.begin(), picks.end(), t) == picks.end()) {
        picks.push_back(t);
      } else {
        picks.push_back(j);
      }
    }
  }

  Minibatch batch;
  batch.counts = LabelHistogram(shard.hist.size());
  batch.samples.reserve(batch_size);
  for (std::size_t i : picks) {
    batch.samples.push_back(shard.samples[i]);
    batch.counts[shard.samples[i].label] += 1.0;
  }
  return batch;
}

}  // namespace tramfl
