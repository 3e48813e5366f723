#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tramfl/datasets.hpp"

namespace tramfl {

// Fully connected network: ReLU on hidden layers, softmax output.
// layer_sizes = {input_dims, hidden..., num_classes}.
struct ArchSpec {
  std::vector<std::size_t> layer_sizes;

  std::size_t input_dims() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  std::size_t num_params() const;
  // Throws ArgumentError unless there are >= 2 sizes, all positive.
  void validate() const;

  bool operator==(const ArchSpec&) const = default;
};

// Flat parameter vector. Per layer: the weight matrix (out x in, row-major)
// followed by its bias vector, layers in order.
struct ModelParams {
  ArchSpec arch;
  std::vector<double> values;

  bool operator==(const ModelParams&) const = default;
};

using GradVector = std::vector<double>;

// Weights ~ N(0, 2/fan_in), biases zero.
ModelParams init_he(const ArchSpec& arch, std::uint64_t seed);

ModelParams zero_params(const ArchSpec& arch);

// Class probabilities for one input.
std::vector<double> forward(const ModelParams& p, std::span<const double> x);

struct LossAndGrad {
  double loss = 0.0;
  GradVector grad;
};

// Mean cross-entropy over the batch and its gradient by backpropagation.
LossAndGrad loss_and_grad(const ModelParams& p, std::span<const LabeledSample> batch);

// Mean cross-entropy only.
double batch_loss(const ModelParams& p, std::span<const LabeledSample> batch);

ModelParams sgd_step(ModelParams p, std::span<const double> grad, double eta);

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Argmax ties resolve to the lowest class index.
Evaluation evaluate(const ModelParams& p, const LabeledDataset& ds);

/// Compares the backprop gradient against central differences
/// (F(w + eps e_i) - F(w - eps e_i)) / (2 eps) coordinate by coordinate and
/// returns max_i |fd_i - g_i| / max(1e-8, |fd_i| + |g_i|).
double finite_diff_check(const ModelParams& p, std::span<const LabeledSample> batch, double eps);

// Convex combination with weights normalized to sum to one.
ModelParams average_params(std::span<const ModelParams> models, std::span<const double> weights);

// FNV-1a over the little-endian bytes of the values.
std::uint64_t params_digest(const ModelParams& p);

/// Checkpoint layout, little-endian: u64 layer count, u64 per layer size,
/// then the f64 values.
void save_params(const ModelParams& p, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace tramfl
