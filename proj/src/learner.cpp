#include "tramfl/learner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "tramfl/errors.hpp"
#include "tramfl/rng.hpp"

namespace tramfl {

std::size_t ArchSpec::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return n;
}

void ArchSpec::validate() const {
  if (layer_sizes.size() < 2) throw ArgumentError("architecture needs at least input and output sizes");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw ArgumentError("architecture layer sizes must be positive");
  }
}

namespace {

void check_layout(const ModelParams& p) {
  p.arch.validate();
  if (p.values.size() != p.arch.num_params()) {
    throw ArgumentError("parameter vector has " + std::to_string(p.values.size()) +
                        " entries, architecture needs " + std::to_string(p.arch.num_params()));
  }
}

// Scratch space for one forward/backward pass.
class Network {
 public:
  explicit Network(const ModelParams& p) : p_(p), sizes_(p.arch.layer_sizes) {
    const std::size_t layers = sizes_.size();
    acts_.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) acts_[l].resize(sizes_[l]);
    deltas_.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) deltas_[l].resize(sizes_[l]);
  }

  // Runs the network and leaves the output logits in acts_.back().
  void run(std::span<const double> x) {
    if (x.size() != sizes_.front()) {
      throw ArgumentError("input has " + std::to_string(x.size()) + " features, model expects " +
                          std::to_string(sizes_.front()));
    }
    std::copy(x.begin(), x.end(), acts_[0].begin());
    std::size_t offset = 0;
    const std::size_t last = sizes_.size() - 1;
    for (std::size_t l = 0; l < last; ++l) {
      const std::size_t in = sizes_[l];
      const std::size_t out = sizes_[l + 1];
      const double* w = p_.values.data() + offset;
      const double* b = w + in * out;
      const auto& a = acts_[l];
      auto& z = acts_[l + 1];
      for (std::size_t o = 0; o < out; ++o) {
        double sum = b[o];
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) sum += row[i] * a[i];
        z[o] = (l + 1 < last && sum < 0.0) ? 0.0 : sum;
      }
      offset += in * out + out;
    }
  }

  std::span<const double> logits() const { return acts_.back(); }

  // log(sum exp(logits)) computed with max subtraction.
  double log_partition() const {
    const auto& z = acts_.back();
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
  }

  // Accumulates d(-log p_label)/dw into grad after run().
  void backprop(std::size_t label, std::vector<double>& grad) {
    const std::size_t last = sizes_.size() - 1;
    const double lse = log_partition();
    auto& d_out = deltas_[last];
    for (std::size_t c = 0; c < sizes_[last]; ++c) d_out[c] = std::exp(acts_[last][c] - lse);
    d_out[label] -= 1.0;

    std::size_t offset = p_.values.size();
    for (std::size_t l = last; l-- > 0;) {
      const std::size_t in = sizes_[l];
      const std::size_t out = sizes_[l + 1];
      offset -= in * out + out;
      const double* w = p_.values.data() + offset;
      double* gw = grad.data() + offset;
      double* gb = gw + in * out;
      const auto& a = acts_[l];
      const auto& d = deltas_[l + 1];
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += d[o];
        double* grow = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += d[o] * a[i];
      }
      if (l == 0) break;
      auto& d_prev = deltas_[l];
      for (std::size_t i = 0; i < in; ++i) {
        if (a[i] <= 0.0) {
          d_prev[i] = 0.0;
          continue;
        }
        double sum = 0.0;
        for (std::size_t o = 0; o < out; ++o) sum += w[o * in + i] * d[o];
        d_prev[i] = sum;
      }
    }
  }

 private:
  const ModelParams& p_;
  const std::vector<std::size_t>& sizes_;
  std::vector<std::vector<double>> acts_;
  std::vector<std::vector<double>> deltas_;
};

void check_label(std::size_t label, std::size_t num_classes) {
  if (label >= num_classes) {
    throw ArgumentError("label " + std::to_string(label) + " out of range for " +
                        std::to_string(num_classes) + " classes");
  }
}

}  // namespace

ModelParams zero_params(const ArchSpec& arch) {
  arch.validate();
  return ModelParams{arch, std::vector<double>(arch.num_params(), 0.0)};
}

ModelParams init_he(const ArchSpec& arch, std::uint64_t seed) {
  ModelParams p = zero_params(arch);
  Rng rng = make_rng(seed, Stream::init);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
    const std::size_t in = arch.layer_sizes[l];
    const std::size_t out = arch.layer_sizes[l + 1];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    for (std::size_t k = 0; k < in * out; ++k) p.values[offset + k] = normal(rng);
    offset += in * out + out;
  }
  return p;
}

std::vector<double> forward(const ModelParams& p, std::span<const double> x) {
  check_layout(p);
  Network net(p);
  net.run(x);
  const double lse = net.log_partition();
  std::vector<double> probs(net.logits().begin(), net.logits().end());
  for (auto& v : probs) v = std::exp(v - lse);
  return probs;
}

LossAndGrad loss_and_grad(const ModelParams& p, std::span<const LabeledSample> batch) {
  if (batch.empty()) throw ArgumentError("loss_and_grad: empty batch");
  check_layout(p);
  Network net(p);
  LossAndGrad out;
  out.grad.assign(p.values.size(), 0.0);
  for (const auto& s : batch) {
    check_label(s.label, p.arch.num_classes());
    net.run(s.features);
    out.loss += net.log_partition() - net.logits()[s.label];
    net.backprop(s.label, out.grad);
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  out.loss *= scale;
  for (auto& g : out.grad) g *= scale;
  return out;
}

double batch_loss(const ModelParams& p, std::span<const LabeledSample> batch) {
  if (batch.empty()) throw ArgumentError("batch_loss: empty batch");
  check_layout(p);
  Network net(p);
  double loss = 0.0;
  for (const auto& s : batch) {
    check_label(s.label, p.arch.num_classes());
    net.run(s.features);
    loss += net.log_partition() - net.logits()[s.label];
  }
  return loss / static_cast<double>(batch.size());
}

ModelParams sgd_step(ModelParams p, std::span<const double> grad, double eta) {
  if (grad.size() != p.values.size()) {
    throw ArgumentError("sgd_step: gradient has " + std::to_string(grad.size()) +
                        " entries, parameters have " + std::to_string(p.values.size()));
  }
  if (!(eta > 0.0)) throw ArgumentError("sgd_step: learning rate must be positive");
  for (std::size_t i = 0; i < grad.size(); ++i) p.values[i] -= eta * grad[i];
  return p;
}

Evaluation evaluate(const ModelParams& p, const LabeledDataset& ds) {
  if (ds.empty()) throw ArgumentError("evaluate: empty dataset");
  check_layout(p);
  Network net(p);
  std::size_t correct = 0;
  double loss = 0.0;
  for (const auto& s : ds.samples) {
    check_label(s.label, p.arch.num_classes());
    net.run(s.features);
    const auto z = net.logits();
    // max_element returns the first maximum, i.e. the lowest class index.
    const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    if (best == s.label) ++correct;
    loss += net.log_partition() - z[s.label];
  }
  const auto n = static_cast<double>(ds.size());
  return Evaluation{static_cast<double>(correct) / n, loss / n};
}

double finite_diff_check(const ModelParams& p, std::span<const LabeledSample> batch, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("finite_diff_check: eps must be positive");
  const GradVector g = loss_and_grad(p, batch).grad;
  ModelParams probe = p;
  double worst = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    probe.values[i] = p.values[i] + eps;
    const double up = batch_loss(probe, batch);
    probe.values[i] = p.values[i] - eps;
    const double down = batch_loss(probe, batch);
    probe.values[i] = p.values[i];
    const double fd = (up - down) / (2.0 * eps);
    const double err = std::abs(fd - g[i]) / std::max(1e-8, std::abs(fd) + std::abs(g[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

ModelParams average_params(std::span<const ModelParams> models, std::span<const double> weights) {
  if (models.empty()) throw ArgumentError("average_params: no models");
  if (weights.size() != models.size()) throw ArgumentError("average_params: one weight per model required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ArgumentError("average_params: weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ArgumentError("average_params: weights must have a positive sum");
  for (const auto& m : models) {
    if (m.arch != models.front().arch || m.values.size() != models.front().values.size()) {
      throw ArgumentError("average_params: architecture mismatch");
    }
  }
  ModelParams out{models.front().arch, std::vector<double>(models.front().values.size(), 0.0)};
  for (std::size_t m = 0; m < models.size(); ++m) {
    const double w = weights[m] / total;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += w * models[m].values[i];
  }
  return out;
}

std::uint64_t params_digest(const ModelParams& p) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : p.values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (bits >> (8 * byte)) & 0xffu;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void save_params(const ModelParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  put_u64(out, p.arch.layer_sizes.size());
  for (std::size_t s : p.arch.layer_sizes) put_u64(out, s);
  for (double v : p.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  ModelParams p;
  const std::uint64_t layers = get_u64(in);
  if (layers < 2 || layers > 1024) throw std::runtime_error("bad layer count in checkpoint");
  for (std::uint64_t l = 0; l < layers; ++l) p.arch.layer_sizes.push_back(get_u64(in));
  p.arch.validate();
  p.values.resize(p.arch.num_params());
  for (auto& v : p.values) v = std::bit_cast<double>(get_u64(in));
  return p;
}

}  // namespace tramfl
