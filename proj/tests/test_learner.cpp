#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "tramfl/errors.hpp"
#include "tramfl/learner.hpp"

using namespace tramfl;

namespace {

std::vector<LabeledSample> random_batch(std::size_t n, std::size_t dims, std::size_t classes, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<LabeledSample> batch(n);
  for (auto& s : batch) {
    s.features.resize(dims);
    for (auto& v : s.features) v = normal(rng);
    s.label = rng() % classes;
  }
  return batch;
}

// Random parameters with biases perturbed away from zero so hidden units are
// not all on the same side of the kink.
ModelParams random_params(const ArchSpec& arch, std::uint64_t seed) {
  ModelParams p = init_he(arch, seed);
  Rng rng(seed + 1000);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& v : p.values) v += u(rng);
  return p;
}

}  // namespace

TEST_CASE("ArchSpec parameter count and validation") {
  CHECK(ArchSpec{{4, 3}}.num_params() == 15);
  CHECK(ArchSpec{{8, 32, 10}}.num_params() == 8 * 32 + 32 + 32 * 10 + 10);
  CHECK_THROWS_AS((ArchSpec{{4}}.validate()), ArgumentError);
  CHECK_THROWS_AS((ArchSpec{{4, 0, 2}}.validate()), ArgumentError);
}

TEST_CASE("init_he is deterministic per seed") {
  const ArchSpec arch{{4, 3}};
  CHECK(init_he(arch, 1) == init_he(arch, 1));
  CHECK_FALSE(init_he(arch, 1) == init_he(arch, 2));
}

TEST_CASE("init_he weights have standard deviation sqrt(2 / fan_in), biases zero") {
  const ArchSpec arch{{100, 100}};
  const ModelParams p = init_he(arch, 17);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < 10000; ++i) {
    sum += p.values[i];
    sq += p.values[i] * p.values[i];
  }
  const double mean = sum / 10000.0;
  const double sd = std::sqrt(sq / 10000.0 - mean * mean);
  const double expected = std::sqrt(2.0 / 100.0);
  CHECK(sd >= 0.9 * expected);
  CHECK(sd <= 1.1 * expected);
  for (std::size_t i = 10000; i < p.values.size(); ++i) CHECK(p.values[i] == 0.0);
}

TEST_CASE("init_he biases are zero in every layer") {
  const ArchSpec arch{{3, 5, 4, 2}};
  const ModelParams p = init_he(arch, 3);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
    const std::size_t in = arch.layer_sizes[l], out = arch.layer_sizes[l + 1];
    for (std::size_t o = 0; o < out; ++o) CHECK(p.values[offset + in * out + o] == 0.0);
    offset += in * out + out;
  }
}

TEST_CASE("forward with zero parameters is uniform") {
  const ModelParams p = zero_params(ArchSpec{{3, 6, 5}});
  const auto probs = forward(p, std::vector<double>{1.0, -2.0, 7.0});
  REQUIRE(probs.size() == 5);
  for (double v : probs) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("forward of an identity linear layer matches the closed-form softmax") {
  ModelParams p = zero_params(ArchSpec{{2, 2}});
  p.values[0] = 1.0;  // W[0][0]
  p.values[3] = 1.0;  // W[1][1]
  const auto probs = forward(p, std::vector<double>{10.0, 0.0});
  CHECK(probs[0] == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-14));
  CHECK(probs[1] == doctest::Approx(1.0 / (1.0 + std::exp(10.0))).epsilon(1e-12));
}

TEST_CASE("forward outputs normalize for random parameters and inputs") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const ArchSpec arch{{5, 7, 4}};
    ModelParams p = init_he(arch, trial);
    for (auto& v : p.values) v *= 5.0;  // large logits exercise the max subtraction
    const auto x = random_batch(1, 5, 4, rng)[0].features;
    const auto probs = forward(p, x);
    const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
    CHECK(std::abs(sum - 1.0) < 1e-9);
    for (double v : probs) CHECK(v >= 0.0);
  }
}

TEST_CASE("forward rejects a dimension mismatch") {
  const ModelParams p = zero_params(ArchSpec{{3, 2}});
  CHECK_THROWS_AS((forward(p, std::vector<double>{1.0, 2.0})), ArgumentError);
}

TEST_CASE("loss with zero parameters is ln |C|") {
  Rng rng(1);
  const ModelParams p = zero_params(ArchSpec{{4, 10}});
  const auto batch = random_batch(13, 4, 10, rng);
  CHECK(loss_and_grad(p, batch).loss == doctest::Approx(std::log(10.0)).epsilon(1e-14));
}

TEST_CASE("duplicating the batch leaves loss and gradient unchanged") {
  Rng rng(2);
  const ModelParams p = random_params(ArchSpec{{4, 8, 3}}, 5);
  auto batch = random_batch(6, 4, 3, rng);
  const LossAndGrad once = loss_and_grad(p, batch);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const LossAndGrad twice = loss_and_grad(p, doubled);
  CHECK(twice.loss == doctest::Approx(once.loss).epsilon(1e-13));
  for (std::size_t i = 0; i < once.grad.size(); ++i) {
    CHECK(std::abs(twice.grad[i] - once.grad[i]) < 1e-13);
  }
}

TEST_CASE("loss_and_grad rejects an empty batch") {
  const ModelParams p = zero_params(ArchSpec{{2, 2}});
  CHECK_THROWS_AS((loss_and_grad(p, std::vector<LabeledSample>{})), ArgumentError);
}

TEST_CASE("finite differences agree with backprop on a linear model") {
  Rng rng(3);
  const ModelParams p = random_params(ArchSpec{{5, 4}}, 11);
  const auto batch = random_batch(8, 5, 4, rng);
  CHECK(finite_diff_check(p, batch, 1e-5) < 1e-6);
}

TEST_CASE("finite differences agree with backprop on MLP [4,8,3]") {
  Rng rng(4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ModelParams p = random_params(ArchSpec{{4, 8, 3}}, seed);
    const auto batch = random_batch(5, 4, 3, rng);
    CHECK(finite_diff_check(p, batch, 1e-5) < 1e-4);
  }
}

TEST_CASE("finite differences agree with backprop on random architectures up to 500 parameters") {
  Rng rng(5);
  int checked = 0;
  while (checked < 30) {
    std::vector<std::size_t> sizes{1 + rng() % 8};
    const std::size_t hidden_layers = rng() % 3;
    for (std::size_t h = 0; h < hidden_layers; ++h) sizes.push_back(1 + rng() % 12);
    sizes.push_back(2 + rng() % 5);
    const ArchSpec arch{sizes};
    if (arch.num_params() > 500) continue;
    const ModelParams p = random_params(arch, rng());
    const auto batch = random_batch(1 + rng() % 6, sizes.front(), sizes.back(), rng);
    CHECK(finite_diff_check(p, batch, 1e-5) < 1e-4);
    ++checked;
  }
}

TEST_CASE("finite_diff_check rejects a non-positive eps") {
  const ModelParams p = zero_params(ArchSpec{{2, 2}});
  const std::vector<LabeledSample> batch{{{1.0, 0.0}, 0}};
  CHECK_THROWS_AS((finite_diff_check(p, batch, 0.0)), ArgumentError);
}

TEST_CASE("sgd_step arithmetic") {
  ModelParams p{ArchSpec{{1, 1}}, {1.0, 2.0}};
  CHECK(sgd_step(p, std::vector<double>{0.5, 0.5}, 1.0).values == std::vector<double>{0.5, 1.5});
  CHECK(sgd_step(p, std::vector<double>{0.0, 0.0}, 0.3) == p);
  CHECK_THROWS_AS((sgd_step(p, std::vector<double>{1.0}, 0.1)), ArgumentError);
  CHECK_THROWS_AS((sgd_step(p, std::vector<double>{1.0, 1.0}, 0.0)), ArgumentError);
}

TEST_CASE("two sgd steps equal one step with the summed gradient") {
  const ModelParams p{ArchSpec{{1, 2}}, {0.25, -1.0, 3.0, 0.5}};
  const std::vector<double> g1{0.5, -0.25, 1.0, 2.0}, g2{-0.5, 0.75, 0.25, 0.125};
  std::vector<double> sum(4);
  for (std::size_t i = 0; i < 4; ++i) sum[i] = g1[i] + g2[i];
  const ModelParams two = sgd_step(sgd_step(p, g1, 0.5), g2, 0.5);
  const ModelParams one = sgd_step(p, sum, 0.5);
  for (std::size_t i = 0; i < 4; ++i) CHECK(two.values[i] == doctest::Approx(one.values[i]).epsilon(1e-15));
}

TEST_CASE("a line-searched sgd step decreases the batch loss") {
  Rng rng(6);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ModelParams p = random_params(ArchSpec{{3, 6, 4}}, seed);
    const auto batch = random_batch(10, 3, 4, rng);
    const LossAndGrad lg = loss_and_grad(p, batch);
    double norm = 0.0;
    for (double g : lg.grad) norm += g * g;
    if (std::sqrt(norm) < 1e-12) continue;
    double eta = 1.0;
    bool decreased = false;
    for (int halvings = 0; halvings < 40 && !decreased; ++halvings, eta /= 2.0) {
      decreased = batch_loss(sgd_step(p, lg.grad, eta), batch) < lg.loss;
    }
    CHECK(decreased);
  }
}

TEST_CASE("evaluate with zero parameters on a balanced set picks class 0") {
  LabeledDataset ds{{}, 10, 2};
  for (std::size_t c = 0; c < 10; ++c) {
    for (int n = 0; n < 7; ++n) ds.samples.push_back({{double(n), -double(c)}, c});
  }
  const Evaluation e = evaluate(zero_params(ArchSpec{{2, 10}}), ds);
  CHECK(e.accuracy == doctest::Approx(0.1));
  CHECK(e.loss == doctest::Approx(std::log(10.0)));
}

TEST_CASE("evaluate reaches 1.0 with separating parameters") {
  // Class = sign of x0; logits (x0, -x0).
  ModelParams p{ArchSpec{{1, 2}}, {1.0, -1.0, 0.0, 0.0}};
  LabeledDataset ds{{}, 2, 1};
  for (int i = 1; i <= 20; ++i) {
    ds.samples.push_back({{double(i)}, 0});
    ds.samples.push_back({{-double(i)}, 1});
  }
  CHECK(evaluate(p, ds).accuracy == 1.0);
  CHECK_THROWS_AS((evaluate(p, LabeledDataset{{}, 2, 1})), ArgumentError);
}

TEST_CASE("evaluate accuracy stays within [0, 1]") {
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    LabeledDataset ds{random_batch(30, 3, 4, rng), 4, 3};
    const Evaluation e = evaluate(random_params(ArchSpec{{3, 5, 4}}, t), ds);
    CHECK(e.accuracy >= 0.0);
    CHECK(e.accuracy <= 1.0);
    CHECK(e.loss >= 0.0);
  }
}

TEST_CASE("average_params examples") {
  const ArchSpec arch{{1, 1}};
  const ModelParams a{arch, {0.0, 0.0}}, b{arch, {2.0, 4.0}};
  const std::vector<ModelParams> ab{a, b};
  CHECK(average_params(ab, std::vector<double>{1.0, 1.0}).values == std::vector<double>{1.0, 2.0});
  CHECK(average_params(std::vector<ModelParams>{b}, std::vector<double>{1.0}) == b);
  CHECK(average_params(std::vector<ModelParams>{b, b}, std::vector<double>{0.3, 5.0}).values ==
        std::vector<double>{2.0, 4.0});
  CHECK_THROWS_AS((average_params(std::vector<ModelParams>{a, zero_params(ArchSpec{{2, 1}})},
                                 std::vector<double>{1.0, 1.0})),
                  ArgumentError);
  CHECK_THROWS_AS((average_params(ab, std::vector<double>{0.0, 0.0})), ArgumentError);
  CHECK_THROWS_AS((average_params(ab, std::vector<double>{-1.0, 2.0})), ArgumentError);
}

TEST_CASE("average_params is permutation invariant") {
  const ArchSpec arch{{3, 4}};
  std::vector<ModelParams> models;
  std::vector<double> weights{0.2, 1.5, 0.7, 3.0};
  for (int i = 0; i < 4; ++i) models.push_back(init_he(arch, i));
  const ModelParams base = average_params(models, weights);
  std::vector<std::size_t> order{3, 1, 0, 2};
  std::vector<ModelParams> pm;
  std::vector<double> pw;
  for (std::size_t i : order) {
    pm.push_back(models[i]);
    pw.push_back(weights[i]);
  }
  const ModelParams permuted = average_params(pm, pw);
  for (std::size_t i = 0; i < base.values.size(); ++i) {
    CHECK(permuted.values[i] == doctest::Approx(base.values[i]).epsilon(1e-14));
  }
}

TEST_CASE("checkpoint save/load round-trips and the digest tracks values") {
  const ModelParams p = init_he(ArchSpec{{3, 4, 2}}, 8);
  const auto path = std::filesystem::temp_directory_path() / "tramfl_test_model.bin";
  save_params(p, path);
  CHECK(std::filesystem::file_size(path) == 8 * (1 + 3 + p.values.size()));
  CHECK(load_params(path) == p);
  CHECK(params_digest(p) == params_digest(load_params(path)));
  ModelParams q = p;
  q.values[0] += 1e-12;
  CHECK(params_digest(p) != params_digest(q));
}
