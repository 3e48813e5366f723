#include <doctest.h>

#include <map>
#include <set>

#include "tramfl/errors.hpp"
#include "tramfl/routing.hpp"

using namespace tramfl;

namespace {

DatasetShard shard_from_counts(std::size_t node, const std::vector<std::size_t>& counts) {
  std::vector<LabeledSample> samples;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t n = 0; n < counts[c]; ++n) samples.push_back({{0.0}, c});
  }
  return make_shard(node, std::move(samples), counts.size());
}

// Independent oracle: naive two-pass variance of every candidate, argmin with
// lowest-index ties, empty shards skipped.
std::size_t brute_force_next(const std::vector<double>& ledger, const std::vector<std::vector<std::size_t>>& counts,
                             std::size_t batch, std::size_t interval) {
  std::size_t best = counts.size();
  double best_var = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    double n = 0.0;
    for (std::size_t c : counts[j]) n += static_cast<double>(c);
    if (n == 0.0) continue;
    std::vector<double> h(ledger.size());
    for (std::size_t c = 0; c < ledger.size(); ++c) {
      h[c] = ledger[c] + static_cast<double>(batch * interval) / n * static_cast<double>(counts[j][c]);
    }
    double mean = 0.0;
    for (double v : h) mean += v;
    mean /= static_cast<double>(h.size());
    double var = 0.0;
    for (double v : h) var += (v - mean) * (v - mean);
    var /= static_cast<double>(h.size());
    if (best == counts.size() || var < best_var) {
      best = j;
      best_var = var;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("dispersion is the population variance") {
  CHECK(dispersion(LabelHistogram({5.0, 5.0, 5.0})) == 0.0);
  CHECK(dispersion(LabelHistogram({0.0, 3.0})) == doctest::Approx(2.25));
  CHECK(dispersion(LabelHistogram({1.0, 2.0, 3.0})) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(dispersion(LabelHistogram()), ArgumentError);
}

TEST_CASE("dispersion is non-negative, zero only when uniform, and translation invariant") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int t = 0; t < 200; ++t) {
    LabelHistogram h(2 + rng() % 9);
    for (auto& v : h.counts) v = std::floor(u(rng));
    const double d = dispersion(h);
    CHECK(d >= 0.0);
    bool uniform = true;
    for (double v : h.counts) uniform = uniform && v == h[0];
    CHECK((d == 0.0) == uniform);
    LabelHistogram shifted = h;
    for (auto& v : shifted.counts) v += 37.0;
    CHECK(dispersion(shifted) == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("expected_usage scales the shard histogram by B*T/N") {
  CHECK(expected_usage(shard_from_counts(0, {10, 0}), {2, 3}) == LabelHistogram({6.0, 0.0}));
  CHECK(expected_usage(shard_from_counts(0, {5, 5}), {1, 1}) == LabelHistogram({0.5, 0.5}));
  CHECK_THROWS_AS(expected_usage(shard_from_counts(0, {0, 0}), {1, 1}), ArgumentError);
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::size_t> counts(4);
    for (auto& c : counts) c = rng() % 20;
    counts[0] += 1;
    const RoutingConfig cfg{1 + rng() % 16, 1 + rng() % 6};
    CHECK(expected_usage(shard_from_counts(0, counts), cfg).total() ==
          doctest::Approx(static_cast<double>(cfg.batch_size * cfg.interval)));
  }
}

TEST_CASE("select_next_dynamic prefers the node that fills the under-used label") {
  RoutingState state(2, 0);
  state.cumulative = LabelHistogram({10.0, 0.0});
  const std::vector<DatasetShard> shards{shard_from_counts(0, {5, 5}), shard_from_counts(1, {0, 10})};
  // A -> [11, 1] variance 25, B -> [10, 2] variance 16.
  CHECK(dispersion(state.cumulative + expected_usage(shards[0], {2, 1})) == 25.0);
  CHECK(dispersion(state.cumulative + expected_usage(shards[1], {2, 1})) == 16.0);
  CHECK(select_next_dynamic(state, shards, {2, 1}) == 1);
}

TEST_CASE("select_next_dynamic breaks ties toward the lowest index") {
  RoutingState state(3, 2);
  state.cumulative = LabelHistogram({4.0, 1.0, 7.0});
  const std::vector<DatasetShard> shards{shard_from_counts(0, {2, 3, 1}), shard_from_counts(1, {2, 3, 1}),
                                         shard_from_counts(2, {2, 3, 1})};
  CHECK(select_next_dynamic(state, shards, {4, 2}) == 0);
}

TEST_CASE("select_next_dynamic may keep the model at its current holder") {
  RoutingState state(2, 1);
  state.cumulative = LabelHistogram({10.0, 0.0});
  const std::vector<DatasetShard> shards{shard_from_counts(0, {8, 0}), shard_from_counts(1, {0, 8})};
  CHECK(select_next_dynamic(state, shards, {1, 1}) == 1);
}

TEST_CASE("select_next_dynamic skips empty shards and fails when all are empty") {
  RoutingState state(2, 0);
  state.cumulative = LabelHistogram({0.0, 5.0});
  const std::vector<DatasetShard> shards{shard_from_counts(0, {0, 0}), shard_from_counts(1, {0, 3})};
  CHECK(select_next_dynamic(state, shards, {1, 1}) == 1);
  const std::vector<DatasetShard> none{shard_from_counts(0, {0, 0}), shard_from_counts(1, {0, 0})};
  CHECK_THROWS_AS(select_next_dynamic(state, none, {1, 1}), StateError);
}

TEST_CASE("select_next_dynamic alternates between two single-label nodes") {
  const std::vector<DatasetShard> shards{shard_from_counts(0, {4, 0}), shard_from_counts(1, {0, 4})};
  const RoutingConfig cfg{1, 1};
  RoutingState state(2, 1);
  std::size_t previous = 1;
  for (int round = 0; round < 40; ++round) {
    const std::size_t next = select_next_dynamic(state, shards, cfg);
    CHECK(next == 1 - previous);
    LabelHistogram used(2);
    used[next] = 1.0;
    state = update_ledger(state, used);
    state.holder = next;
    previous = next;
    if (state.round % 2 == 0) {
      CHECK(state.cumulative[0] == state.cumulative[1]);
      CHECK(dispersion(state.cumulative) == 0.0);
    }
  }
}

TEST_CASE("select_next_dynamic matches the brute-force oracle on random instances") {
  Rng rng(2024);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t nodes = 1 + rng() % 10;
    const std::size_t classes = 1 + rng() % 10;
    const std::size_t batch = 1 + rng() % 8;
    const std::size_t interval = 1 + rng() % 4;
    std::vector<std::vector<std::size_t>> counts(nodes, std::vector<std::size_t>(classes));
    std::vector<DatasetShard> shards;
    bool any = false;
    for (std::size_t v = 0; v < nodes; ++v) {
      for (auto& c : counts[v]) c = (rng() % 3 == 0) ? 0 : rng() % 12;
      // Occasional duplicate shards exercise the tie rule.
      if (v > 0 && rng() % 5 == 0) counts[v] = counts[v - 1];
      for (auto c : counts[v]) any = any || c > 0;
      shards.push_back(shard_from_counts(v, counts[v]));
    }
    if (!any) continue;
    RoutingState state(classes, rng() % nodes);
    for (auto& v : state.cumulative.counts) v = static_cast<double>(rng() % 40);
    CHECK(select_next_dynamic(state, shards, {batch, interval}) ==
          brute_force_next(state.cumulative.counts, counts, batch, interval));

    // Adding a uniform offset to the ledger does not change the choice.
    RoutingState shifted = state;
    for (auto& v : shifted.cumulative.counts) v += 128.0;
    CHECK(select_next_dynamic(shifted, shards, {batch, interval}) ==
          select_next_dynamic(state, shards, {batch, interval}));
  }
}

TEST_CASE("static route cycles through its order") {
  StaticRoute r({0, 1, 2, 3, 4}, 0);
  std::vector<std::size_t> seen;
  for (int i = 0; i < 7; ++i) seen.push_back(r.next());
  CHECK(seen == std::vector<std::size_t>{1, 2, 3, 4, 0, 1, 2});

  StaticRoute r7({0, 2, 1, 3, 4}, 1);
  CHECK(r7.next() == 1);

  StaticRoute single({0}, 0);
  CHECK(single.next() == 0);
  CHECK(single.next() == 0);
}

TEST_CASE("static route visits each node once per cycle from any start") {
  const std::vector<std::size_t> order{3, 0, 4, 1, 2};
  for (std::size_t start = 0; start < 5; ++start) {
    StaticRoute r = StaticRoute::starting_at(order, start);
    CHECK(r.current() == start);
    std::set<std::size_t> visited;
    for (int i = 0; i < 5; ++i) visited.insert(r.next());
    CHECK(visited.size() == 5);
    CHECK(r.current() == start);
  }
}

TEST_CASE("static route rejects non-permutations") {
  CHECK_THROWS_AS(StaticRoute({0, 1, 1, 2}), ArgumentError);
  CHECK_THROWS_AS(StaticRoute({0, 5}), ArgumentError);
  CHECK_THROWS_AS(StaticRoute({}), ArgumentError);
  CHECK_THROWS_AS(StaticRoute::starting_at({0, 1}, 3), ArgumentError);
}

TEST_CASE("next_random never returns the holder and is uniform over the rest") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) CHECK(next_random(2, 0, rng) == 1);

  std::map<std::size_t, int> freq;
  for (int i = 0; i < 10000; ++i) ++freq[next_random(5, 2, rng)];
  CHECK(freq.count(2) == 0);
  for (std::size_t v : {0u, 1u, 3u, 4u}) {
    CHECK(freq[v] / 10000.0 == doctest::Approx(0.25).epsilon(0.02 / 0.25));
  }
  CHECK_THROWS_AS(next_random(1, 0, rng), ArgumentError);
}

TEST_CASE("update_ledger accumulates and counts rounds") {
  RoutingState s(2, 0);
  s = update_ledger(s, LabelHistogram({3.0, 1.0}));
  CHECK(s.cumulative == LabelHistogram({3.0, 1.0}));
  CHECK(s.round == 1);
  CHECK_THROWS_AS(update_ledger(s, LabelHistogram(std::vector<double>{1.0})), ArgumentError);

  const LabelHistogram a({1.0, 4.0}), b({2.0, 0.0});
  CHECK(update_ledger(update_ledger(RoutingState(2, 0), a), b).cumulative ==
        update_ledger(update_ledger(RoutingState(2, 0), b), a).cumulative);
}

TEST_CASE("ledger total after k visits of T batches of size B is k*T*B") {
  Rng rng(8);
  const std::size_t B = 4, T = 3;
  RoutingState s(5, 0);
  for (std::size_t k = 1; k <= 30; ++k) {
    LabelHistogram visit(5);
    for (std::size_t t = 0; t < T * B; ++t) visit[rng() % 5] += 1.0;
    const LabelHistogram before = s.cumulative;
    s = update_ledger(s, visit);
    CHECK(s.cumulative.total() == static_cast<double>(k * T * B));
    for (std::size_t c = 0; c < 5; ++c) CHECK(s.cumulative[c] >= before[c]);
  }
}
