#include "tramfl/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "tramfl/errors.hpp"
#include "tramfl/format.hpp"

namespace tramfl {

std::vector<std::size_t> parse_route(std::string_view text) {
  std::vector<std::size_t> route;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(',', start);
    auto field = text.substr(start, pos == std::string_view::npos ? pos : pos - start);
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    std::size_t node = 0;
    if (!parse_number(field, node)) {
      throw ArgumentError("route entry '" + std::string(field) + "' is not a node index");
    }
    route.push_back(node);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return route;
}

std::string format_route(std::span<const std::size_t> route) {
  std::string out;
  for (std::size_t i = 0; i < route.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(route[i]);
  }
  return out;
}

Policy Policy::parse(std::string_view text) {
  if (text == "dynamic") return dynamic();
  if (text == "random") return random();
  if (text == "gossip") return gossip();
  constexpr std::string_view prefix = "static:";
  if (text.substr(0, prefix.size()) == prefix) {
    auto route = parse_route(text.substr(prefix.size()));
    if (!is_permutation_of_nodes(route)) {
      throw ArgumentError("route '" + std::string(text.substr(prefix.size())) + "' is not a permutation");
    }
    return fixed(std::move(route));
  }
  throw ArgumentError("unknown policy '" + std::string(text) + "'");
}

std::string Policy::to_string() const {
  switch (kind) {
    case PolicyKind::dynamic: return "dynamic";
    case PolicyKind::random: return "random";
    case PolicyKind::gossip: return "gossip";
    case PolicyKind::static_route: return "static:" + format_route(route);
  }
  return "?";
}

void RunConfig::validate() const {
  arch.validate();
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ArgumentError("learning rate must be positive");
  if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
  if (interval < 1) throw ArgumentError("transmission interval must be >= 1");
  if (max_iterations < 1) throw ArgumentError("iteration budget must be >= 1");
  if (eval_every < 1) throw ArgumentError("evaluation cadence must be >= 1");
  if (target_accuracy && !(*target_accuracy > 0.0 && *target_accuracy <= 1.0)) {
    throw ArgumentError("target accuracy must lie in (0, 1]");
  }
}

namespace {

void check_shapes(std::span<const DatasetShard> shards, const LabeledDataset& test_set,
                  const RunConfig& cfg) {
  cfg.validate();
  if (test_set.empty()) throw ArgumentError("test set is empty");
  if (test_set.dims != cfg.arch.input_dims() || test_set.num_classes != cfg.arch.num_classes()) {
    throw ArgumentError("architecture does not match the test set's dims/classes");
  }
  for (const auto& s : shards) {
    if (s.hist.size() != cfg.arch.num_classes()) {
      throw ArgumentError("shard " + std::to_string(s.node_id) + " histogram does not match class count");
    }
  }
}

EvalRecord make_record(const ModelParams& p, const LabeledDataset& test_set, std::size_t iteration,
                       std::size_t transmissions, std::optional<std::size_t> holder) {
  const Evaluation e = evaluate(p, test_set);
  return EvalRecord{iteration, transmissions, holder, e.accuracy, e.loss};
}

bool reached(const RunConfig& cfg, const EvalRecord& r) {
  return cfg.target_accuracy && r.test_accuracy >= *cfg.target_accuracy;
}

void finish(TrialResult& result, const RunConfig& cfg, ModelParams params) {
  if (cfg.target_accuracy) {
    result.transmissions_to_target = transmissions_to_accuracy(result, *cfg.target_accuracy);
  }
  result.final_params_digest = params_digest(params);
  result.final_params = std::move(params);
}

}  // namespace

TrialResult run_tram_fl(std::span<const DatasetShard> shards, const LabeledDataset& test_set,
                        const RunConfig& cfg, const Policy& policy) {
  check_shapes(shards, test_set, cfg);
  if (policy.kind == PolicyKind::gossip) throw ArgumentError("run_tram_fl: gossip is not a routing policy");
  std::vector<std::size_t> candidates;
  for (std::size_t v = 0; v < shards.size(); ++v) {
    if (!shards[v].empty()) candidates.push_back(v);
  }
  if (candidates.empty()) throw StateError("run_tram_fl: no node holds any data");
  if (policy.kind == PolicyKind::static_route && policy.route.size() != shards.size()) {
    throw ArgumentError("static route covers " + std::to_string(policy.route.size()) + " nodes, network has " +
                        std::to_string(shards.size()));
  }
  if (policy.kind == PolicyKind::random && shards.size() < 2) {
    throw ArgumentError("random routing needs at least two nodes");
  }

  ModelParams params = init_he(cfg.arch, cfg.seed);
  Rng placement_rng = make_rng(cfg.seed, Stream::placement);
  Rng batch_rng = make_rng(cfg.seed, Stream::batches);
  Rng routing_rng = make_rng(cfg.seed, Stream::routing);

  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  const std::size_t start = candidates[pick(placement_rng)];
  RoutingState state(cfg.arch.num_classes(), start);
  std::optional<StaticRoute> route;
  if (policy.kind == PolicyKind::static_route) route = StaticRoute::starting_at(policy.route, start);
  const RoutingConfig rcfg{cfg.batch_size, cfg.interval};

  TrialResult result;
  result.path.push_back(start);
  LabelHistogram visit(cfg.arch.num_classes());
  bool stop = false;
  std::size_t k = 0;
  while (k < cfg.max_iterations && !stop) {
    ++k;
    const DatasetShard& shard = shards[state.holder];
    if (!shard.empty()) {
      Minibatch batch = draw_minibatch(shard, cfg.batch_size, batch_rng);
      const LossAndGrad lg = loss_and_grad(params, batch.samples);
      params = sgd_step(std::move(params), lg.grad, cfg.eta);
      visit += batch.counts;
      ++result.trained_batches;
    }
    if (k % cfg.interval != 0) continue;

    state = update_ledger(std::move(state), visit);
    visit = LabelHistogram(cfg.arch.num_classes());
    std::size_t next = state.holder;
    switch (policy.kind) {
      case PolicyKind::dynamic: next = select_next_dynamic(state, shards, rcfg); break;
      case PolicyKind::static_route: next = route->next(); break;
      case PolicyKind::random: next = next_random(shards.size(), state.holder, routing_rng); break;
      case PolicyKind::gossip: break;
    }
    state.holder = next;
    ++result.transmissions;
    result.path.push_back(next);

    if (result.transmissions % cfg.eval_every == 0) {
      result.records.push_back(make_record(params, test_set, k, result.transmissions, state.holder));
      stop = reached(cfg, result.records.back());
    }
  }
  // A partially completed visit still consumed samples.
  state.cumulative += visit;
  if (result.records.empty() || result.records.back().iteration != k) {
    result.records.push_back(make_record(params, test_set, k, result.transmissions, state.holder));
  }
  result.iterations = k;
  result.ledger = std::move(state.cumulative);
  finish(result, cfg, std::move(params));
  return result;
}

GossipNetwork::GossipNetwork(std::span<const DatasetShard> shards, const RunConfig& cfg)
    : shards_(shards), cfg_(cfg), batch_rng_(make_rng(cfg.seed, Stream::batches)) {
  cfg_.validate();
  if (shards.size() < 2) throw ArgumentError("gossip needs at least two nodes");
  for (const auto& s : shards) {
    if (s.empty()) throw StateError("gossip: node " + std::to_string(s.node_id) + " has no data");
  }
  models_.assign(shards.size(), init_he(cfg_.arch, cfg_.seed));
}

std::size_t GossipNetwork::round() {
  for (std::size_t v = 0; v < models_.size(); ++v) {
    Minibatch batch = draw_minibatch(shards_[v], cfg_.batch_size, batch_rng_);
    const LossAndGrad lg = loss_and_grad(models_[v], batch.samples);
    models_[v] = sgd_step(std::move(models_[v]), lg.grad, cfg_.eta);
    ++trained_batches_;
  }
  const ModelParams avg = consensus();
  for (auto& m : models_) m.values = avg.values;
  const std::size_t v = models_.size();
  return cfg_.count_exchanges_once ? v * (v - 1) / 2 : v * (v - 1);
}

ModelParams GossipNetwork::consensus() const {
  const std::vector<double> weights(models_.size(), 1.0);
  return average_params(models_, weights);
}

TrialResult run_gossip(std::span<const DatasetShard> shards, const LabeledDataset& test_set,
                       const RunConfig& cfg) {
  check_shapes(shards, test_set, cfg);
  GossipNetwork net(shards, cfg);
  TrialResult result;
  std::size_t r = 0;
  bool stop = false;
  while (r < cfg.max_iterations && !stop) {
    ++r;
    const std::size_t before = result.transmissions;
    result.transmissions += net.round();
    if (result.transmissions / cfg.eval_every > before / cfg.eval_every) {
      result.records.push_back(make_record(net.consensus(), test_set, r, result.transmissions, std::nullopt));
      stop = reached(cfg, result.records.back());
    }
  }
  if (result.records.empty() || result.records.back().iteration != r) {
    result.records.push_back(make_record(net.consensus(), test_set, r, result.transmissions, std::nullopt));
  }
  result.iterations = r;
  result.trained_batches = net.trained_batches();
  finish(result, cfg, net.consensus());
  return result;
}

TrialResult run_centralized(const LabeledDataset& train_set, const LabeledDataset& test_set,
                            const RunConfig& cfg) {
  if (train_set.empty()) throw StateError("run_centralized: empty training set");
  const DatasetShard pooled = make_shard(0, train_set.samples, train_set.num_classes);
  check_shapes({&pooled, 1}, test_set, cfg);

  ModelParams params = init_he(cfg.arch, cfg.seed);
  Rng batch_rng = make_rng(cfg.seed, Stream::batches);
  TrialResult result;
  result.ledger = LabelHistogram(cfg.arch.num_classes());
  std::size_t k = 0;
  bool stop = false;
  while (k < cfg.max_iterations && !stop) {
    ++k;
    Minibatch batch = draw_minibatch(pooled, cfg.batch_size, batch_rng);
    const LossAndGrad lg = loss_and_grad(params, batch.samples);
    params = sgd_step(std::move(params), lg.grad, cfg.eta);
    result.ledger += batch.counts;
    if (k % cfg.eval_every == 0) {
      result.records.push_back(make_record(params, test_set, k, 0, std::nullopt));
      stop = reached(cfg, result.records.back());
    }
  }
  if (result.records.empty() || result.records.back().iteration != k) {
    result.records.push_back(make_record(params, test_set, k, 0, std::nullopt));
  }
  result.iterations = k;
  result.trained_batches = k;
  finish(result, cfg, std::move(params));
  return result;
}

TrialResult run_policy(std::span<const DatasetShard> shards, const LabeledDataset& test_set,
                       const RunConfig& cfg, const Policy& policy) {
  if (policy.kind == PolicyKind::gossip) return run_gossip(shards, test_set, cfg);
  return run_tram_fl(shards, test_set, cfg, policy);
}

std::optional<std::size_t> transmissions_to_accuracy(const TrialResult& result, double threshold) {
  std::optional<std::size_t> best;
  for (const auto& r : result.records) {
    if (r.test_accuracy >= threshold && (!best || r.transmissions < *best)) best = r.transmissions;
  }
  return best;
}

TrialSummary summarize(std::vector<TrialResult> trials) {
  TrialSummary s;
  s.n_trials = trials.size();
  std::vector<double> values;
  for (const auto& t : trials) {
    s.per_trial.push_back(t.transmissions_to_target);
    if (t.transmissions_to_target) values.push_back(static_cast<double>(*t.transmissions_to_target));
  }
  s.trials = std::move(trials);
  s.n_reached = values.size();
  if (!values.empty()) {
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    s.mean = mean;
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
  }
  return s;
}

TrialSummary run_trials(std::span<const DatasetShard> shards, const LabeledDataset& test_set,
                        const RunConfig& cfg, const Policy& policy, std::size_t n_trials,
                        std::size_t threads) {
  if (n_trials < 1) throw ArgumentError("run_trials: need at least one trial");
  if (!cfg.target_accuracy) throw ArgumentError("run_trials: a target accuracy is required");

  std::vector<TrialResult> results(n_trials);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n_trials);

  const auto run_one = [&](std::size_t i) {
    RunConfig trial_cfg = cfg;
    trial_cfg.seed = cfg.seed + i;
    results[i] = run_policy(shards, test_set, trial_cfg, policy);
  };

  if (threads == 1) {
    for (std::size_t i = 0; i < n_trials; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n_trials; i = next++) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  return summarize(std::move(results));
}

}  // namespace tramfl
