#include "tramfl/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "tramfl/errors.hpp"
#include "tramfl/format.hpp"

namespace tramfl {

std::vector<std::string> enumerate_static_routes(std::size_t nodes) {
  if (nodes < 2 || nodes > 8) {
    throw ArgumentError("static route enumeration supports 2..8 nodes, got " + std::to_string(nodes));
  }
  std::vector<std::size_t> tail(nodes - 1);
  std::iota(tail.begin(), tail.end(), std::size_t{1});
  std::vector<std::string> routes;
  do {
    std::vector<std::size_t> route{0};
    route.insert(route.end(), tail.begin(), tail.end());
    routes.push_back(format_route(route));
  } while (std::next_permutation(tail.begin(), tail.end()));
  return routes;
}

LoadedData load_data(const DatasetSection& section, bool csv_header) {
  if (section.kind == DatasetKind::synthetic) {
    const LabeledDataset all = generate_synthetic(section.num_classes, section.dims,
                                                  section.per_class + section.test_per_class, section.separation,
                                                  section.seed);
    auto [train, test] = holdout_per_class(all, section.test_per_class);
    return {std::move(train), std::move(test)};
  }
  LoadedData data{load_csv(section.path, csv_header), load_csv(section.test_path, csv_header)};
  if (data.train.dims != data.test.dims) {
    throw ArgumentError("train and test CSVs disagree on feature count");
  }
  const std::size_t classes = std::max(data.train.num_classes, data.test.num_classes);
  data.train.num_classes = classes;
  data.test.num_classes = classes;
  return data;
}

double centralized_reference_accuracy(const LabeledDataset& train, const LabeledDataset& test,
                                      const RunConfig& cfg, std::size_t iterations) {
  RunConfig ref = cfg;
  ref.max_iterations = iterations;
  ref.eval_every = std::max<std::size_t>(1, iterations / 20);
  ref.target_accuracy.reset();
  const TrialResult r = run_centralized(train, test, ref);
  const std::size_t half = r.records.size() / 2;
  double sum = 0.0;
  for (std::size_t i = half; i < r.records.size(); ++i) sum += r.records[i].test_accuracy;
  return sum / static_cast<double>(r.records.size() - half);
}

RunConfig make_run_config(const ExperimentConfig& cfg, std::size_t dims, std::size_t num_classes,
                          const ExperimentOptions& opts) {
  RunConfig rc;
  rc.arch.layer_sizes.push_back(dims);
  rc.arch.layer_sizes.insert(rc.arch.layer_sizes.end(), cfg.learner.hidden.begin(), cfg.learner.hidden.end());
  rc.arch.layer_sizes.push_back(num_classes);
  rc.eta = cfg.learner.eta;
  rc.batch_size = cfg.learner.batch_size;
  rc.interval = cfg.run.interval;
  rc.max_iterations = cfg.run.iterations;
  rc.eval_every = cfg.run.eval_every;
  rc.seed = cfg.run.seed;
  rc.count_exchanges_once = opts.count_exchanges_once;
  return rc;
}

ExperimentResult execute_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opts) {
  const LoadedData data = load_data(cfg.dataset, opts.csv_header);
  const std::vector<DatasetShard> shards = apply_partition(data.train, cfg.partition);
  RunConfig rc = make_run_config(cfg, data.train.dims, data.train.num_classes, opts);

  ExperimentResult result;
  if (cfg.run.target_accuracy) {
    result.target_accuracy = *cfg.run.target_accuracy;
  } else {
    result.target_accuracy =
        centralized_reference_accuracy(data.train, data.test, rc, cfg.run.reference_iterations) - *cfg.run.target_margin;
  }
  rc.target_accuracy = result.target_accuracy;

  for (const auto& np : cfg.policies) {
    result.outcomes.push_back(
        {np.name, np.policy, run_trials(shards, data.test, rc, np.policy, cfg.run.trials, cfg.run.threads)});
  }
  return result;
}

std::string results_csv(const TrialSummary& summary) {
  std::string out = "trial,iteration,transmissions,holder,test_loss,test_accuracy\n";
  for (std::size_t t = 0; t < summary.trials.size(); ++t) {
    for (const auto& r : summary.trials[t].records) {
      out += std::to_string(t);
      out += ',';
      out += std::to_string(r.iteration);
      out += ',';
      out += std::to_string(r.transmissions);
      out += ',';
      if (r.holder) out += std::to_string(*r.holder);
      out += ',';
      out += format_double(r.test_loss);
      out += ',';
      out += format_double(r.test_accuracy);
      out += '\n';
    }
  }
  return out;
}

std::string summary_json(const ExperimentResult& result) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& o : result.outcomes) {
    const auto& s = o.summary;
    nlohmann::ordered_json entry;
    entry["mean"] = s.mean ? nlohmann::ordered_json(*s.mean) : nlohmann::ordered_json(nullptr);
    entry["std"] = s.std;
    entry["n_trials"] = s.n_trials;
    entry["n_reached"] = s.n_reached;
    auto per_trial = nlohmann::ordered_json::array();
    for (const auto& v : s.per_trial) {
      per_trial.push_back(v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr));
    }
    entry["per_trial"] = std::move(per_trial);
    doc[o.name] = std::move(entry);
  }
  return doc.dump(2) + "\n";
}

void print_comparison(const ExperimentResult& result, std::ostream& out) {
  std::vector<const PolicyOutcome*> rows;
  for (const auto& o : result.outcomes) rows.push_back(&o);
  std::stable_sort(rows.begin(), rows.end(), [](const PolicyOutcome* a, const PolicyOutcome* b) {
    if (a->summary.mean.has_value() != b->summary.mean.has_value()) return a->summary.mean.has_value();
    return a->summary.mean && *a->summary.mean < *b->summary.mean;
  });

  std::size_t width = 6;
  for (const auto* r : rows) width = std::max(width, r->name.size());
  const auto flags = out.flags();
  out << "target accuracy: " << std::fixed << std::setprecision(4) << result.target_accuracy << "\n";
  out << std::left << std::setw(static_cast<int>(width)) << "policy" << "  " << std::right << std::setw(12) << "mean"
      << "  " << std::setw(10) << "std" << "  " << std::setw(9) << "reached" << "\n";
  for (const auto* r : rows) {
    const auto& s = r->summary;
    out << std::left << std::setw(static_cast<int>(width)) << r->name << "  " << std::right << std::setw(12);
    if (s.mean) {
      out << std::setprecision(1) << *s.mean;
    } else {
      out << "-";
    }
    out << "  " << std::setw(10) << std::setprecision(1) << s.std << "  " << std::setw(4) << s.n_reached << "/"
        << std::left << std::setw(4) << s.n_trials << std::right << "\n";
  }
  out.flags(flags);
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                const ExperimentOptions& opts, std::ostream& log) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

  ExperimentResult result = execute_experiment(cfg, opts);
  for (const auto& o : result.outcomes) {
    write_file(out_dir / ("results_" + o.name + ".csv"), results_csv(o.summary));
  }
  write_file(out_dir / "summary.json", summary_json(result));
  if (opts.dump_model && !result.outcomes.empty()) {
    save_params(result.outcomes.front().summary.trials.front().final_params, *opts.dump_model);
  }
  print_comparison(result, log);
  return result;
}

}  // namespace tramfl
