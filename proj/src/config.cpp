#include "tramfl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tramfl/errors.hpp"
#include "tramfl/experiment.hpp"
#include "tramfl/format.hpp"

namespace tramfl {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct Entry {
  std::string value;
  std::size_t line = 0;
  bool used = false;
};

// Entries of one section, in file order. Every lookup marks the key as used so
// leftovers can be reported as unknown.
class Section {
 public:
  explicit Section(std::string name) : name_(std::move(name)) {}

  void add(const std::string& key, std::string value, std::size_t line) {
    if (index_.count(key)) {
      throw ConfigError(path(key), "duplicate key (line " + std::to_string(line) + ")");
    }
    index_[key] = entries_.size();
    keys_.push_back(key);
    entries_.push_back(Entry{std::move(value), line, false});
  }

  std::string path(std::string_view key) const { return name_ + "." + std::string(key); }

  bool has(const std::string& key) const { return index_.count(key) != 0; }

  const std::string* find(const std::string& key) {
    const auto it = index_.find(key);
    if (it == index_.end()) return nullptr;
    entries_[it->second].used = true;
    return &entries_[it->second].value;
  }

  const std::string& require(const std::string& key) {
    const auto* v = find(key);
    if (!v) throw ConfigError(path(key), "missing required key");
    return *v;
  }

  template <typename T>
  T number(const std::string& key, const std::string& text) const {
    T out{};
    if (!parse_number(trim(text), out)) {
      throw ConfigError(path(key), "expected a number, got '" + text + "'");
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(out)) throw ConfigError(path(key), "must be finite");
    }
    return out;
  }

  template <typename T>
  T get(const std::string& key) {
    return number<T>(key, require(key));
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    const auto* v = find(key);
    return v ? number<T>(key, *v) : fallback;
  }

  template <typename T>
  std::optional<T> get_optional(const std::string& key) {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    return number<T>(key, *v);
  }

  void reject_unused() const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!entries_[i].used) {
        throw ConfigError(path(keys_[i]), "unknown key (line " + std::to_string(entries_[i].line) + ")");
      }
    }
  }

  const std::vector<std::string>& keys() const { return keys_; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  void mark_all_used() {
    for (auto& e : entries_) e.used = true;
  }

 private:
  std::string name_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> keys_;
  std::vector<Entry> entries_;
};

std::vector<std::size_t> size_list(const Section& sec, const std::string& key, std::string_view text,
                                   char sep = ',') {
  std::vector<std::size_t> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    const auto field = trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    out.push_back(sec.number<std::size_t>(key, std::string(field)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

CountTable parse_table(const Section& sec, const std::string& key, std::string_view text) {
  CountTable table;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(';', start);
    table.push_back(size_list(sec, key, text.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return table;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

bool valid_policy_name(std::string_view name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

DatasetSection read_dataset(Section& sec) {
  DatasetSection d;
  const std::string& kind = sec.require("kind");
  if (kind == "synthetic") {
    d.kind = DatasetKind::synthetic;
    d.num_classes = sec.get<std::size_t>("num_classes");
    d.dims = sec.get<std::size_t>("dims");
    d.per_class = sec.get<std::size_t>("per_class");
    d.test_per_class = sec.get<std::size_t>("test_per_class");
    d.separation = sec.get<double>("separation");
    d.seed = sec.get_or<std::uint64_t>("seed", 0);
    if (d.num_classes < 2) throw ConfigError(sec.path("num_classes"), "must be >= 2");
    if (d.dims < 1) throw ConfigError(sec.path("dims"), "must be >= 1");
    if (d.per_class < 1) throw ConfigError(sec.path("per_class"), "must be >= 1");
    if (d.test_per_class < 1) throw ConfigError(sec.path("test_per_class"), "must be >= 1");
    if (!(d.separation > 0.0)) throw ConfigError(sec.path("separation"), "must be positive");
  } else if (kind == "csv") {
    d.kind = DatasetKind::csv;
    d.path = sec.require("path");
    d.test_path = sec.require("test_path");
  } else {
    throw ConfigError(sec.path("kind"), "expected 'synthetic' or 'csv', got '" + kind + "'");
  }
  return d;
}

PartitionPlan read_partition(Section& sec) {
  PartitionPlan p;
  const std::string& scheme = sec.require("scheme");
  p.nodes = sec.get<std::size_t>("nodes");
  if (p.nodes < 2) throw ConfigError(sec.path("nodes"), "must be >= 2");
  if (scheme == "contiguous") {
    p.scheme = PartitionScheme::contiguous;
  } else if (scheme == "random_k") {
    p.scheme = PartitionScheme::random_k;
    p.k_min = sec.get<std::size_t>("k_min");
    p.k_max = sec.get<std::size_t>("k_max");
    p.seed = sec.get_or<std::uint64_t>("seed", 0);
    if (p.k_min < 1 || p.k_min > p.k_max) throw ConfigError(sec.path("k_min"), "need 1 <= k_min <= k_max");
  } else if (scheme == "exponential") {
    p.scheme = PartitionScheme::exponential;
    p.rate = sec.get<double>("rate");
    if (!(p.rate > 0.0)) throw ConfigError(sec.path("rate"), "must be positive");
  } else if (scheme == "table") {
    p.scheme = PartitionScheme::table;
    p.table = parse_table(sec, "counts", sec.require("counts"));
    if (p.table.size() != p.nodes) {
      throw ConfigError(sec.path("counts"), std::to_string(p.table.size()) + " rows for " +
                                                std::to_string(p.nodes) + " nodes");
    }
  } else {
    throw ConfigError(sec.path("scheme"), "expected contiguous, random_k, exponential or table, got '" + scheme + "'");
  }
  return p;
}

LearnerSection read_learner(Section& sec) {
  LearnerSection l;
  if (const auto* hidden = sec.find("hidden")) l.hidden = size_list(sec, "hidden", *hidden);
  for (std::size_t h : l.hidden) {
    if (h == 0) throw ConfigError(sec.path("hidden"), "layer widths must be positive");
  }
  l.eta = sec.get<double>("eta");
  l.batch_size = sec.get<std::size_t>("batch_size");
  if (!(l.eta > 0.0)) throw ConfigError(sec.path("eta"), "must be positive");
  if (l.batch_size < 1) throw ConfigError(sec.path("batch_size"), "must be >= 1");
  return l;
}

RunSection read_run(Section& sec) {
  RunSection r;
  r.interval = sec.get<std::size_t>("T");
  r.iterations = sec.get<std::size_t>("K");
  r.eval_every = sec.get_or<std::size_t>("E", 1);
  r.target_accuracy = sec.get_optional<double>("target_accuracy");
  r.target_margin = sec.get_optional<double>("target_margin");
  r.reference_iterations = sec.get_or<std::size_t>("reference_iterations", r.reference_iterations);
  r.trials = sec.get_or<std::size_t>("trials", 1);
  r.seed = sec.get_or<std::uint64_t>("seed", 0);
  r.threads = sec.get_or<std::size_t>("threads", 1);
  if (r.interval < 1) throw ConfigError(sec.path("T"), "must be >= 1");
  if (r.iterations < 1) throw ConfigError(sec.path("K"), "must be >= 1");
  if (r.eval_every < 1) throw ConfigError(sec.path("E"), "must be >= 1");
  if (r.trials < 1) throw ConfigError(sec.path("trials"), "must be >= 1");
  if (r.target_accuracy && r.target_margin) {
    throw ConfigError(sec.path("target_margin"), "give either target_accuracy or target_margin, not both");
  }
  if (!r.target_accuracy && !r.target_margin) {
    throw ConfigError(sec.path("target_accuracy"), "missing required key (or target_margin)");
  }
  if (r.target_accuracy && !(*r.target_accuracy > 0.0 && *r.target_accuracy <= 1.0)) {
    throw ConfigError(sec.path("target_accuracy"), "must lie in (0, 1]");
  }
  if (r.target_margin && !(*r.target_margin >= 0.0 && *r.target_margin < 1.0)) {
    throw ConfigError(sec.path("target_margin"), "must lie in [0, 1)");
  }
  if (r.reference_iterations < 1) throw ConfigError(sec.path("reference_iterations"), "must be >= 1");
  return r;
}

std::vector<NamedPolicy> read_policies(Section& sec, std::size_t nodes) {
  std::vector<NamedPolicy> out;
  sec.mark_all_used();
  for (std::size_t i = 0; i < sec.keys().size(); ++i) {
    const std::string& name = sec.keys()[i];
    const std::string& spec = sec.entry(i).value;
    const std::string field = sec.path(name);
    if (!valid_policy_name(name)) throw ConfigError(field, "policy names may only use [A-Za-z0-9_-]");
    if (spec == "static:all") {
      std::vector<std::string> routes;
      try {
        routes = enumerate_static_routes(nodes);
      } catch (const ArgumentError& e) {
        throw ConfigError(field, e.what());
      }
      for (std::size_t r = 0; r < routes.size(); ++r) {
        std::string label = std::to_string(r + 1);
        if (label.size() < 2) label.insert(0, "0");
        out.push_back({name + "_" + label, Policy::fixed(parse_route(routes[r]))});
      }
      continue;
    }
    Policy policy;
    try {
      if (spec.rfind("static:", 0) == 0) {
        const auto route = parse_route(std::string_view(spec).substr(7));
        if (route.size() != nodes || !is_permutation_of_nodes(route)) {
          throw ConfigError(field, "route '" + spec.substr(7) + "' is not a permutation of 0.." +
                                       std::to_string(nodes - 1));
        }
        policy = Policy::fixed(route);
      } else {
        policy = Policy::parse(spec);
      }
    } catch (const ArgumentError& e) {
      throw ConfigError(field, e.what());
    }
    out.push_back({name, std::move(policy)});
  }
  if (out.empty()) throw ConfigError("policies", "at least one policy is required");
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = i + 1; j < out.size(); ++j) {
      if (out[i].name == out[j].name) throw ConfigError("policies." + out[j].name, "duplicate policy name");
    }
  }
  return out;
}

void cross_check(const ExperimentConfig& cfg) {
  if (cfg.dataset.kind != DatasetKind::synthetic) return;
  const std::size_t classes = cfg.dataset.num_classes;
  const auto& p = cfg.partition;
  if (p.scheme == PartitionScheme::contiguous && p.nodes > classes) {
    throw ConfigError("partition.nodes", "more nodes than labels for a contiguous split");
  }
  if (p.scheme == PartitionScheme::random_k) {
    if (p.k_max > classes) throw ConfigError("partition.k_max", "exceeds the number of labels");
    if (p.nodes * p.k_max < classes) throw ConfigError("partition.k_max", "nodes * k_max cannot cover every label");
  }
  if (p.scheme == PartitionScheme::exponential && classes != 2) {
    throw ConfigError("partition.scheme", "exponential split needs exactly 2 classes");
  }
  if (p.scheme == PartitionScheme::table) {
    for (const auto& row : p.table) {
      if (row.size() != classes) {
        throw ConfigError("partition.counts", "each row needs " + std::to_string(classes) + " class counts");
      }
    }
    for (std::size_t c = 0; c < classes; ++c) {
      std::size_t sum = 0;
      for (const auto& row : p.table) sum += row[c];
      if (sum > cfg.dataset.per_class) {
        throw ConfigError("partition.counts", "class " + std::to_string(c) + " needs " + std::to_string(sum) +
                                                  " samples, only " + std::to_string(cfg.dataset.per_class) +
                                                  " generated");
      }
    }
  }
}

}  // namespace

ExperimentConfig parse_config_text(std::string_view text) {
  std::map<std::string, Section> sections;
  const std::vector<std::string> known = {"dataset", "partition", "learner", "run", "policies"};
  for (const auto& name : known) sections.emplace(name, Section(name));

  Section* current = nullptr;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no), "malformed section header");
      }
      const std::string name(trim(line.substr(1, line.size() - 2)));
      const auto it = sections.find(name);
      if (it == sections.end()) throw ConfigError(name, "unknown section (line " + std::to_string(line_no) + ")");
      current = &it->second;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
    }
    if (!current) throw ConfigError("line " + std::to_string(line_no), "entry outside of any section");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "empty key");
    current->add(key, std::string(trim(line.substr(eq + 1))), line_no);
  }

  ExperimentConfig cfg;
  cfg.dataset = read_dataset(sections.at("dataset"));
  cfg.partition = read_partition(sections.at("partition"));
  cfg.learner = read_learner(sections.at("learner"));
  cfg.run = read_run(sections.at("run"));
  cfg.policies = read_policies(sections.at("policies"), cfg.partition.nodes);
  for (const auto& name : known) sections.at(name).reject_unused();
  cross_check(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string to_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  const auto& d = cfg.dataset;
  out << "[dataset]\n";
  if (d.kind == DatasetKind::synthetic) {
    out << "kind = synthetic\n"
        << "num_classes = " << d.num_classes << "\n"
        << "dims = " << d.dims << "\n"
        << "per_class = " << d.per_class << "\n"
        << "test_per_class = " << d.test_per_class << "\n"
        << "separation = " << format_double(d.separation) << "\n"
        << "seed = " << d.seed << "\n";
  } else {
    out << "kind = csv\n"
        << "path = " << d.path << "\n"
        << "test_path = " << d.test_path << "\n";
  }

  const auto& p = cfg.partition;
  out << "\n[partition]\n";
  switch (p.scheme) {
    case PartitionScheme::contiguous:
      out << "scheme = contiguous\nnodes = " << p.nodes << "\n";
      break;
    case PartitionScheme::random_k:
      out << "scheme = random_k\nnodes = " << p.nodes << "\nk_min = " << p.k_min << "\nk_max = " << p.k_max
          << "\nseed = " << p.seed << "\n";
      break;
    case PartitionScheme::exponential:
      out << "scheme = exponential\nnodes = " << p.nodes << "\nrate = " << format_double(p.rate) << "\n";
      break;
    case PartitionScheme::table:
      out << "scheme = table\nnodes = " << p.nodes << "\ncounts = ";
      for (std::size_t v = 0; v < p.table.size(); ++v) out << (v ? "; " : "") << join_sizes(p.table[v]);
      out << "\n";
      break;
  }

  const auto& l = cfg.learner;
  out << "\n[learner]\n";
  if (!l.hidden.empty()) out << "hidden = " << join_sizes(l.hidden) << "\n";
  out << "eta = " << format_double(l.eta) << "\nbatch_size = " << l.batch_size << "\n";

  const auto& r = cfg.run;
  out << "\n[run]\nT = " << r.interval << "\nK = " << r.iterations << "\nE = " << r.eval_every << "\n";
  if (r.target_accuracy) out << "target_accuracy = " << format_double(*r.target_accuracy) << "\n";
  if (r.target_margin) out << "target_margin = " << format_double(*r.target_margin) << "\n";
  out << "reference_iterations = " << r.reference_iterations << "\ntrials = " << r.trials << "\nseed = " << r.seed
      << "\nthreads = " << r.threads << "\n";

  out << "\n[policies]\n";
  for (const auto& np : cfg.policies) out << np.name << " = " << np.policy.to_string() << "\n";
  return out.str();
}

}  // namespace tramfl
