#include "orbitsplit/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "orbitsplit/csv.hpp"
#include "orbitsplit/gnn.hpp"
#include "orbitsplit/rng.hpp"

#ifndef ORBITSPLIT_VERSION
#define ORBITSPLIT_VERSION "0.0.0"
#endif

namespace orbitsplit {

const char* library_version() { return ORBITSPLIT_VERSION; }

namespace {

constexpr std::uint64_t kSplitTag = 0x5B1;
constexpr std::uint64_t kGlobalDpTag = 0xD9A2;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("bad boolean for " + key + ": '" + text + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split_list(text, ',')) out.push_back(parse_value<T>(key, item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_number(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

std::string fmt(double x) { return format_number(x); }
std::string fmt_bool(bool b) { return b ? "true" : "false"; }

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

template <typename Row>
std::vector<SweepSummaryRow> summarize(std::span<const double> params, std::span<const Row> rows,
                                       double Row::*param) {
  std::vector<SweepSummaryRow> out;
  for (double p : params) {
    std::vector<double> acc;
    for (const auto& r : rows) {
      if (r.*param == p) acc.push_back(r.test_accuracy);
    }
    out.push_back({p, mean(acc), population_std(acc), acc.size()});
  }
  return out;
}

TrainConfig make_train_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainConfig t;
  t.learning_rate = cfg.learning_rate;
  t.epochs = cfg.epochs;
  t.dropout_rate = cfg.dropout;
  t.seed = seed;
  return t;
}

}  // namespace

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kNoiseSweep:
      return "noise_sweep";
    case ExperimentKind::kDroppingSweep:
      return "dropping_sweep";
    case ExperimentKind::kFlopsPrune:
      return "flops_prune";
    case ExperimentKind::kCommCompare:
      return "comm_compare";
    case ExperimentKind::kSplitTrain:
      return "split_train";
    case ExperimentKind::kFlBaseline:
      return "fl_baseline";
    case ExperimentKind::kDpCalibrate:
      return "dp_calibrate";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  std::string n(name);
  std::replace(n.begin(), n.end(), '-', '_');
  for (auto k : {ExperimentKind::kNoiseSweep, ExperimentKind::kDroppingSweep, ExperimentKind::kFlopsPrune,
                 ExperimentKind::kCommCompare, ExperimentKind::kSplitTrain, ExperimentKind::kFlBaseline,
                 ExperimentKind::kDpCalibrate}) {
    if (n == to_string(k)) return k;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

DatasetSpec DatasetSpec::parse(const std::string& text) {
  DatasetSpec d;
  if (text.rfind("sbm:", 0) == 0 || text == "sbm") {
    d.kind = Kind::kSbm;
    const std::string body = text.size() > 4 ? text.substr(4) : "";
    if (trim(body).empty()) return d;
    for (const auto& kv : split_list(body, ',')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("sbm parameter without '=': '" + kv + "'");
      const std::string k = trim(kv.substr(0, eq)), v = trim(kv.substr(eq + 1));
      if (k == "blocks") {
        d.sbm.block_sizes.clear();
        for (const auto& b : split_list(v, 'x')) d.sbm.block_sizes.push_back(parse_value<std::size_t>(k, b));
      } else if (k == "p_in") {
        d.sbm.p_in = parse_value<double>(k, v);
      } else if (k == "p_out") {
        d.sbm.p_out = parse_value<double>(k, v);
      } else if (k == "dim") {
        d.sbm.feature_dim = parse_value<std::size_t>(k, v);
      } else if (k == "jitter") {
        d.sbm.feature_jitter = parse_value<double>(k, v);
      } else if (k == "seed") {
        d.sbm.seed = parse_value<std::uint64_t>(k, v);
      } else {
        throw ConfigError("unknown sbm parameter '" + k + "'");
      }
    }
    if (d.sbm.block_sizes.empty()) throw ConfigError("sbm needs at least one block");
    return d;
  }
  if (text.rfind("edgelist:", 0) == 0) {
    d.kind = Kind::kEdgeList;
    const auto parts = split_list(text.substr(9), ':');
    if (parts.empty() || parts[0].empty() || parts.size() > 3) {
      throw ConfigError("edgelist dataset is edgelist:<edges>[:<features>[:<labels>]]");
    }
    d.edges = parts[0];
    if (parts.size() > 1 && !parts[1].empty()) d.features = parts[1];
    if (parts.size() > 2 && !parts[2].empty()) d.labels = parts[2];
    return d;
  }
  throw ConfigError("dataset must start with sbm: or edgelist:, got '" + text + "'");
}

std::string DatasetSpec::to_string() const {
  if (kind == Kind::kEdgeList) {
    std::string s = "edgelist:" + edges.string();
    if (features || labels) s += ":" + (features ? features->string() : std::string());
    if (labels) s += ":" + labels->string();
    return s;
  }
  std::string blocks;
  for (std::size_t i = 0; i < sbm.block_sizes.size(); ++i) {
    if (i) blocks += 'x';
    blocks += std::to_string(sbm.block_sizes[i]);
  }
  return "sbm:blocks=" + blocks + ",p_in=" + fmt(sbm.p_in) + ",p_out=" + fmt(sbm.p_out) +
         ",dim=" + std::to_string(sbm.feature_dim) + ",jitter=" + fmt(sbm.feature_jitter) +
         ",seed=" + std::to_string(sbm.seed);
}

Graph load_dataset(const DatasetSpec& spec) {
  if (spec.kind == DatasetSpec::Kind::kSbm) return sbm_generate(spec.sbm);
  return load_edge_list(spec.edges, spec.features, spec.labels);
}

namespace {

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"experiment", [](auto& c, auto&, auto& v) { c.experiment = parse_experiment_kind(v); }},
      {"dataset", [](auto& c, auto&, auto& v) { c.dataset = DatasetSpec::parse(v); }},
      {"seeds", [](auto& c, auto& k, auto& v) { c.seeds = parse_list<std::uint64_t>(k, v); }},
      {"sweep", [](auto& c, auto& k, auto& v) { c.sweep = parse_list<double>(k, v); }},
      {"output_dir", [](auto& c, auto&, auto& v) { c.output_dir = v; }},
      {"dp_enabled", [](auto& c, auto& k, auto& v) { c.dp_enabled = parse_bool(k, v); }},
      {"epsilon_base", [](auto& c, auto& k, auto& v) { c.epsilon_base = parse_value<double>(k, v); }},
      {"delta", [](auto& c, auto& k, auto& v) { c.delta = parse_value<double>(k, v); }},
      {"clip_bound", [](auto& c, auto& k, auto& v) { c.clip_bound = parse_value<double>(k, v); }},
      {"prune_mode",
       [](auto& c, auto& k, auto& v) {
         if (v == "none") c.prune_mode = NodePruneMode::kNone;
         else if (v == "ratio") c.prune_mode = NodePruneMode::kRatio;
         else if (v == "threshold") c.prune_mode = NodePruneMode::kThreshold;
         else throw ConfigError("bad value for " + k + ": '" + v + "' (none|ratio|threshold)");
       }},
      {"dropping_ratio", [](auto& c, auto& k, auto& v) { c.dropping_ratio = parse_value<double>(k, v); }},
      {"threshold_k", [](auto& c, auto& k, auto& v) { c.threshold_k = parse_value<double>(k, v); }},
      {"score_mode",
       [](auto& c, auto& k, auto& v) {
         if (v == "standard") c.score_mode = ScoreMode::kStandardHarmonic;
         else if (v == "reciprocal") c.score_mode = ScoreMode::kReciprocal;
         else throw ConfigError("bad value for " + k + ": '" + v + "' (standard|reciprocal)");
       }},
      {"hidden_dim", [](auto& c, auto& k, auto& v) { c.hidden_dim = parse_value<Eigen::Index>(k, v); }},
      {"epochs", [](auto& c, auto& k, auto& v) { c.epochs = parse_value<std::size_t>(k, v); }},
      {"learning_rate", [](auto& c, auto& k, auto& v) { c.learning_rate = parse_value<double>(k, v); }},
      {"dropout", [](auto& c, auto& k, auto& v) { c.dropout = parse_value<double>(k, v); }},
      {"train_fraction", [](auto& c, auto& k, auto& v) { c.train_fraction = parse_value<double>(k, v); }},
      {"satellites", [](auto& c, auto& k, auto& v) { c.topology.satellites = parse_value<std::size_t>(k, v); }},
      {"space_stations",
       [](auto& c, auto& k, auto& v) { c.topology.space_stations = parse_value<std::size_t>(k, v); }},
      {"partition",
       [](auto& c, auto& k, auto& v) {
         if (v == "random") c.topology.partition = PartitionStrategy::kRandom;
         else if (v == "block_aligned") c.topology.partition = PartitionStrategy::kBlockAligned;
         else throw ConfigError("bad value for " + k + ": '" + v + "' (random|block_aligned)");
       }},
      {"bandwidth", [](auto& c, auto& k, auto& v) { c.topology.bandwidth = parse_value<double>(k, v); }},
      {"latency", [](auto& c, auto& k, auto& v) { c.topology.latency = parse_value<double>(k, v); }},
      {"pg", [](auto& c, auto& k, auto& v) { c.prune_rounds.p_g = parse_value<double>(k, v); }},
      {"prune_rounds", [](auto& c, auto& k, auto& v) { c.prune_rounds.rounds = parse_value<std::size_t>(k, v); }},
      {"retrain_epochs",
       [](auto& c, auto& k, auto& v) { c.prune_rounds.retrain_epochs = parse_value<std::size_t>(k, v); }},
      {"post_prune_epochs",
       [](auto& c, auto& k, auto& v) { c.prune_rounds.post_prune_epochs = parse_value<std::size_t>(k, v); }},
      {"quota_base",
       [](auto& c, auto& k, auto& v) {
         if (v == "original") c.prune_rounds.quota_base = QuotaBase::kOriginal;
         else if (v == "current") c.prune_rounds.quota_base = QuotaBase::kCurrent;
         else throw ConfigError("bad value for " + k + ": '" + v + "' (original|current)");
       }},
      {"centrality_refresh",
       [](auto& c, auto& k, auto& v) {
         if (v == "per_round") c.prune_rounds.refresh = CentralityRefresh::kPerRound;
         else if (v == "once") c.prune_rounds.refresh = CentralityRefresh::kOnce;
         else throw ConfigError("bad value for " + k + ": '" + v + "' (per_round|once)");
       }},
      {"flops_target",
       [](auto& c, auto& k, auto& v) {
         if (v == "none") c.prune_rounds.flops_target.reset();
         else c.prune_rounds.flops_target = parse_value<double>(k, v);
       }},
      {"client_counts", [](auto& c, auto& k, auto& v) { c.client_counts = parse_list<std::size_t>(k, v); }},
      {"comm_rounds", [](auto& c, auto& k, auto& v) { c.comm_rounds = parse_value<std::size_t>(k, v); }},
  };
  return table;
}

}  // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::to_key_values() const {
  auto prune_name = [](NodePruneMode m) {
    return m == NodePruneMode::kNone ? "none" : m == NodePruneMode::kRatio ? "ratio" : "threshold";
  };
  return {
      {"experiment", orbitsplit::to_string(experiment)},
      {"dataset", dataset.to_string()},
      {"seeds", join(seeds)},
      {"sweep", join(sweep)},
      {"output_dir", output_dir.string()},
      {"dp_enabled", fmt_bool(dp_enabled)},
      {"epsilon_base", fmt(epsilon_base)},
      {"delta", fmt(delta)},
      {"clip_bound", fmt(clip_bound)},
      {"prune_mode", prune_name(prune_mode)},
      {"dropping_ratio", fmt(dropping_ratio)},
      {"threshold_k", fmt(threshold_k)},
      {"score_mode", score_mode == ScoreMode::kStandardHarmonic ? "standard" : "reciprocal"},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"epochs", std::to_string(epochs)},
      {"learning_rate", fmt(learning_rate)},
      {"dropout", fmt(dropout)},
      {"train_fraction", fmt(train_fraction)},
      {"satellites", std::to_string(topology.satellites)},
      {"space_stations", std::to_string(topology.space_stations)},
      {"partition", topology.partition == PartitionStrategy::kRandom ? "random" : "block_aligned"},
      {"bandwidth", fmt(topology.bandwidth)},
      {"latency", fmt(topology.latency)},
      {"pg", fmt(prune_rounds.p_g)},
      {"prune_rounds", std::to_string(prune_rounds.rounds)},
      {"retrain_epochs", std::to_string(prune_rounds.retrain_epochs)},
      {"post_prune_epochs", std::to_string(prune_rounds.post_prune_epochs)},
      {"quota_base", prune_rounds.quota_base == QuotaBase::kOriginal ? "original" : "current"},
      {"centrality_refresh", prune_rounds.refresh == CentralityRefresh::kPerRound ? "per_round" : "once"},
      {"flops_target", prune_rounds.flops_target ? fmt(*prune_rounds.flops_target) : "none"},
      {"client_counts", join(client_counts)},
      {"comm_rounds", std::to_string(comm_rounds)},
  };
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (!(epsilon_base > 0.0)) throw ConfigError("epsilon_base must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0, 1)");
  if (!(clip_bound > 0.0)) throw ConfigError("clip_bound must be positive");
  if (!(dropping_ratio >= 0.0 && dropping_ratio < 1.0)) throw ConfigError("dropping_ratio must be in [0, 1)");
  if (hidden_dim <= 0) throw ConfigError("hidden_dim must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
  if (topology.satellites == 0 || topology.space_stations == 0) {
    throw ConfigError("satellites and space_stations must be positive");
  }
  if (topology.space_stations > topology.satellites) throw ConfigError("more space stations than satellites");
  if (!(topology.bandwidth > 0.0) || !(topology.latency >= 0.0)) throw ConfigError("bad channel parameters");
  for (double s : sweep) {
    if (experiment == ExperimentKind::kNoiseSweep || experiment == ExperimentKind::kDpCalibrate) {
      if (!(s > 0.0)) throw ConfigError("budget scales must be positive");
    } else if (experiment == ExperimentKind::kDroppingSweep) {
      if (!(s >= 0.0 && s < 1.0)) throw ConfigError("dropping ratios must be in [0, 1)");
    }
  }
  if (experiment == ExperimentKind::kCommCompare || experiment == ExperimentKind::kFlBaseline) {
    if (client_counts.empty()) throw ConfigError("client_counts must be nonempty");
    for (auto c : client_counts) {
      if (c == 0) throw ConfigError("client counts must be positive");
    }
  }
  if (experiment == ExperimentKind::kFlopsPrune) {
    try {
      prune_rounds.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      set_config_value(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return parse_config(in, std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<double> default_budget_scales() { return {1.0, 0.8, 0.4, 0.2, 0.1}; }
std::vector<double> default_dropping_ratios() { return {0.05, 0.1, 0.2, 0.3}; }

NodeSplit experiment_split(const ExperimentConfig& cfg, std::size_t num_nodes, std::uint64_t seed) {
  return random_node_split(num_nodes, cfg.train_fraction, derive_seed(seed, kSplitTag));
}

SplitConfig make_split_config(const ExperimentConfig& cfg) {
  SplitConfig sc;
  sc.topology = cfg.topology;
  sc.satellite.dp_enabled = cfg.dp_enabled;
  sc.satellite.privacy = calibrate(cfg.epsilon_base, cfg.delta, cfg.clip_bound);
  sc.satellite.prune_enabled = cfg.prune_mode != NodePruneMode::kNone;
  sc.satellite.selection = cfg.prune_mode == NodePruneMode::kThreshold ? SelectionMode::kThreshold
                                                                        : SelectionMode::kRatio;
  sc.satellite.dropping_ratio = cfg.dropping_ratio;
  sc.satellite.threshold_k = cfg.threshold_k;
  sc.satellite.score_mode = cfg.score_mode;
  sc.train = make_train_config(cfg, 0);
  sc.hidden_dim = cfg.hidden_dim;
  return sc;
}

NoiseSweepResult run_noise_sweep(const ExperimentConfig& cfg) {
  const auto scales = cfg.sweep.empty() ? default_budget_scales() : cfg.sweep;
  const Graph g = load_dataset(cfg.dataset);
  NoiseSweepResult r;
  for (std::uint64_t seed : cfg.seeds) {
    const NodeSplit split = experiment_split(cfg, g.num_nodes(), seed);
    for (double lambda : scales) {
      SplitConfig sc = make_split_config(cfg);
      sc.satellite.dp_enabled = true;
      sc.satellite.privacy = calibrate(lambda * cfg.epsilon_base, cfg.delta, cfg.clip_bound);
      sc.track_accuracy = false;
      const auto m = run_split_training(g, split, sc, seed);
      r.rows.push_back({seed, lambda, sc.satellite.privacy.epsilon, cfg.delta, sc.satellite.privacy.sigma,
                        m.final_train_accuracy, m.final_test_accuracy});
    }
  }
  r.summary = summarize<NoiseSweepRow>(scales, r.rows, &NoiseSweepRow::budget_scale);
  return r;
}

DroppingSweepResult run_dropping_sweep(const ExperimentConfig& cfg) {
  const auto ratios = cfg.sweep.empty() ? default_dropping_ratios() : cfg.sweep;
  const Graph g = load_dataset(cfg.dataset);
  DroppingSweepResult r;
  for (std::uint64_t seed : cfg.seeds) {
    const NodeSplit split = experiment_split(cfg, g.num_nodes(), seed);
    for (double dr : ratios) {
      SplitConfig sc = make_split_config(cfg);
      sc.satellite.prune_enabled = dr > 0.0;
      sc.satellite.selection = SelectionMode::kRatio;
      sc.satellite.dropping_ratio = dr;
      sc.track_accuracy = false;
      const auto m = run_split_training(g, split, sc, seed);
      r.rows.push_back({seed, dr, m.smashed_nodes, m.final_train_accuracy, m.final_test_accuracy});
    }
  }
  r.summary = summarize<DroppingRow>(ratios, r.rows, &DroppingRow::dropping_ratio);
  return r;
}

std::vector<FlopsPruneRow> run_flops_prune(const ExperimentConfig& cfg) {
  const Graph raw = load_dataset(cfg.dataset);
  std::vector<FlopsPruneRow> rows;
  for (std::uint64_t seed : cfg.seeds) {
    const Graph g = cfg.dp_enabled ? apply_dp_to_graph(raw, calibrate(cfg.epsilon_base, cfg.delta, cfg.clip_bound),
                                                       derive_seed(seed, kGlobalDpTag))
                                   : raw;
    const NodeSplit split = experiment_split(cfg, g.num_nodes(), seed);
    const TrainConfig tc = make_train_config(cfg, seed);
    const auto init = init_model<double>(static_cast<Eigen::Index>(g.feature_dim()), cfg.hidden_dim,
                                         g.num_classes(), cfg.dropout, seed);

    GnnModel dense = init;
    AdamState<double> adam;
    train_epochs(dense, adam, g, split.train, tc, tc.epochs);
    const auto dense_pred = predict(dense, g);

    const auto pruned = iterative_prune_train(g, init, split, cfg.prune_rounds, tc);
    FlopsPruneRow row;
    row.seed = seed;
    row.accuracy_dense = accuracy(dense_pred, g.labels(), split.test);
    row.accuracy_pruned = pruned.report.final_test_accuracy;
    row.flops_dense = count_flops(dense, g);
    row.flops_pruned = pruned.report.final_flops;
    for (const auto& rec : pruned.report.rounds) row.edges_removed += rec.removed_edges.size();
    row.weights_masked = pruned.report.weight_pruning ? pruned.report.weight_pruning->weights_masked : 0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<CommCostRow> run_comm_compare(const ExperimentConfig& cfg) {
  const Graph g = load_dataset(cfg.dataset);
  const std::uint64_t seed = cfg.seeds.front();
  const NodeSplit split = experiment_split(cfg, g.num_nodes(), seed);
  const std::size_t params = parameter_count(static_cast<Eigen::Index>(g.feature_dim()), cfg.hidden_dim,
                                             g.num_classes());
  std::vector<CommCostRow> rows;
  for (std::size_t clients : cfg.client_counts) {
    SplitConfig sc = make_split_config(cfg);
    sc.topology.satellites = clients;
    sc.train.epochs = cfg.comm_rounds;
    sc.track_accuracy = false;
    const auto sl = run_split_training(g, split, sc, seed);
    const auto fl = run_fl_baseline({clients, cfg.comm_rounds, params, static_cast<std::size_t>(kRealBytes)});
    rows.push_back(comm_cost_row(clients, sl, fl));
  }
  return rows;
}

std::vector<FlBaselineRow> run_fl_baseline_table(const ExperimentConfig& cfg) {
  const Graph g = load_dataset(cfg.dataset);
  const std::size_t params = parameter_count(static_cast<Eigen::Index>(g.feature_dim()), cfg.hidden_dim,
                                             g.num_classes());
  std::vector<FlBaselineRow> rows;
  for (std::size_t clients : cfg.client_counts) {
    const auto fl = run_fl_baseline({clients, cfg.comm_rounds, params, static_cast<std::size_t>(kRealBytes)});
    rows.push_back({clients, cfg.comm_rounds, params, fl.total_bytes});
  }
  return rows;
}

void write_noise_sweep_csv(std::ostream& out, const NoiseSweepResult& r) {
  CsvWriter csv(out, {"seed", "budget_scale", "epsilon", "delta", "sigma", "train_accuracy", "test_accuracy"});
  for (const auto& x : r.rows) {
    csv.row(x.seed, x.budget_scale, x.epsilon, x.delta, x.sigma, x.train_accuracy, x.test_accuracy);
  }
}

void write_dropping_sweep_csv(std::ostream& out, const DroppingSweepResult& r) {
  CsvWriter csv(out, {"seed", "dropping_ratio", "nodes_kept", "train_accuracy", "test_accuracy"});
  for (const auto& x : r.rows) csv.row(x.seed, x.dropping_ratio, x.nodes_kept, x.train_accuracy, x.test_accuracy);
}

void write_summary_csv(std::ostream& out, std::span<const SweepSummaryRow> rows, std::string_view parameter) {
  CsvWriter csv(out, {parameter, "mean_test_accuracy", "std_test_accuracy", "runs"});
  for (const auto& x : rows) csv.row(x.parameter, x.mean_test_accuracy, x.std_test_accuracy, x.runs);
}

void write_flops_prune_csv(std::ostream& out, std::span<const FlopsPruneRow> rows) {
  CsvWriter csv(out, {"seed", "accuracy_dense", "accuracy_pruned", "flops_dense", "flops_pruned", "edges_removed",
                      "weights_masked"});
  for (const auto& x : rows) {
    csv.row(x.seed, x.accuracy_dense, x.accuracy_pruned, x.flops_dense, x.flops_pruned, x.edges_removed,
            x.weights_masked);
  }
}

void write_fl_baseline_csv(std::ostream& out, std::span<const FlBaselineRow> rows) {
  CsvWriter csv(out, {"clients", "rounds", "params", "total_bytes"});
  for (const auto& x : rows) csv.row(x.clients, x.rounds, x.params, x.total_bytes);
}

void write_manifest(const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& outputs,
                    const std::filesystem::path& path) {
  nlohmann::ordered_json config;
  for (const auto& [k, v] : cfg.to_key_values()) config[k] = v;
  std::vector<std::string> files;
  for (const auto& p : outputs) files.push_back(p.filename().string());
  const nlohmann::ordered_json j = {
      {"tool", "orbitsplit"},
      {"version", library_version()},
      {"experiment", to_string(cfg.experiment)},
      {"seeds", cfg.seeds},
      {"config", config},
      {"outputs", files},
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::function<void(std::ostream&)>& body) {
    const auto path = cfg.output_dir / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    body(out);
    written.push_back(path);
  };

  switch (cfg.experiment) {
    case ExperimentKind::kNoiseSweep: {
      const auto r = run_noise_sweep(cfg);
      emit("noise_sweep.csv", [&](std::ostream& o) { write_noise_sweep_csv(o, r); });
      emit("noise_sweep_summary.csv", [&](std::ostream& o) { write_summary_csv(o, r.summary, "budget_scale"); });
      break;
    }
    case ExperimentKind::kDroppingSweep: {
      const auto r = run_dropping_sweep(cfg);
      emit("dropping_sweep.csv", [&](std::ostream& o) { write_dropping_sweep_csv(o, r); });
      emit("dropping_sweep_summary.csv",
           [&](std::ostream& o) { write_summary_csv(o, r.summary, "dropping_ratio"); });
      break;
    }
    case ExperimentKind::kFlopsPrune: {
      const auto rows = run_flops_prune(cfg);
      emit("flops_prune.csv", [&](std::ostream& o) { write_flops_prune_csv(o, rows); });
      break;
    }
    case ExperimentKind::kCommCompare: {
      const auto rows = run_comm_compare(cfg);
      emit("comm_compare.csv", [&](std::ostream& o) { write_comm_cost_csv(o, rows); });
      break;
    }
    case ExperimentKind::kSplitTrain: {
      const Graph g = load_dataset(cfg.dataset);
      for (std::uint64_t seed : cfg.seeds) {
        const auto m = run_split_training(g, experiment_split(cfg, g.num_nodes(), seed), make_split_config(cfg), seed);
        emit("split_train_seed" + std::to_string(seed) + ".csv", [&](std::ostream& o) { m.write_csv(o); });
      }
      break;
    }
    case ExperimentKind::kFlBaseline: {
      const auto rows = run_fl_baseline_table(cfg);
      emit("fl_baseline.csv", [&](std::ostream& o) { write_fl_baseline_csv(o, rows); });
      break;
    }
    case ExperimentKind::kDpCalibrate: {
      const auto scales = cfg.sweep.empty() ? default_budget_scales() : cfg.sweep;
      const auto rows = calibration_table(scales, cfg.epsilon_base, cfg.delta, cfg.clip_bound);
      emit("dp_calibrate.csv", [&](std::ostream& o) { write_calibration_csv(o, rows); });
      break;
    }
  }
  const auto manifest = cfg.output_dir / "manifest.json";
  write_manifest(cfg, written, manifest);
  written.push_back(manifest);
  return written;
}

}  // namespace orbitsplit
