#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "orbitsplit/centrality.hpp"
#include "orbitsplit/graph.hpp"
#include "orbitsplit/privacy.hpp"
#include "orbitsplit/prune_train.hpp"
#include "orbitsplit/split_protocol.hpp"

namespace orbitsplit {

const char* library_version();

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ExperimentKind { kNoiseSweep, kDroppingSweep, kFlopsPrune, kCommCompare, kSplitTrain, kFlBaseline, kDpCalibrate };

const char* to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view name);  // "noise_sweep" or "noise-sweep"

enum class NodePruneMode { kNone, kRatio, kThreshold };

/// "sbm:blocks=100x100x100,p_in=0.3,p_out=0.02,dim=16,jitter=1,seed=0" or
/// "edgelist:<edges>[:<features.csv>[:<labels.csv>]]".
struct DatasetSpec {
  enum class Kind { kSbm, kEdgeList } kind = Kind::kSbm;
  SbmParams sbm{{100, 100, 100}};
  std::filesystem::path edges;
  std::optional<std::filesystem::path> features;
  std::optional<std::filesystem::path> labels;

  static DatasetSpec parse(const std::string& text);
  std::string to_string() const;
};

Graph load_dataset(const DatasetSpec& spec);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::kSplitTrain;
  DatasetSpec dataset;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<double> sweep;  // empty: the experiment's default set
  std::filesystem::path output_dir = "out";

  // privacy
  bool dp_enabled = true;
  double epsilon_base = 8.0;
  double delta = 1e-5;
  double clip_bound = 1.0;

  // node pruning on the satellites
  NodePruneMode prune_mode = NodePruneMode::kNone;
  double dropping_ratio = 0.1;
  double threshold_k = 1.0;
  ScoreMode score_mode = ScoreMode::kStandardHarmonic;

  // model and training
  Eigen::Index hidden_dim = 32;
  std::size_t epochs = 200;
  double learning_rate = 0.01;
  double dropout = 0.3;
  double train_fraction = 0.6;

  TopologyConfig topology;

  // edge-pruning loop; flops_target defaults to 0.5 for flops_prune
  PruneRoundConfig prune_rounds{.flops_target = 0.5};

  std::vector<std::size_t> client_counts{2, 4, 8, 16};
  std::size_t comm_rounds = 5;

  void validate() const;
  // Every key with its current value, in the config-file format.
  std::vector<std::pair<std::string, std::string>> to_key_values() const;
};

/// Config files are "key = value" lines; '#' starts a comment, blank lines
/// are ignored, lists are comma-separated. Unknown keys and bad values throw
/// ConfigError naming the line.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Defaults of the sweep experiments.
std::vector<double> default_budget_scales();     // 1.0, 0.8, 0.4, 0.2, 0.1
std::vector<double> default_dropping_ratios();   // 0.05, 0.1, 0.2, 0.3

struct NoiseSweepRow {
  std::uint64_t seed = 0;
  double budget_scale = 1.0;
  double epsilon = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct SweepSummaryRow {
  double parameter = 0.0;
  double mean_test_accuracy = 0.0;
  double std_test_accuracy = 0.0;
  std::size_t runs = 0;
};

struct NoiseSweepResult {
  std::vector<NoiseSweepRow> rows;
  std::vector<SweepSummaryRow> summary;  // sweep order
};

struct DroppingRow {
  std::uint64_t seed = 0;
  double dropping_ratio = 0.0;
  std::size_t nodes_kept = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct DroppingSweepResult {
  std::vector<DroppingRow> rows;
  std::vector<SweepSummaryRow> summary;
};

struct FlopsPruneRow {
  std::uint64_t seed = 0;
  double accuracy_dense = 0.0;
  double accuracy_pruned = 0.0;
  std::uint64_t flops_dense = 0;
  std::uint64_t flops_pruned = 0;
  std::size_t edges_removed = 0;
  std::size_t weights_masked = 0;
};

struct FlBaselineRow {
  std::size_t clients = 0;
  std::size_t rounds = 0;
  std::size_t params = 0;
  std::uint64_t total_bytes = 0;
};

// Shared per-seed setup: the dataset and a seeded train/test split.
NodeSplit experiment_split(const ExperimentConfig& cfg, std::size_t num_nodes, std::uint64_t seed);
SplitConfig make_split_config(const ExperimentConfig& cfg);

NoiseSweepResult run_noise_sweep(const ExperimentConfig& cfg);
DroppingSweepResult run_dropping_sweep(const ExperimentConfig& cfg);
std::vector<FlopsPruneRow> run_flops_prune(const ExperimentConfig& cfg);
// Fixed global graph, satellites = client count, comm_rounds rounds, first seed.
std::vector<CommCostRow> run_comm_compare(const ExperimentConfig& cfg);
std::vector<FlBaselineRow> run_fl_baseline_table(const ExperimentConfig& cfg);

void write_noise_sweep_csv(std::ostream& out, const NoiseSweepResult& r);
void write_dropping_sweep_csv(std::ostream& out, const DroppingSweepResult& r);
void write_summary_csv(std::ostream& out, std::span<const SweepSummaryRow> rows, std::string_view parameter);
void write_flops_prune_csv(std::ostream& out, std::span<const FlopsPruneRow> rows);
void write_fl_baseline_csv(std::ostream& out, std::span<const FlBaselineRow> rows);

/// Runs cfg.experiment and writes its CSV files plus manifest.json into
/// cfg.output_dir. Returns the files written.
std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& cfg);

void write_manifest(const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& outputs,
                    const std::filesystem::path& path);

}  // namespace orbitsplit
