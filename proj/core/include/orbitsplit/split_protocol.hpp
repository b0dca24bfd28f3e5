#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "orbitsplit/centrality.hpp"
#include "orbitsplit/gnn.hpp"
#include "orbitsplit/graph.hpp"
#include "orbitsplit/privacy.hpp"

namespace orbitsplit {

class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Tier { kSatellite = 0, kSpaceStation = 1, kGroundStation = 2 };

struct NodeAddress {
  Tier tier = Tier::kSatellite;
  std::uint32_t index = 0;

  auto operator<=>(const NodeAddress&) const = default;
  std::string name() const;  // "sat-0", "space-1", "ground-0"
};

inline NodeAddress satellite(std::uint32_t i) { return {Tier::kSatellite, i}; }
inline NodeAddress space_station(std::uint32_t i) { return {Tier::kSpaceStation, i}; }
inline NodeAddress ground_station() { return {Tier::kGroundStation, 0}; }

enum class MessageKind { kPrunedGraph = 0, kSmashedData = 1, kGradientsBack = 2, kModelUpdate = 3 };
inline constexpr std::size_t kMessageKinds = 4;
const char* to_string(MessageKind kind);

// Wire-size contract. Every message carries a fixed header; reals travel as
// float32, node ids and edge endpoints as uint32.
inline constexpr std::uint64_t kHeaderBytes = 16;
inline constexpr std::uint64_t kRealBytes = 4;
inline constexpr std::uint64_t kIndexBytes = 4;

/// Graph shard on the wire. Edges use local (row) indices and only active
/// edges are sent. A topology-only message has zero-width features.
struct PrunedGraphPayload {
  std::vector<NodeId> global_ids;
  std::vector<Edge> edges;
  FeatureMatrix features;
};

/// Cut-layer activations, rows in the node order announced by the sender's
/// topology message.
struct SmashedPayload {
  Mat<double> activations;
};

// dLoss/dActivations, same shape as the SmashedData it answers.
struct GradientsPayload {
  Mat<double> gradients;
};

// Ground-side parameters after the optimizer step.
struct ModelUpdatePayload {
  SageLayer<double> head;
};

using Payload = std::variant<PrunedGraphPayload, SmashedPayload, GradientsPayload, ModelUpdatePayload>;

struct Message {
  MessageKind kind = MessageKind::kPrunedGraph;
  NodeAddress src;
  NodeAddress dst;
  std::size_t round = 0;
  Payload payload;
  std::uint64_t payload_bytes = 0;
};

/// PrunedGraph: header + 4 n (ids) + 8 e (edges) + 4 n d (features).
/// SmashedData / GradientsBack: header + 4 n h.
/// ModelUpdate: header + 4 (2 in out + out).
std::uint64_t serialized_size(const Payload& payload);
Message make_message(NodeAddress src, NodeAddress dst, std::size_t round, Payload payload);

class ChannelModel {
 public:
  ChannelModel(double bandwidth, double latency);

  // latency + bytes / bandwidth; counters only grow.
  double transfer(std::uint64_t bytes);

  double bandwidth() const { return bandwidth_; }
  double latency() const { return latency_; }
  std::uint64_t cumulative_bytes() const { return cumulative_bytes_; }
  double cumulative_time() const { return cumulative_time_; }
  std::size_t messages() const { return messages_; }

 private:
  double bandwidth_;
  double latency_;
  std::uint64_t cumulative_bytes_ = 0;
  double cumulative_time_ = 0.0;
  std::size_t messages_ = 0;
};

enum class PartitionStrategy {
  kRandom,        // seeded shuffle, dealt round-robin
  kBlockAligned,  // contiguous id ranges; aligns with SBM blocks when counts match
};

struct TopologyConfig {
  std::size_t satellites = 2;
  std::size_t space_stations = 1;
  double bandwidth = 1e6;  // bytes per time unit
  double latency = 0.01;   // time units
  PartitionStrategy partition = PartitionStrategy::kRandom;
};

struct TierNode {
  NodeAddress id;
  NodeSubset owned_partition;  // satellites only
  std::optional<NodeAddress> uplink;
};

struct Topology {
  std::vector<TierNode> satellites;
  std::vector<TierNode> space_stations;
  TierNode ground;

  // Satellite i reports to space station i mod S.
  std::vector<NodeAddress> satellites_of(NodeAddress station) const;
  void validate(std::size_t num_nodes) const;
};

Topology build_topology(std::size_t num_nodes, const TopologyConfig& cfg, std::uint64_t seed);

/// Links of the three-tier topology with byte/time accounting. Only
/// satellite<->space-station and space-station<->ground links exist.
class Network {
 public:
  Network(const Topology& topo, const TopologyConfig& cfg);

  // Records the transfer on the (src, dst) link; throws ProtocolError for a
  // link that does not exist. Returns the transfer time.
  double deliver(const Message& msg);

  const std::map<std::pair<NodeAddress, NodeAddress>, ChannelModel>& links() const { return links_; }
  std::uint64_t total_bytes() const;

 private:
  std::map<std::pair<NodeAddress, NodeAddress>, ChannelModel> links_;
};

struct SatelliteConfig {
  bool dp_enabled = false;
  PrivacyParams privacy;
  bool prune_enabled = false;
  SelectionMode selection = SelectionMode::kRatio;
  double dropping_ratio = 0.0;
  double threshold_k = 1.0;
  ScoreMode score_mode = ScoreMode::kStandardHarmonic;
};

struct SatelliteOutput {
  Message message;  // PrunedGraph to the space station
  Subgraph noisy_shard;  // after DP, before pruning (kept for evaluation)
};

// DP on the raw shard, then node pruning; emits a PrunedGraph message.
SatelliteOutput satellite_step(const TierNode& node, const Subgraph& raw_shard, const SatelliteConfig& cfg,
                               std::uint64_t seed, std::size_t round = 0);

/// Holds layer 1 + batch norm and its optimizer state.
class SpaceStation {
 public:
  SpaceStation(NodeAddress id, Encoder<double> encoder, std::vector<NodeAddress> satellites);

  NodeAddress id() const { return id_; }
  const Encoder<double>& encoder() const { return encoder_; }
  const std::optional<SageLayer<double>>& head_replica() const { return head_; }
  std::span<const NodeId> global_ids() const { return global_ids_; }
  const Graph& union_graph() const { return union_; }

  // Expects exactly one PrunedGraph from each assigned satellite.
  void receive_shards(std::span<const Message> msgs);
  // Topology of the union graph, for the ground station's second layer.
  Message topology_message(std::size_t round) const;
  // Layer-1 forward in train mode; caches activations for backward.
  Message forward(std::size_t round, std::uint64_t dropout_seed, double dropout_rate);
  // Backprop from GradientsBack, Adam step, running-stat update.
  void backward(const Message& grads, double learning_rate);
  void apply_model_update(const Message& update);

 private:
  NodeAddress id_;
  Encoder<double> encoder_;
  AdamState<double> adam_;
  std::vector<NodeAddress> satellites_;
  std::optional<SageLayer<double>> head_;

  Graph union_;
  std::optional<NeighborIndex> adj_;
  Mat<double> x_;
  std::vector<NodeId> global_ids_;
  std::optional<EncoderCache<double>> cache_;
  std::optional<std::size_t> pending_round_;
};

// Free-function form of one space-station round: receive shards (first
// round only, when msgs is non-empty) and emit SmashedData.
Message space_station_step(SpaceStation& station, std::span<const Message> shard_msgs, std::size_t round,
                           std::uint64_t dropout_seed, double dropout_rate);

struct GroundMetrics {
  double loss = 0.0;
  double train_accuracy = 0.0;
  std::size_t nodes = 0;
};

struct GroundOutput {
  std::vector<Message> gradients;  // one per SmashedData, ordered by station
  std::vector<Message> updates;    // one ModelUpdate per space station
  GroundMetrics metrics;
};

/// Holds the second SAGE layer, the classifier loss and its optimizer state.
/// Labels and the train mask are indexed by global node id.
class GroundStation {
 public:
  GroundStation(SageLayer<double> head, std::vector<int> labels, std::vector<std::uint8_t> train_mask);

  const SageLayer<double>& head() const { return head_; }
  void receive_topology(const Message& msg);

  // Exactly one SmashedData per known space station. Runs layer 2 and the
  // loss, backpropagates to the activations, steps Adam on the head.
  GroundOutput step(std::span<const Message> smashed, std::size_t round, double learning_rate);
  // Loss only; no state change.
  double loss(std::span<const Message> smashed) const;

 private:
  struct StationView {
    std::vector<NodeId> global_ids;
    std::vector<Edge> edges;
  };
  struct Assembled {
    std::vector<NodeAddress> order;
    std::vector<Eigen::Index> offsets;
    Mat<double> activations;
    std::vector<int> labels;
    std::vector<std::uint8_t> mask;
    Graph graph;
  };
  Assembled assemble(std::span<const Message> smashed) const;

  SageLayer<double> head_;
  AdamState<double> adam_;
  std::vector<int> labels_;
  std::vector<std::uint8_t> train_mask_;
  std::map<NodeAddress, StationView> stations_;
};

GroundOutput ground_station_step(GroundStation& ground, std::span<const Message> smashed, std::size_t round,
                                 double learning_rate);

struct SplitConfig {
  TopologyConfig topology;
  SatelliteConfig satellite;
  TrainConfig train;  // epochs = rounds; seed is taken from run_split_training
  Eigen::Index hidden_dim = 32;
  bool track_accuracy = true;
};

struct MessageRecord {
  MessageKind kind;
  NodeAddress src;
  NodeAddress dst;
  std::size_t round;
  std::uint64_t bytes;
};

struct RoundMetrics {
  std::size_t round = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::uint64_t bytes = 0;
  std::array<std::uint64_t, kMessageKinds> bytes_by_kind{};
  std::map<std::string, std::uint64_t> link_bytes;  // cumulative through this round
  double wall_time = 0.0;
};

struct SplitRunMetrics {
  std::vector<RoundMetrics> rounds;
  std::vector<MessageRecord> log;
  std::map<std::string, std::uint64_t> link_bytes;  // "src->dst"
  std::array<std::uint64_t, kMessageKinds> bytes_by_kind{};
  std::uint64_t total_bytes = 0;
  std::size_t smashed_nodes = 0;  // rows sent per round, all stations
  double final_train_accuracy = 0.0;
  double final_test_accuracy = 0.0;
  std::vector<Encoder<double>> encoders;
  SageLayer<double> head;

  // round,loss,train_acc,test_acc,sl_bytes_total, then one column per link.
  // Byte columns are cumulative.
  void write_csv(std::ostream& out) const;
};

/// Runs cfg.train.epochs rounds of satellite -> space station -> ground ->
/// back. Satellites preprocess and upload once (round 1); each round then
/// exchanges SmashedData, GradientsBack and ModelUpdate. `seed` drives
/// partitioning, DP noise, initialization and dropout.
///
/// Accuracy is measured on the union of each station's DP-perturbed but
/// unpruned shards, so pruned nodes still count in the test metric.
SplitRunMetrics run_split_training(const Graph& global, const NodeSplit& split, const SplitConfig& cfg,
                                   std::uint64_t seed);

struct FlBaselineConfig {
  std::size_t num_clients = 2;
  std::size_t rounds = 1;
  std::size_t params_per_model = 0;
  std::size_t bytes_per_param = 4;
};

struct FlBaselineResult {
  std::uint64_t total_bytes = 0;
  std::vector<std::uint64_t> per_round_bytes;
  std::uint64_t upload_bytes = 0;
  std::uint64_t download_bytes = 0;
};

// rounds * clients * 2 * params * bytes_per_param: each client uploads and
// downloads the full model every round.
FlBaselineResult run_fl_baseline(const FlBaselineConfig& cfg);

// Trainable parameters: both weight matrices per layer (dense count),
// biases, batch-norm scale and shift.
std::size_t parameter_count(const GnnModel& model);
std::size_t parameter_count(Eigen::Index feature_dim, Eigen::Index hidden_dim, Eigen::Index num_classes);

struct CommCostRow {
  std::size_t clients = 0;
  std::uint64_t fl_bytes = 0;
  std::uint64_t sl_bytes = 0;
  double ratio = 0.0;  // fl / sl
};

// Throws std::domain_error when sl bytes are zero.
CommCostRow comm_cost_row(std::size_t clients, const SplitRunMetrics& sl, const FlBaselineResult& fl);
std::vector<CommCostRow> comm_cost_report(std::span<const std::size_t> clients,
                                          std::span<const SplitRunMetrics> sl,
                                          std::span<const FlBaselineResult> fl);
void write_comm_cost_csv(std::ostream& out, std::span<const CommCostRow> rows);

}  // namespace orbitsplit
