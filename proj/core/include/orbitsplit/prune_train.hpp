#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "orbitsplit/centrality.hpp"
#include "orbitsplit/gnn.hpp"
#include "orbitsplit/graph.hpp"

namespace orbitsplit {

// What ||A||_0 in the per-round quota refers to.
enum class QuotaBase {
  kOriginal,  // round-0 active edge count: every round has the same quota
  kCurrent,   // active edges at the start of the round: geometric decay
};

// Whether edge-importance centrality is recomputed each round or frozen at
// round 0.
enum class CentralityRefresh { kPerRound, kOnce };

struct PruneRoundConfig {
  double p_g = 0.05;
  std::size_t rounds = 3;
  std::size_t retrain_epochs = 50;
  QuotaBase quota_base = QuotaBase::kOriginal;
  CentralityRefresh refresh = CentralityRefresh::kPerRound;
  ScoreMode score_mode = ScoreMode::kStandardHarmonic;
  // Final magnitude pruning of the weights, as a fraction of the dense
  // model's FLOPs on the input graph. nullopt disables it.
  std::optional<double> flops_target;
  std::size_t post_prune_epochs = 50;

  void validate() const;
};

// Active edges whose endpoints have different predicted labels.
std::vector<EdgeIndex> compute_negative_edges(const Graph& g, std::span<const int> predictions);

// True if deactivating edge e would disconnect its endpoints in the current
// masked graph.
bool is_bridge_now(const Graph& g, EdgeIndex e);

struct RoundRemoval {
  std::size_t quota = 0;
  std::size_t negative_candidates = 0;
  std::size_t negative_bridges_skipped = 0;
  std::vector<EdgeIndex> removed_negative;
  std::vector<EdgeIndex> removed_nonbridge;

  std::size_t removed() const { return removed_negative.size() + removed_nonbridge.size(); }
};

/// One graph-sparsification round on the masked graph.
///
/// quota = floor(p_g * quota_base_edges). Negative edges are removed in
/// ascending importance (min combined centrality of the endpoints, ties by
/// edge index), skipping any that are bridges at that moment. If the
/// negatives run out before the quota is met, non-bridges of the surviving
/// graph are removed in the same order, re-checking bridge status after each
/// removal, until the quota is met or none remain.
RoundRemoval prune_round(Graph& g, std::span<const int> predictions, double p_g,
                         std::size_t quota_base_edges, std::span<const double> node_importance);

// Predicts with `model` (eval mode) and scores nodes itself.
template <typename T>
RoundRemoval prune_round(Graph& g, const GnnModelT<T>& model, double p_g, std::size_t quota_base_edges,
                         ScoreMode mode = ScoreMode::kStandardHarmonic);

struct PruneRecord {
  std::size_t round = 0;
  std::size_t quota = 0;
  std::size_t edges_removed_negative = 0;
  std::size_t edges_removed_nonbridge = 0;
  std::size_t remaining_active_edges = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::uint64_t flops = 0;
  std::vector<EdgeIndex> removed_edges;
  std::vector<EdgeIndex> bridges_at_round_start;
  std::size_t components_before = 0;
  std::size_t components_after = 0;
};

struct PruneReport {
  std::vector<PruneRecord> rounds;
  std::uint64_t dense_flops = 0;
  std::uint64_t final_flops = 0;
  double final_train_accuracy = 0.0;
  double final_test_accuracy = 0.0;
  std::optional<MagnitudePruneResult> weight_pruning;

  // round,edges_removed_negative,edges_removed_nonbridge,remaining_active_edges,
  // train_accuracy,test_accuracy,flops
  void write_csv(std::ostream& out) const;
};

struct PruneTrainResult {
  GnnModel model;
  Graph graph;
  PruneReport report;
};

/// Train, then per round: prune_round, record, retrain on the new mask.
/// With rounds == 0 this is plain training. An optional magnitude-pruning
/// step to cfg.flops_target follows, then post_prune_epochs of retraining.
PruneTrainResult iterative_prune_train(Graph g, GnnModel model, const NodeSplit& split,
                                       const PruneRoundConfig& cfg, const TrainConfig& train_cfg);

}  // namespace orbitsplit
