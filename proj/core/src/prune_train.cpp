#include "orbitsplit/prune_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "orbitsplit/csv.hpp"

namespace orbitsplit {

void PruneRoundConfig::validate() const {
  if (!(p_g > 0.0 && p_g < 1.0)) throw std::invalid_argument("p_g must be in (0, 1)");
  if (quota_base == QuotaBase::kOriginal && p_g * static_cast<double>(rounds) >= 1.0) {
    throw std::invalid_argument("p_g * rounds must be < 1");
  }
  if (flops_target && !(*flops_target > 0.0 && *flops_target <= 1.0)) {
    throw std::invalid_argument("flops target must be in (0, 1]");
  }
}

std::vector<EdgeIndex> compute_negative_edges(const Graph& g, std::span<const int> predictions) {
  if (predictions.size() != g.num_nodes()) {
    throw std::invalid_argument("prediction count does not match node count");
  }
  std::vector<EdgeIndex> out;
  for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
    if (!g.edge_active(e)) continue;
    const auto [u, v] = g.edges()[e];
    if (predictions[u] != predictions[v]) out.push_back(e);
  }
  return out;
}

namespace {

// Full (mask-independent) incidence lists so bridge checks can follow the
// mask as it changes.
struct Incidence {
  explicit Incidence(const Graph& g) : lists(g.num_nodes()) {
    for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
      lists[g.edges()[e].u].push_back({g.edges()[e].v, e});
      lists[g.edges()[e].v].push_back({g.edges()[e].u, e});
    }
  }
  std::vector<std::vector<std::pair<NodeId, EdgeIndex>>> lists;
};

bool reachable_without(const Graph& g, const Incidence& inc, EdgeIndex skip,
                       std::vector<std::uint8_t>& seen, std::vector<NodeId>& queue) {
  const auto [src, dst] = g.edges()[skip];
  std::fill(seen.begin(), seen.end(), 0);
  queue.assign(1, src);
  seen[src] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    for (const auto& [w, e] : inc.lists[queue[head]]) {
      if (e == skip || !g.edge_active(e) || seen[w]) continue;
      if (w == dst) return true;
      seen[w] = 1;
      queue.push_back(w);
    }
  }
  return false;
}

void sort_by_importance(std::vector<EdgeIndex>& edges, const Graph& g, std::span<const double> importance) {
  auto score = [&](EdgeIndex e) {
    return std::min(importance[g.edges()[e].u], importance[g.edges()[e].v]);
  };
  std::stable_sort(edges.begin(), edges.end(), [&](EdgeIndex a, EdgeIndex b) {
    const double sa = score(a), sb = score(b);
    return sa < sb || (sa == sb && a < b);
  });
}

}  // namespace

bool is_bridge_now(const Graph& g, EdgeIndex e) {
  if (!g.edge_active(e)) return false;
  const Incidence inc(g);
  std::vector<std::uint8_t> seen(g.num_nodes());
  std::vector<NodeId> queue;
  return !reachable_without(g, inc, e, seen, queue);
}

RoundRemoval prune_round(Graph& g, std::span<const int> predictions, double p_g,
                         std::size_t quota_base_edges, std::span<const double> node_importance) {
  if (node_importance.size() != g.num_nodes()) {
    throw std::invalid_argument("node importance length does not match node count");
  }
  RoundRemoval r;
  r.quota = static_cast<std::size_t>(std::floor(p_g * static_cast<double>(quota_base_edges)));

  const Incidence inc(g);
  std::vector<std::uint8_t> seen(g.num_nodes());
  std::vector<NodeId> queue;

  auto negatives = compute_negative_edges(g, predictions);
  r.negative_candidates = negatives.size();
  sort_by_importance(negatives, g, node_importance);
  for (EdgeIndex e : negatives) {
    if (r.removed() >= r.quota) break;
    if (!reachable_without(g, inc, e, seen, queue)) {
      ++r.negative_bridges_skipped;
      continue;
    }
    g.set_edge_active(e, false);
    r.removed_negative.push_back(e);
  }
  if (r.removed() >= r.quota) return r;

  // Negatives exhausted: fall back to non-bridges of the surviving graph.
  const auto bridges = find_bridges(g);
  std::vector<EdgeIndex> candidates;
  for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
    if (g.edge_active(e) && !std::binary_search(bridges.begin(), bridges.end(), e)) {
      candidates.push_back(e);
    }
  }
  sort_by_importance(candidates, g, node_importance);
  for (EdgeIndex e : candidates) {
    if (r.removed() >= r.quota) break;
    // Earlier removals in this loop can turn a non-bridge into a bridge.
    if (!reachable_without(g, inc, e, seen, queue)) continue;
    g.set_edge_active(e, false);
    r.removed_nonbridge.push_back(e);
  }
  return r;
}

template <typename T>
RoundRemoval prune_round(Graph& g, const GnnModelT<T>& model, double p_g, std::size_t quota_base_edges,
                         ScoreMode mode) {
  const auto pred = predict(model, g);
  const auto scores = compute_centrality(g, mode);
  return prune_round(g, pred, p_g, quota_base_edges, scores.combined);
}

template RoundRemoval prune_round<float>(Graph&, const GnnModelT<float>&, double, std::size_t, ScoreMode);
template RoundRemoval prune_round<double>(Graph&, const GnnModelT<double>&, double, std::size_t, ScoreMode);

void PruneReport::write_csv(std::ostream& out) const {
  CsvWriter csv(out, {"round", "edges_removed_negative", "edges_removed_nonbridge",
                      "remaining_active_edges", "train_accuracy", "test_accuracy", "flops"});
  for (const auto& r : rounds) {
    csv.row(r.round, r.edges_removed_negative, r.edges_removed_nonbridge, r.remaining_active_edges,
            r.train_accuracy, r.test_accuracy, r.flops);
  }
}

PruneTrainResult iterative_prune_train(Graph g, GnnModel model, const NodeSplit& split,
                                       const PruneRoundConfig& cfg, const TrainConfig& train_cfg) {
  if (cfg.rounds > 0 || cfg.flops_target) cfg.validate();
  if (split.train.size() != g.num_nodes() || split.test.size() != g.num_nodes()) {
    throw std::invalid_argument("node split does not match the graph");
  }

  PruneReport report;
  report.dense_flops = count_flops(model, g);
  AdamState<double> adam;
  std::size_t epoch = 0;
  auto train = [&](std::size_t epochs) {
    train_epochs(model, adam, g, split.train, train_cfg, epochs, epoch);
    epoch += epochs;
  };

  train(train_cfg.epochs);
  const std::size_t original_edges = g.num_active_edges();
  std::vector<double> frozen_importance;

  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    if (round > 0) train(cfg.retrain_epochs);

    PruneRecord rec;
    rec.round = round + 1;
    const auto pred = predict(model, g);
    rec.train_accuracy = accuracy(pred, g.labels(), split.train);
    rec.test_accuracy = accuracy(pred, g.labels(), split.test);
    rec.bridges_at_round_start = find_bridges(g);
    rec.components_before = count_components(g);

    std::vector<double> importance;
    if (cfg.refresh == CentralityRefresh::kOnce) {
      if (frozen_importance.empty()) frozen_importance = compute_centrality(g, cfg.score_mode).combined;
      importance = frozen_importance;
    } else {
      importance = compute_centrality(g, cfg.score_mode).combined;
    }
    const std::size_t base = cfg.quota_base == QuotaBase::kOriginal ? original_edges : g.num_active_edges();
    const auto removal = prune_round(g, pred, cfg.p_g, base, importance);

    rec.quota = removal.quota;
    rec.edges_removed_negative = removal.removed_negative.size();
    rec.edges_removed_nonbridge = removal.removed_nonbridge.size();
    rec.removed_edges = removal.removed_negative;
    rec.removed_edges.insert(rec.removed_edges.end(), removal.removed_nonbridge.begin(),
                             removal.removed_nonbridge.end());
    rec.remaining_active_edges = g.num_active_edges();
    rec.components_after = count_components(g);
    rec.flops = count_flops(model, g);
    report.rounds.push_back(std::move(rec));
  }
  if (cfg.rounds > 0) train(cfg.retrain_epochs);

  if (cfg.flops_target) {
    report.weight_pruning = magnitude_prune_weights(model, *cfg.flops_target, g, report.dense_flops);
    train(cfg.post_prune_epochs);
  }

  const auto pred = predict(model, g);
  report.final_train_accuracy = accuracy(pred, g.labels(), split.train);
  report.final_test_accuracy = accuracy(pred, g.labels(), split.test);
  report.final_flops = count_flops(model, g);
  return {std::move(model), std::move(g), std::move(report)};
}

}  // namespace orbitsplit
