#include "orbitsplit/centrality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace orbitsplit {

EigenvectorCentrality eigenvector_centrality(const Graph& g, double tol, std::size_t max_iter) {
  if (g.num_active_edges() == 0) {
    throw CentralityError("eigenvector centrality needs at least one active edge");
  }
  const NeighborIndex adj(g);
  const std::size_t n = g.num_nodes();
  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> ax(n);

  auto multiply = [&](const std::vector<double>& in, std::vector<double>& out) {
    for (NodeId v = 0; v < n; ++v) {
      double s = 0.0;
      for (NodeId u : adj.neighbors(v)) s += in[u];
      out[v] = s;
    }
  };

  for (std::size_t it = 1; it <= max_iter; ++it) {
    // x <- (A + I) x / ||(A + I) x||
    multiply(x, ax);
    double norm = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      x[v] += ax[v];
      norm += x[v] * x[v];
    }
    norm = std::sqrt(norm);
    for (double& xv : x) xv /= norm;

    multiply(x, ax);
    const double lambda = std::inner_product(x.begin(), x.end(), ax.begin(), 0.0);
    double residual = 0.0;
    for (std::size_t v = 0; v < n; ++v) residual = std::max(residual, std::abs(ax[v] - lambda * x[v]));
    if (residual <= tol) return {std::move(x), lambda, it};
  }
  throw CentralityError("eigenvector centrality did not converge in " + std::to_string(max_iter) +
                        " iterations");
}

std::vector<double> betweenness_centrality(const Graph& g) {
  const std::size_t n = g.num_nodes();
  if (n < 3) throw CentralityError("betweenness centrality needs at least 3 nodes");
  const NeighborIndex adj(g);

  std::vector<double> bc(n, 0.0);
  std::vector<double> sigma(n), delta(n);
  std::vector<long> dist(n);
  std::vector<NodeId> order;
  order.reserve(n);
  std::vector<std::vector<NodeId>> preds(n);

  for (NodeId s = 0; s < n; ++s) {
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    for (auto& p : preds) p.clear();
    order.clear();

    sigma[s] = 1.0;
    dist[s] = 0;
    order.push_back(s);
    for (std::size_t head = 0; head < order.size(); ++head) {
      const NodeId v = order[head];
      for (NodeId w : adj.neighbors(v)) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          order.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const NodeId w = *it;
      for (NodeId v : preds[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) bc[w] += delta[w];
    }
  }

  // The loop visits every ordered pair; the unordered-pair sum is half of it,
  // so 2/((n-1)(n-2)) * sum/2.
  const double scale = 1.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
  for (double& b : bc) b *= scale;
  return bc;
}

std::vector<double> combined_score(std::span<const double> ec, std::span<const double> bc,
                                   ScoreMode mode) {
  if (ec.size() != bc.size()) throw std::invalid_argument("combined_score: length mismatch");
  std::vector<double> out(ec.size());
  for (std::size_t v = 0; v < ec.size(); ++v) {
    const double a = ec[v], b = bc[v];
    if (a < 0.0 || b < 0.0) throw std::invalid_argument("combined_score: negative centrality");
    if (mode == ScoreMode::kStandardHarmonic) {
      out[v] = a + b == 0.0 ? 0.0 : 2.0 * a * b / (a + b);
    } else {
      out[v] = a * b == 0.0 ? kInfiniteScore : (a + b) / (a * b);
    }
  }
  return out;
}

CentralityScores compute_centrality(const Graph& g, ScoreMode mode) {
  CentralityScores s;
  const std::size_t n = g.num_nodes();
  s.ec = g.num_active_edges() > 0 ? eigenvector_centrality(g).scores : std::vector<double>(n, 0.0);
  s.bc = n >= 3 ? betweenness_centrality(g) : std::vector<double>(n, 0.0);
  s.combined = combined_score(s.ec, s.bc, mode);
  return s;
}

PruneSelection select_prune_nodes_ratio(std::span<const double> scores, double dr) {
  if (!(dr >= 0.0 && dr < 1.0)) throw std::invalid_argument("dropping ratio must be in [0, 1)");
  const auto count = static_cast<std::size_t>(std::floor(dr * static_cast<double>(scores.size())));
  std::vector<NodeId> idx(scores.size());
  std::iota(idx.begin(), idx.end(), NodeId{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](NodeId a, NodeId b) { return scores[a] < scores[b]; });
  idx.resize(count);
  return {NodeSubset::from_unsorted(std::move(idx)), SelectionMode::kRatio, dr};
}

PruneSelection select_prune_nodes_threshold(std::span<const double> scores, double k) {
  if (!(k >= 0.0)) throw std::invalid_argument("threshold multiplier k must be >= 0");
  double sum = 0.0;
  std::size_t finite = 0;
  for (double s : scores) {
    if (std::isfinite(s)) {
      sum += s;
      ++finite;
    }
  }
  PruneSelection sel{{}, SelectionMode::kThreshold, k};
  if (finite == 0) return sel;
  const double mean = sum / static_cast<double>(finite);
  double var = 0.0;
  for (double s : scores) {
    if (std::isfinite(s)) var += (s - mean) * (s - mean);
  }
  const double stddev = std::sqrt(var / static_cast<double>(finite));
  const double threshold = mean - k * stddev;
  for (NodeId v = 0; v < scores.size(); ++v) {
    if (scores[v] < threshold) sel.nodes.nodes.push_back(v);
  }
  return sel;
}

Subgraph prune_graph_with_ids(const Graph& g, const PruneSelection& sel) {
  std::vector<NodeId> keep;
  keep.reserve(g.num_nodes() - std::min(g.num_nodes(), sel.nodes.size()));
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (!sel.nodes.contains(v)) keep.push_back(v);
  }
  return induced_subgraph(g, NodeSubset{std::move(keep)});
}

Graph prune_graph(const Graph& g, const PruneSelection& sel) {
  return prune_graph_with_ids(g, sel).graph;
}

}  // namespace orbitsplit
