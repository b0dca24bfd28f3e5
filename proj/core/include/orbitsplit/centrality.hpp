#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "orbitsplit/graph.hpp"

namespace orbitsplit {

class CentralityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ScoreMode {
  // 2ab/(a+b); high = important. 0 when a+b = 0.
  kStandardHarmonic,
  // (a+b)/(ab), the reciprocal form: well-connected nodes score low. +inf
  // when ab = 0.
  kReciprocal,
};

inline constexpr double kInfiniteScore = std::numeric_limits<double>::infinity();

struct EigenvectorCentrality {
  std::vector<double> scores;  // unit L2 norm, nonnegative
  double eigenvalue = 0.0;     // Rayleigh quotient of the adjacency matrix
  std::size_t iterations = 0;
};

/// Dominant adjacency eigenvector by power iteration on (A + I).
///
/// The unit shift leaves eigenvectors unchanged but makes the Perron root
/// strictly dominant in magnitude, so bipartite graphs (paths, stars, even
/// cycles) converge instead of oscillating. Iteration stops once
/// ||A x - lambda x||_inf <= tol with lambda = x^T A x.
EigenvectorCentrality eigenvector_centrality(const Graph& g, double tol = 1e-10,
                                             std::size_t max_iter = 10000);

/// Brandes accumulation, normalized by 2 / ((n-1)(n-2)) over unordered pairs.
/// Pairs in different components contribute 0. Requires n >= 3.
std::vector<double> betweenness_centrality(const Graph& g);

std::vector<double> combined_score(std::span<const double> ec, std::span<const double> bc,
                                   ScoreMode mode = ScoreMode::kStandardHarmonic);

struct CentralityScores {
  std::vector<double> ec;
  std::vector<double> bc;
  std::vector<double> combined;
};

// EC, BC and the combined score in one call. Degenerate inputs that the
// individual operations reject (no active edges, fewer than 3 nodes) yield
// zero EC / BC respectively instead of an error.
CentralityScores compute_centrality(const Graph& g, ScoreMode mode = ScoreMode::kStandardHarmonic);

enum class SelectionMode { kRatio, kThreshold };

struct PruneSelection {
  NodeSubset nodes;
  SelectionMode mode = SelectionMode::kRatio;
  double parameter = 0.0;  // dropping ratio, or deviation multiplier k
};

// floor(dr * n) lowest scores, ties by lower node index. 0 <= dr < 1.
PruneSelection select_prune_nodes_ratio(std::span<const double> scores, double dr);

// Scores strictly below mean - k * stddev (population). Infinite sentinel
// scores are left out of the statistics and are never selected.
PruneSelection select_prune_nodes_threshold(std::span<const double> scores, double k = 1.0);

Graph prune_graph(const Graph& g, const PruneSelection& sel);
// Same, also reporting which original node each survivor came from.
Subgraph prune_graph_with_ids(const Graph& g, const PruneSelection& sel);

}  // namespace orbitsplit
