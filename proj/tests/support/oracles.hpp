// Independent reference implementations for tests. Nothing here calls the
// library's structural algorithms; only Graph accessors are used.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "orbitsplit/graph.hpp"

namespace oracle {

using orbitsplit::Edge;
using orbitsplit::EdgeIndex;
using orbitsplit::Graph;
using orbitsplit::NodeId;

inline Graph random_graph(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> edges;
  for (NodeId a = 0; a < n; ++a)
    for (NodeId b = a + 1; b < n; ++b)
      if (u(rng) < p) edges.push_back({a, b});
  return orbitsplit::build_graph(n, edges);
}

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
  std::vector<std::size_t> parent;
};

// Components over active edges, optionally ignoring one edge.
inline std::size_t components(const Graph& g, EdgeIndex skip = std::numeric_limits<EdgeIndex>::max()) {
  UnionFind uf(g.num_nodes());
  for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
    if (e == skip || !g.edge_active(e)) continue;
    uf.unite(g.edges()[e].u, g.edges()[e].v);
  }
  std::size_t c = 0;
  for (std::size_t v = 0; v < g.num_nodes(); ++v) c += uf.find(v) == v;
  return c;
}

inline bool is_bridge(const Graph& g, EdgeIndex e) {
  return g.edge_active(e) && components(g, e) > components(g);
}

// Remove-and-check bridge oracle.
inline std::vector<EdgeIndex> bridges(const Graph& g) {
  std::vector<EdgeIndex> out;
  const std::size_t base = components(g);
  for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
    if (g.edge_active(e) && components(g, e) > base) out.push_back(e);
  }
  return out;
}

inline std::vector<std::vector<double>> adjacency(const Graph& g) {
  std::vector<std::vector<double>> a(g.num_nodes(), std::vector<double>(g.num_nodes(), 0.0));
  for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
    if (!g.edge_active(e)) continue;
    a[g.edges()[e].u][g.edges()[e].v] = a[g.edges()[e].v][g.edges()[e].u] = 1.0;
  }
  return a;
}

/// Betweenness from all-pairs shortest-path counts: Floyd-Warshall distances,
/// path counts by recursion on the distance layers, then
/// sp(i,j|v) = sp(i,v) sp(v,j) when v lies on a shortest i-j path. Unordered
/// pairs, scaled by 2 / ((n-1)(n-2)).
inline std::vector<double> betweenness(const Graph& g) {
  const std::size_t n = g.num_nodes();
  constexpr int kInf = std::numeric_limits<int>::max() / 4;
  const auto a = adjacency(g);
  std::vector<std::vector<int>> d(n, std::vector<int>(n, kInf));
  for (std::size_t i = 0; i < n; ++i) {
    d[i][i] = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (a[i][j] != 0.0) d[i][j] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];

  // sigma[i][j]: number of shortest i-j paths.
  std::vector<std::vector<double>> sigma(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    int maxd = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (d[i][j] < kInf) maxd = std::max(maxd, d[i][j]);
    sigma[i][i] = 1.0;
    for (int layer = 1; layer <= maxd; ++layer) {
      for (std::size_t j = 0; j < n; ++j) {
        if (d[i][j] != layer) continue;
        for (std::size_t k = 0; k < n; ++k)
          if (a[k][j] != 0.0 && d[i][k] == layer - 1) sigma[i][j] += sigma[i][k];
      }
    }
  }

  std::vector<double> bc(n, 0.0);
  if (n < 3) return bc;
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (i == v || j == v || d[i][j] >= kInf) continue;
        if (d[i][v] + d[v][j] == d[i][j]) bc[v] += sigma[i][v] * sigma[v][j] / sigma[i][j];
      }
    }
    bc[v] *= 2.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
  }
  return bc;
}

// max_v |(A x)_v - lambda x_v| with lambda the Rayleigh quotient.
inline double eigen_residual(const Graph& g, const std::vector<double>& x) {
  const auto a = adjacency(g);
  const std::size_t n = x.size();
  std::vector<double> ax(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) ax[i] += a[i][j] * x[j];
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += x[i] * ax[i];
    den += x[i] * x[i];
  }
  const double lambda = num / den;
  double r = 0.0;
  for (std::size_t i = 0; i < n; ++i) r = std::max(r, std::abs(ax[i] - lambda * x[i]));
  return r;
}

inline double normal_cdf(double x, double sigma) { return 0.5 * std::erfc(-x / (sigma * std::sqrt(2.0))); }

// Two-sided one-sample KS statistic against N(0, sigma^2).
inline double ks_statistic(std::vector<double> xs, double sigma) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i], sigma);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Asymptotic critical value at alpha = 0.01.
inline double ks_critical_001(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

}  // namespace oracle
