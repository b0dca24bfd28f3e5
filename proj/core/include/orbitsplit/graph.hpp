#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace orbitsplit {

using NodeId = std::uint32_t;
using EdgeIndex = std::size_t;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Edge {
  NodeId u = 0;
  NodeId v = 0;
  auto operator<=>(const Edge&) const = default;
};

struct PrivacyRecord {
  double epsilon = 0.0;
  double delta = 0.0;
  bool operator==(const PrivacyRecord&) const = default;
};

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Undirected simple graph with node features, optional labels and an edge
/// mask. Edges are stored canonically (u < v, sorted, unique). An edge whose
/// mask bit is 0 is invisible to every structural query.
class Graph {
 public:
  Graph() = default;

  std::size_t num_nodes() const { return static_cast<std::size_t>(features_.rows()); }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t num_active_edges() const;
  std::size_t feature_dim() const { return static_cast<std::size_t>(features_.cols()); }

  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::uint8_t>& edge_mask() const { return edge_mask_; }
  bool edge_active(EdgeIndex e) const { return edge_mask_[e] != 0; }
  // Mask bits may only be changed between training rounds.
  void set_edge_active(EdgeIndex e, bool active) { edge_mask_.at(e) = active ? 1 : 0; }
  std::optional<EdgeIndex> find_edge(NodeId a, NodeId b) const;

  const FeatureMatrix& features() const { return features_; }
  // Replaces the feature matrix; row count must stay the same.
  void set_features(FeatureMatrix features);

  bool has_labels() const { return !labels_.empty(); }
  const std::vector<int>& labels() const { return labels_; }
  int num_classes() const;

  const std::vector<PrivacyRecord>& privacy_log() const { return privacy_log_; }
  void record_privacy(PrivacyRecord r) { privacy_log_.push_back(r); }

  bool operator==(const Graph& other) const;

 private:
  friend Graph build_graph(std::span<const Edge>, FeatureMatrix, std::vector<int>);
  friend Graph with_edge_mask(Graph, std::vector<std::uint8_t>);

  std::vector<Edge> edges_;
  std::vector<std::uint8_t> edge_mask_;
  FeatureMatrix features_;
  std::vector<int> labels_;
  std::vector<PrivacyRecord> privacy_log_;
};

/// Sorted list of node indices, unique.
struct NodeSubset {
  std::vector<NodeId> nodes;

  static NodeSubset from_unsorted(std::vector<NodeId> nodes);
  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  bool contains(NodeId v) const;
  bool operator==(const NodeSubset&) const = default;
};

// Node count is features.rows(). Throws GraphError on self-loops,
// out-of-range endpoints or label-count mismatch.
Graph build_graph(std::span<const Edge> edges, FeatureMatrix features,
                  std::vector<int> labels = {});
// Convenience: zero-width features.
Graph build_graph(std::size_t num_nodes, std::span<const Edge> edges);
Graph build_graph(std::size_t num_nodes, std::initializer_list<Edge> edges);
// Returns g with its mask replaced (length must match).
Graph with_edge_mask(Graph g, std::vector<std::uint8_t> mask);

/// CSR view over the active edges. neighbors(v) is sorted ascending.
class NeighborIndex {
 public:
  explicit NeighborIndex(const Graph& g);

  std::size_t num_nodes() const { return offsets_.size() - 1; }
  std::span<const NodeId> neighbors(NodeId v) const {
    return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
  }
  std::span<const EdgeIndex> incident_edges(NodeId v) const {
    return {edge_ids_.data() + offsets_[v], edge_ids_.data() + offsets_[v + 1]};
  }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
  std::size_t total_degree() const { return targets_.size(); }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> targets_;
  std::vector<EdgeIndex> edge_ids_;
};

std::vector<NodeId> active_neighbors(const Graph& g, NodeId v);

// Active edges whose removal increases the number of connected components,
// as sorted edge indices.
std::vector<EdgeIndex> find_bridges(const Graph& g);

// Components ordered by their smallest node; members sorted.
std::vector<std::vector<NodeId>> connected_components(const Graph& g);
std::size_t count_components(const Graph& g);

struct Subgraph {
  Graph graph;
  std::vector<NodeId> original_ids;  // original_ids[new] = old
};

// Induced subgraph on `keep`, re-indexed densely in ascending original order.
// Surviving edges keep their mask bits; features/labels rows are filtered.
Subgraph induced_subgraph(const Graph& g, const NodeSubset& keep);

struct SbmParams {
  std::vector<std::size_t> block_sizes;
  double p_in = 0.3;
  double p_out = 0.02;
  std::size_t feature_dim = 16;
  std::uint64_t seed = 0;
  // Std of the per-node Gaussian jitter around the block mean. Block means
  // are drawn from N(0, 1) per coordinate.
  double feature_jitter = 1.0;
};

Graph sbm_generate(const SbmParams& params);

// Edge list: one "u v" per line, '#' starts a comment. Features CSV: row i =
// node i. Labels CSV: one integer per row.
Graph load_edge_list(const std::filesystem::path& edges,
                     const std::optional<std::filesystem::path>& features = std::nullopt,
                     const std::optional<std::filesystem::path>& labels = std::nullopt);

}  // namespace orbitsplit
