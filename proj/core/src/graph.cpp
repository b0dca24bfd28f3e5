#include "orbitsplit/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "orbitsplit/rng.hpp"

namespace orbitsplit {

std::size_t Graph::num_active_edges() const {
  return static_cast<std::size_t>(std::count(edge_mask_.begin(), edge_mask_.end(), 1));
}

std::optional<EdgeIndex> Graph::find_edge(NodeId a, NodeId b) const {
  const Edge key{std::min(a, b), std::max(a, b)};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || *it != key) return std::nullopt;
  return static_cast<EdgeIndex>(it - edges_.begin());
}

void Graph::set_features(FeatureMatrix features) {
  if (features.rows() != features_.rows()) {
    throw GraphError("set_features: row count must equal num_nodes");
  }
  features_ = std::move(features);
}

int Graph::num_classes() const {
  if (labels_.empty()) return 0;
  return *std::max_element(labels_.begin(), labels_.end()) + 1;
}

bool Graph::operator==(const Graph& other) const {
  return edges_ == other.edges_ && edge_mask_ == other.edge_mask_ &&
         features_.rows() == other.features_.rows() &&
         features_.cols() == other.features_.cols() && features_ == other.features_ &&
         labels_ == other.labels_ && privacy_log_ == other.privacy_log_;
}

NodeSubset NodeSubset::from_unsorted(std::vector<NodeId> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return NodeSubset{std::move(nodes)};
}

bool NodeSubset::contains(NodeId v) const {
  return std::binary_search(nodes.begin(), nodes.end(), v);
}

Graph build_graph(std::span<const Edge> edges, FeatureMatrix features, std::vector<int> labels) {
  const std::size_t n = static_cast<std::size_t>(features.rows());
  std::vector<Edge> canon;
  canon.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.u >= n || e.v >= n) {
      throw GraphError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                       ") has an endpoint >= num_nodes " + std::to_string(n));
    }
    if (e.u == e.v) throw GraphError("self-loop at node " + std::to_string(e.u));
    canon.push_back({std::min(e.u, e.v), std::max(e.u, e.v)});
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

  if (!labels.empty()) {
    if (labels.size() != n) throw GraphError("label count does not match num_nodes");
    for (int y : labels) {
      if (y < 0) throw GraphError("labels must be non-negative class indices");
    }
  }

  Graph g;
  g.edge_mask_.assign(canon.size(), 1);
  g.edges_ = std::move(canon);
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  return g;
}

Graph build_graph(std::size_t num_nodes, std::span<const Edge> edges) {
  return build_graph(edges, FeatureMatrix(static_cast<Eigen::Index>(num_nodes), 0));
}

Graph build_graph(std::size_t num_nodes, std::initializer_list<Edge> edges) {
  return build_graph(num_nodes, std::span<const Edge>(edges.begin(), edges.size()));
}

Graph with_edge_mask(Graph g, std::vector<std::uint8_t> mask) {
  if (mask.size() != g.edges_.size()) throw GraphError("edge mask length mismatch");
  for (auto& b : mask) b = b ? 1 : 0;
  g.edge_mask_ = std::move(mask);
  return g;
}

NeighborIndex::NeighborIndex(const Graph& g) : offsets_(g.num_nodes() + 1, 0) {
  const auto& edges = g.edges();
  for (EdgeIndex e = 0; e < edges.size(); ++e) {
    if (!g.edge_active(e)) continue;
    ++offsets_[edges[e].u + 1];
    ++offsets_[edges[e].v + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  targets_.resize(offsets_.back());
  edge_ids_.resize(offsets_.back());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  // Edges are sorted by (u, v): for node x every (u, x) with u < x precedes
  // every (x, w), so filling in edge order leaves each list ascending.
  for (EdgeIndex e = 0; e < edges.size(); ++e) {
    if (!g.edge_active(e)) continue;
    const auto [u, v] = edges[e];
    targets_[cursor[u]] = v;
    edge_ids_[cursor[u]++] = e;
    targets_[cursor[v]] = u;
    edge_ids_[cursor[v]++] = e;
  }
}

std::vector<NodeId> active_neighbors(const Graph& g, NodeId v) {
  if (v >= g.num_nodes()) throw GraphError("node out of range");
  std::vector<NodeId> out;
  for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
    if (!g.edge_active(e)) continue;
    const Edge& ed = g.edges()[e];
    if (ed.u == v) out.push_back(ed.v);
    if (ed.v == v) out.push_back(ed.u);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<EdgeIndex> find_bridges(const Graph& g) {
  // Iterative Tarjan low-link. The parent edge (not the parent node) is
  // skipped, which is correct for simple graphs.
  const NeighborIndex adj(g);
  const std::size_t n = g.num_nodes();
  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> disc(n, kUnvisited), low(n, 0);
  std::vector<EdgeIndex> bridges;

  struct Frame {
    NodeId node;
    EdgeIndex parent_edge;
    std::size_t next;
  };
  std::vector<Frame> stack;
  std::size_t timer = 0;

  for (NodeId root = 0; root < n; ++root) {
    if (disc[root] != kUnvisited) continue;
    disc[root] = low[root] = timer++;
    stack.push_back({root, static_cast<EdgeIndex>(-1), 0});
    while (!stack.empty()) {
      Frame& f = stack.back();
      const auto nbrs = adj.neighbors(f.node);
      const auto eids = adj.incident_edges(f.node);
      if (f.next < nbrs.size()) {
        const NodeId w = nbrs[f.next];
        const EdgeIndex e = eids[f.next];
        ++f.next;
        if (e == f.parent_edge) continue;
        if (disc[w] == kUnvisited) {
          disc[w] = low[w] = timer++;
          stack.push_back({w, e, 0});
        } else {
          low[f.node] = std::min(low[f.node], disc[w]);
        }
        continue;
      }
      const Frame done = f;
      stack.pop_back();
      if (!stack.empty()) {
        Frame& parent = stack.back();
        low[parent.node] = std::min(low[parent.node], low[done.node]);
        if (low[done.node] > disc[parent.node]) bridges.push_back(done.parent_edge);
      }
    }
  }
  std::sort(bridges.begin(), bridges.end());
  return bridges;
}

namespace {

std::vector<std::size_t> component_ids(const Graph& g, std::size_t* count) {
  const NeighborIndex adj(g);
  const std::size_t n = g.num_nodes();
  std::vector<std::size_t> comp(n, static_cast<std::size_t>(-1));
  std::size_t next = 0;
  std::vector<NodeId> queue;
  for (NodeId s = 0; s < n; ++s) {
    if (comp[s] != static_cast<std::size_t>(-1)) continue;
    comp[s] = next;
    queue.assign(1, s);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      for (NodeId w : adj.neighbors(queue[head])) {
        if (comp[w] == static_cast<std::size_t>(-1)) {
          comp[w] = next;
          queue.push_back(w);
        }
      }
    }
    ++next;
  }
  *count = next;
  return comp;
}

}  // namespace

std::vector<std::vector<NodeId>> connected_components(const Graph& g) {
  std::size_t count = 0;
  const auto comp = component_ids(g, &count);
  std::vector<std::vector<NodeId>> out(count);
  for (NodeId v = 0; v < comp.size(); ++v) out[comp[v]].push_back(v);
  return out;
}

std::size_t count_components(const Graph& g) {
  std::size_t count = 0;
  component_ids(g, &count);
  return count;
}

Subgraph induced_subgraph(const Graph& g, const NodeSubset& keep) {
  const std::size_t n = g.num_nodes();
  constexpr NodeId kDropped = static_cast<NodeId>(-1);
  std::vector<NodeId> remap(n, kDropped);
  for (std::size_t i = 0; i < keep.nodes.size(); ++i) {
    if (keep.nodes[i] >= n) throw GraphError("subset node out of range");
    remap[keep.nodes[i]] = static_cast<NodeId>(i);
  }

  std::vector<Edge> edges;
  std::vector<std::uint8_t> mask;
  for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edges()[e];
    if (remap[ed.u] == kDropped || remap[ed.v] == kDropped) continue;
    edges.push_back({remap[ed.u], remap[ed.v]});
    mask.push_back(g.edge_mask()[e]);
  }

  FeatureMatrix feats(static_cast<Eigen::Index>(keep.size()), g.features().cols());
  std::vector<int> labels;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    feats.row(static_cast<Eigen::Index>(i)) = g.features().row(keep.nodes[i]);
    if (g.has_labels()) labels.push_back(g.labels()[keep.nodes[i]]);
  }
  // Remapping is monotone, so the edge list stays canonical and mask bits
  // stay aligned.
  Graph out = with_edge_mask(build_graph(edges, std::move(feats), std::move(labels)), std::move(mask));
  for (const auto& r : g.privacy_log()) out.record_privacy(r);
  return {std::move(out), keep.nodes};
}

Graph sbm_generate(const SbmParams& p) {
  if (!(p.p_out >= 0.0 && p.p_out <= p.p_in && p.p_in <= 1.0)) {
    throw GraphError("sbm_generate requires 0 <= p_out <= p_in <= 1");
  }
  std::size_t n = 0;
  std::vector<int> labels;
  for (std::size_t b = 0; b < p.block_sizes.size(); ++b) {
    n += p.block_sizes[b];
    labels.insert(labels.end(), p.block_sizes[b], static_cast<int>(b));
  }

  // Separate streams for structure, block means and jitter so changing the
  // feature dimension does not reshuffle the edges.
  Rng edge_rng(derive_seed(p.seed, 1));
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      const double prob = labels[u] == labels[v] ? p.p_in : p.p_out;
      if (edge_rng.bernoulli(prob)) edges.push_back({u, v});
    }
  }

  const auto d = static_cast<Eigen::Index>(p.feature_dim);
  Rng mean_rng(derive_seed(p.seed, 2));
  FeatureMatrix means(static_cast<Eigen::Index>(p.block_sizes.size()), d);
  for (Eigen::Index b = 0; b < means.rows(); ++b)
    for (Eigen::Index j = 0; j < d; ++j) means(b, j) = mean_rng.normal();

  Rng jitter_rng(derive_seed(p.seed, 3));
  FeatureMatrix feats(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index v = 0; v < feats.rows(); ++v)
    for (Eigen::Index j = 0; j < d; ++j)
      feats(v, j) = means(labels[v], j) + p.feature_jitter * jitter_rng.normal();

  return build_graph(edges, std::move(feats), std::move(labels));
}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = t.find(',', start);
      const auto tok = trim(t.substr(start, comma == std::string_view::npos ? t.npos : comma - start));
      double x = 0;
      if (!parse_number(tok, x)) {
        throw ParseError(path.string(), lineno, "bad number '" + std::string(tok) + "'");
      }
      row.push_back(x);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path.string(), lineno, "ragged row");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Graph load_edge_list(const std::filesystem::path& edge_path,
                     const std::optional<std::filesystem::path>& feature_path,
                     const std::optional<std::filesystem::path>& label_path) {
  auto in = open_or_throw(edge_path);
  std::vector<Edge> edges;
  std::size_t max_id_plus_one = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view t = line;
    if (const auto hash = t.find('#'); hash != t.npos) t = t.substr(0, hash);
    t = trim(t);
    if (t.empty()) continue;
    std::istringstream ss{std::string(t)};
    std::string a, b, extra;
    NodeId u = 0, v = 0;
    if (!(ss >> a >> b) || (ss >> extra) || !parse_number<NodeId>(a, u) ||
        !parse_number<NodeId>(b, v)) {
      throw ParseError(edge_path.string(), lineno, "expected 'u v', got '" + std::string(t) + "'");
    }
    if (u == v) throw ParseError(edge_path.string(), lineno, "self-loop");
    edges.push_back({u, v});
    max_id_plus_one = std::max<std::size_t>(max_id_plus_one, std::max(u, v) + 1);
  }

  std::size_t n = max_id_plus_one;
  FeatureMatrix feats;
  if (feature_path) {
    const auto rows = read_csv(*feature_path);
    if (rows.size() < max_id_plus_one) {
      throw GraphError("feature file has " + std::to_string(rows.size()) +
                       " rows but the edge list references node " +
                       std::to_string(max_id_plus_one - 1));
    }
    n = rows.size();
    const auto d = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
    feats.resize(static_cast<Eigen::Index>(n), d);
    for (std::size_t i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j) feats(static_cast<Eigen::Index>(i), j) = rows[i][j];
  }

  std::vector<int> labels;
  if (label_path) {
    const auto rows = read_csv(*label_path);
    if (!feature_path) n = std::max(n, rows.size());
    if (rows.size() != n) {
      throw GraphError("label file has " + std::to_string(rows.size()) + " rows, expected " +
                       std::to_string(n));
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != 1 || rows[i][0] < 0 || rows[i][0] != static_cast<int>(rows[i][0])) {
        throw ParseError(label_path->string(), i + 1, "expected one non-negative integer label");
      }
      labels.push_back(static_cast<int>(rows[i][0]));
    }
  }
  if (!feature_path) feats.resize(static_cast<Eigen::Index>(n), 0);
  return build_graph(edges, std::move(feats), std::move(labels));
}

}  // namespace orbitsplit
