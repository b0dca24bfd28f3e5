#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "orbitsplit/graph.hpp"

using namespace orbitsplit;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
  const auto dir = std::filesystem::temp_directory_path() / "orbitsplit_graph_test";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p) << body;
  return p;
}

Graph two_triangles_joined() {
  return build_graph(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {2, 3}});
}

}  // namespace

TEST(BuildGraph, CanonicalizesAndDeduplicates) {
  const Graph g = build_graph(2, {{1, 0}, {0, 1}});
  ASSERT_EQ(g.num_edges(), 1u);
  EXPECT_EQ(g.edges()[0], (Edge{0, 1}));
  EXPECT_EQ(g.edge_mask(), std::vector<std::uint8_t>{1});
}

TEST(BuildGraph, EmptyEdgeList) {
  const Graph g = build_graph(3, {});
  EXPECT_EQ(g.num_nodes(), 3u);
  EXPECT_EQ(g.num_edges(), 0u);
}

TEST(BuildGraph, RejectsBadInput) {
  EXPECT_THROW(build_graph(3, {{0, 5}}), GraphError);
  EXPECT_THROW(build_graph(3, {{1, 1}}), GraphError);
  FeatureMatrix x(2, 1);
  x << 1, 2;
  const std::vector<Edge> e{{0, 1}};
  EXPECT_THROW(build_graph(e, x, {0, 1, 2}), GraphError);
}

TEST(BuildGraph, Idempotent) {
  const Graph g = oracle::random_graph(15, 0.3, 11);
  const Graph h = build_graph(g.edges(), g.features(), g.labels());
  EXPECT_EQ(g, h);
}

TEST(ActiveNeighbors, PathAndMask) {
  Graph g = build_graph(3, {{0, 1}, {1, 2}});
  EXPECT_EQ(active_neighbors(g, 1), (std::vector<NodeId>{0, 2}));
  g.set_edge_active(*g.find_edge(0, 1), false);
  EXPECT_EQ(active_neighbors(g, 1), (std::vector<NodeId>{2}));
  const Graph iso = build_graph(2, {});
  EXPECT_TRUE(active_neighbors(iso, 0).empty());
}

TEST(ActiveNeighbors, MaskingIsLocal) {
  Graph g = oracle::random_graph(12, 0.4, 5);
  ASSERT_GT(g.num_edges(), 0u);
  const auto [u, v] = g.edges()[0];
  std::vector<std::vector<NodeId>> before;
  for (NodeId w = 0; w < g.num_nodes(); ++w) before.push_back(active_neighbors(g, w));
  g.set_edge_active(0, false);
  for (NodeId w = 0; w < g.num_nodes(); ++w) {
    if (w == u || w == v) continue;
    EXPECT_EQ(active_neighbors(g, w), before[w]);
  }
}

TEST(Bridges, PathCycleAndJoinedTriangles) {
  EXPECT_EQ(find_bridges(build_graph(4, {{0, 1}, {1, 2}, {2, 3}})).size(), 3u);
  EXPECT_TRUE(find_bridges(build_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}})).empty());
  const Graph g = two_triangles_joined();
  const auto b = find_bridges(g);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(g.edges()[b[0]], (Edge{2, 3}));
  EXPECT_EQ(b, oracle::bridges(g));
}

TEST(Bridges, MatchesRemoveAndCheckOracle) {
  for (std::uint64_t s = 0; s < 60; ++s) {
    const std::size_t n = 2 + s % 49;
    const double p = 1.5 / static_cast<double>(n) + 0.05 * static_cast<double>(s % 4);
    Graph g = oracle::random_graph(n, p, s);
    if (s % 3 == 0 && g.num_edges() > 2) {
      g.set_edge_active(0, false);
      g.set_edge_active(g.num_edges() / 2, false);
    }
    EXPECT_EQ(find_bridges(g), oracle::bridges(g)) << "seed " << s;
  }
}

TEST(Components, Examples) {
  EXPECT_EQ(count_components(build_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}})), 1u);
  EXPECT_EQ(count_components(build_graph(3, {})), 3u);
  Graph p4 = build_graph(4, {{0, 1}, {1, 2}, {2, 3}});
  p4.set_edge_active(1, false);
  const auto cc = connected_components(p4);
  ASSERT_EQ(cc.size(), 2u);
  EXPECT_EQ(cc[0].size(), 2u);
  EXPECT_EQ(cc[1].size(), 2u);
}

TEST(Components, EveryNodeOnce) {
  const Graph g = oracle::random_graph(30, 0.05, 8);
  std::vector<int> seen(30, 0);
  for (const auto& c : connected_components(g))
    for (NodeId v : c) ++seen[v];
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(count_components(g), oracle::components(g));
}

TEST(InducedSubgraph, FiltersRowsAndReindexes) {
  FeatureMatrix x(4, 1);
  x << 10, 11, 12, 13;
  const std::vector<Edge> e{{0, 1}, {1, 2}, {2, 3}};
  const Graph g = build_graph(e, x, {0, 1, 0, 1});
  const Subgraph s = induced_subgraph(g, NodeSubset::from_unsorted({3, 1, 2}));
  EXPECT_EQ(s.original_ids, (std::vector<NodeId>{1, 2, 3}));
  EXPECT_EQ(s.graph.num_edges(), 2u);
  EXPECT_EQ(s.graph.features()(0, 0), 11);
  EXPECT_EQ(s.graph.labels(), (std::vector<int>{1, 0, 1}));
}

TEST(Sbm, CompletePairsWhenPinIsOne) {
  const Graph g = sbm_generate({{2, 2}, 1.0, 0.0, 3, 9});
  EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}, {2, 3}}));
  EXPECT_EQ(g.labels(), (std::vector<int>{0, 0, 1, 1}));
  EXPECT_EQ(g.feature_dim(), 3u);
}

TEST(Sbm, Deterministic) {
  const SbmParams p{{20, 20}, 0.3, 0.05, 4, 17};
  EXPECT_EQ(sbm_generate(p), sbm_generate(p));
  SbmParams q = p;
  q.seed = 18;
  EXPECT_FALSE(sbm_generate(p) == sbm_generate(q));
}

TEST(Sbm, IntraBlockDegreeMatchesExpectation) {
  // E[intra-block degree] = p_in * (block - 1) = 14.7
  double total = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Graph g = sbm_generate({{50, 50, 50}, 0.3, 0.02, 2, s});
    std::size_t intra = 0;
    for (const auto& e : g.edges()) intra += g.labels()[e.u] == g.labels()[e.v];
    total += 2.0 * static_cast<double>(intra) / 150.0;
  }
  EXPECT_NEAR(total / 10.0, 14.7, 0.2 * 14.7);
}

TEST(Sbm, RejectsBadProbabilities) {
  EXPECT_THROW(sbm_generate({{5, 5}, 0.1, 0.2, 2, 0}), GraphError);
  EXPECT_THROW(sbm_generate({{5, 5}, 1.2, 0.0, 2, 0}), GraphError);
}

TEST(EdgeList, ParsesPathWithCommentsAndDuplicates) {
  const auto p = write_temp("p3.txt", "# path\n0 1\n1 2\n0 1\n");
  const Graph g = load_edge_list(p);
  EXPECT_EQ(g.num_nodes(), 3u);
  EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}, {1, 2}}));
}

TEST(EdgeList, FeaturesAndLabels) {
  const auto e = write_temp("e.txt", "0 1\n1 2\n");
  const auto f = write_temp("f.csv", "1,2\n3,4\n5,6\n");
  const auto l = write_temp("l.csv", "0\n1\n1\n");
  const Graph g = load_edge_list(e, f, l);
  EXPECT_EQ(g.feature_dim(), 2u);
  EXPECT_EQ(g.features()(2, 1), 6.0);
  EXPECT_EQ(g.labels(), (std::vector<int>{0, 1, 1}));
}

TEST(EdgeList, Errors) {
  const auto e = write_temp("e2.txt", "0 1\n1 2\n");
  const auto short_f = write_temp("f2.csv", "1,2\n3,4\n");
  EXPECT_THROW(load_edge_list(e, short_f), GraphError);
  const auto bad = write_temp("bad.txt", "0 1\n1 x\n");
  try {
    load_edge_list(bad);
    FAIL() << "expected a parse error";
  } catch (const ParseError& err) {
    EXPECT_EQ(err.line(), 2u) << err.what();
  }
  EXPECT_THROW(load_edge_list("/nonexistent/file.txt"), std::runtime_error);
}
