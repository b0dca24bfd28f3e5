#include "orbitsplit/privacy.hpp"

#include <cmath>
#include <ostream>

#include "orbitsplit/csv.hpp"
#include "orbitsplit/rng.hpp"

namespace orbitsplit {

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw PrivacyError("delta must be in (0, 1)");
}

double gaussian_factor(double delta) { return std::sqrt(2.0 * std::log(1.25 / delta)); }

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw PrivacyError("query output length changed between neighbours");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

double noise_scale(double sensitivity, double epsilon, double delta) {
  if (!(epsilon > 0.0)) throw PrivacyError("epsilon must be positive");
  if (!(sensitivity >= 0.0)) throw PrivacyError("sensitivity must be non-negative");
  check_delta(delta);
  return sensitivity * gaussian_factor(delta) / epsilon;
}

double privacy_budget(double sigma, double sensitivity, double delta) {
  if (!(sigma > 0.0)) throw PrivacyError("sigma must be positive");
  check_delta(delta);
  return sensitivity * gaussian_factor(delta) / sigma;
}

PrivacyParams calibrate(double epsilon, double delta, double clip_bound) {
  return calibrate(epsilon, delta, analytic_sensitivity(QueryKind::kClippedFeatureRelease,
                                                        AdjacencyKind::kNodeAdjacent, clip_bound),
                   clip_bound);
}

PrivacyParams calibrate(double epsilon, double delta, double sensitivity, double clip_bound) {
  if (!(clip_bound > 0.0)) throw PrivacyError("clip bound must be positive");
  return {epsilon, delta, sensitivity, noise_scale(sensitivity, epsilon, delta), clip_bound};
}

bool is_calibrated(const PrivacyParams& p) {
  if (!(p.epsilon > 0.0) || !(p.delta > 0.0 && p.delta < 1.0) || !(p.clip_bound > 0.0)) return false;
  const double required = noise_scale(p.sensitivity, p.epsilon, p.delta);
  return p.sigma >= required * (1.0 - 1e-12);
}

double analytic_sensitivity(QueryKind query, AdjacencyKind adjacency, double clip_bound) {
  if (query == QueryKind::kEdgeCount && adjacency == AdjacencyKind::kEdgeAdjacent) return 1.0;
  if (query == QueryKind::kDegreeVector && adjacency == AdjacencyKind::kEdgeAdjacent) {
    return std::sqrt(2.0);
  }
  if (query == QueryKind::kClippedFeatureRelease && adjacency == AdjacencyKind::kNodeAdjacent) {
    if (!(clip_bound > 0.0)) throw PrivacyError("clip bound must be positive");
    return clip_bound;
  }
  throw PrivacyError("unsupported (query, adjacency) combination");
}

GraphQuery edge_count_query() {
  return [](const Graph& g) { return std::vector<double>{static_cast<double>(g.num_active_edges())}; };
}

GraphQuery degree_vector_query() {
  return [](const Graph& g) {
    const NeighborIndex adj(g);
    std::vector<double> deg(g.num_nodes());
    for (NodeId v = 0; v < deg.size(); ++v) deg[v] = static_cast<double>(adj.degree(v));
    return deg;
  };
}

GraphQuery clipped_feature_query(double clip_bound) {
  return [clip_bound](const Graph& g) {
    const FeatureMatrix c = clip_rows(g.features(), clip_bound);
    return std::vector<double>(c.data(), c.data() + c.size());
  };
}

double bruteforce_sensitivity(const GraphQuery& query, const Graph& g, AdjacencyKind adjacency,
                              std::size_t max_nodes) {
  const std::size_t n = g.num_nodes();
  if (n > max_nodes) throw PrivacyError("graph too large for brute-force sensitivity");
  const auto base = query(g);
  double worst = 0.0;

  if (adjacency == AdjacencyKind::kEdgeAdjacent) {
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId v = u + 1; v < n; ++v) {
        Graph neighbour;
        if (auto e = g.find_edge(u, v)) {
          neighbour = g;
          neighbour.set_edge_active(*e, !g.edge_active(*e));
        } else {
          std::vector<Edge> edges;
          std::vector<std::uint8_t> mask = g.edge_mask();
          edges = g.edges();
          edges.push_back({u, v});
          // Rebuild, then restore the original mask bits by edge identity.
          Graph grown = build_graph(edges, g.features(), g.labels());
          std::vector<std::uint8_t> m(grown.num_edges(), 1);
          for (EdgeIndex i = 0; i < g.num_edges(); ++i) {
            m[*grown.find_edge(g.edges()[i].u, g.edges()[i].v)] = mask[i];
          }
          neighbour = with_edge_mask(std::move(grown), std::move(m));
        }
        worst = std::max(worst, l2_distance(base, query(neighbour)));
      }
    }
    return worst;
  }

  for (NodeId v = 0; v < n; ++v) {
    Graph neighbour = g;
    for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
      if (g.edges()[e].u == v || g.edges()[e].v == v) neighbour.set_edge_active(e, false);
    }
    FeatureMatrix f = g.features();
    f.row(v).setZero();
    neighbour.set_features(std::move(f));
    worst = std::max(worst, l2_distance(base, query(neighbour)));
  }
  return worst;
}

std::vector<double> perturb(std::span<const double> values, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw PrivacyError("sigma must be non-negative");
  std::vector<double> out(values.begin(), values.end());
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (double& x : out) x += sigma * rng.normal();
  return out;
}

FeatureMatrix clip_rows(const FeatureMatrix& features, double clip_bound) {
  FeatureMatrix out = features;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double norm = out.row(r).norm();
    if (norm > clip_bound) out.row(r) *= clip_bound / norm;
  }
  return out;
}

Graph apply_dp_to_graph(const Graph& g, const PrivacyParams& params, std::uint64_t seed) {
  if (!is_calibrated(params)) {
    throw PrivacyError("privacy params are not calibrated: sigma below the Gaussian-mechanism bound");
  }
  FeatureMatrix f = clip_rows(g.features(), params.clip_bound);
  if (params.sigma > 0.0) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] += params.sigma * rng.normal();
  }
  Graph out = g;
  out.set_features(std::move(f));
  out.record_privacy({params.epsilon, params.delta});
  return out;
}

std::vector<CalibrationRow> calibration_table(std::span<const double> budget_scales,
                                              double epsilon_base, double delta,
                                              double sensitivity) {
  std::vector<CalibrationRow> rows;
  for (double scale : budget_scales) {
    const double eps = scale * epsilon_base;
    rows.push_back({scale, eps, delta, sensitivity, noise_scale(sensitivity, eps, delta)});
  }
  return rows;
}

void write_calibration_csv(std::ostream& out, std::span<const CalibrationRow> rows) {
  CsvWriter csv(out, {"budget_scale", "epsilon", "delta", "sensitivity", "sigma"});
  for (const auto& r : rows) csv.row(r.budget_scale, r.epsilon, r.delta, r.sensitivity, r.sigma);
}

}  // namespace orbitsplit
