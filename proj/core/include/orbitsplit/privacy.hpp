#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "orbitsplit/graph.hpp"

namespace orbitsplit {

class PrivacyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Gaussian-mechanism calibration state.
struct PrivacyParams {
  double epsilon = 1.0;
  double delta = 1e-5;
  double sensitivity = 1.0;
  double sigma = 0.0;
  double clip_bound = 1.0;  // L2 radius each feature row is clipped to
};

enum class AdjacencyKind { kEdgeAdjacent, kNodeAdjacent };

enum class QueryKind { kEdgeCount, kDegreeVector, kClippedFeatureRelease };

// sigma = sensitivity * sqrt(2 ln(1.25 / delta)) / epsilon
double noise_scale(double sensitivity, double epsilon, double delta);

// Inverse of noise_scale in epsilon.
double privacy_budget(double sigma, double sensitivity, double delta);

// Params with sigma set by noise_scale; sensitivity defaults to the clip
// bound, the L2 sensitivity of releasing clipped feature rows.
PrivacyParams calibrate(double epsilon, double delta, double clip_bound = 1.0);
PrivacyParams calibrate(double epsilon, double delta, double sensitivity, double clip_bound);

// True when sigma meets the calibration inequality for (epsilon, delta, sensitivity).
bool is_calibrated(const PrivacyParams& p);

double analytic_sensitivity(QueryKind query, AdjacencyKind adjacency, double clip_bound = 1.0);

using GraphQuery = std::function<std::vector<double>(const Graph&)>;

GraphQuery edge_count_query();
GraphQuery degree_vector_query();
GraphQuery clipped_feature_query(double clip_bound);

/// Largest L2 output change over every neighbouring graph of g.
///
/// Edge adjacency toggles each node pair in turn (adds it if absent or
/// masked, removes it if active). Node adjacency removes one node at a time;
/// to keep outputs index-aligned the removed node stays as an isolated vertex
/// with an all-zero feature row. Only removals are enumerated, so the result
/// is a lower bound on the true sensitivity. Throws for graphs above
/// `max_nodes`.
double bruteforce_sensitivity(const GraphQuery& query, const Graph& g, AdjacencyKind adjacency,
                              std::size_t max_nodes = 12);

// Adds N(0, sigma^2) to each entry, drawn in order from Rng(seed).
std::vector<double> perturb(std::span<const double> values, double sigma, std::uint64_t seed);

// Rows scaled down to L2 norm <= clip_bound.
FeatureMatrix clip_rows(const FeatureMatrix& features, double clip_bound);

/// Clips each feature row to clip_bound and adds N(0, sigma^2) per
/// coordinate (row-major draw order). Edges, mask and labels are untouched;
/// the returned graph records the (epsilon, delta) spent.
Graph apply_dp_to_graph(const Graph& g, const PrivacyParams& params, std::uint64_t seed);

struct CalibrationRow {
  double budget_scale = 1.0;
  double epsilon = 0.0;
  double delta = 0.0;
  double sensitivity = 0.0;
  double sigma = 0.0;
};

// epsilon(scale) = scale * epsilon_base, sigma from noise_scale.
std::vector<CalibrationRow> calibration_table(std::span<const double> budget_scales,
                                              double epsilon_base, double delta,
                                              double sensitivity);
void write_calibration_csv(std::ostream& out, std::span<const CalibrationRow> rows);

}  // namespace orbitsplit
