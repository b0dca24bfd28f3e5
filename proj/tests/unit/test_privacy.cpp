#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "orbitsplit/privacy.hpp"

using namespace orbitsplit;

namespace {

Graph with_features(std::size_t n, std::size_t dim, double value, std::vector<Edge> edges = {}) {
  FeatureMatrix f = FeatureMatrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim), value);
  return build_graph(edges, std::move(f));
}

}  // namespace

TEST(NoiseScale, ReferenceConstant) {
  const long double c = std::sqrt(2.0L * std::log(1.25L / 1e-5L));
  EXPECT_NEAR(noise_scale(1.0, 1.0, 1e-5), static_cast<double>(c), 1e-12);
  EXPECT_NEAR(noise_scale(1.0, 1.0, 1e-5), 4.844805, 1e-6);
}

TEST(NoiseScale, LinearInSensitivityInverseInEpsilon) {
  const double base = noise_scale(1.0, 1.0, 1e-5);
  EXPECT_NEAR(noise_scale(3.0, 1.0, 1e-5), 3.0 * base, 1e-12);
  EXPECT_NEAR(noise_scale(1.0, 4.0, 1e-5), base / 4.0, 1e-12);
  EXPECT_EQ(noise_scale(0.0, 1.0, 1e-5), 0.0);
}

TEST(NoiseScale, MonotoneInBudget) {
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.1, 0.5, 1.0, 2.0, 8.0}) {
    const double s = noise_scale(1.0, eps, 1e-5);
    EXPECT_LT(s, prev);
    prev = s;
  }
  EXPECT_GT(noise_scale(1.0, 1.0, 1e-7), noise_scale(1.0, 1.0, 1e-3));
}

TEST(NoiseScale, RejectsBadArguments) {
  EXPECT_THROW(noise_scale(1.0, 0.0, 1e-5), PrivacyError);
  EXPECT_THROW(noise_scale(1.0, 1.0, 0.0), PrivacyError);
  EXPECT_THROW(noise_scale(1.0, 1.0, 1.0), PrivacyError);
  EXPECT_THROW(noise_scale(-1.0, 1.0, 1e-5), PrivacyError);
}

TEST(PrivacyBudget, InvertsNoiseScale) {
  for (double eps : {0.05, 0.8, 3.2, 8.0}) {
    for (double sens : {0.5, 1.0, 2.0}) {
      const double s = noise_scale(sens, eps, 1e-5);
      EXPECT_NEAR(privacy_budget(s, sens, 1e-5), eps, 1e-12 * eps);
    }
  }
}

TEST(Calibrate, SetsSigmaAndIsCalibrated) {
  const auto p = calibrate(2.0, 1e-5, 1.5);
  EXPECT_DOUBLE_EQ(p.sensitivity, 1.5);
  EXPECT_NEAR(p.sigma, 1.5 * noise_scale(1.0, 2.0, 1e-5), 1e-12);
  EXPECT_TRUE(is_calibrated(p));
  auto weak = p;
  weak.sigma *= 0.9;
  EXPECT_FALSE(is_calibrated(weak));
}

TEST(Sensitivity, AnalyticValues) {
  EXPECT_EQ(analytic_sensitivity(QueryKind::kEdgeCount, AdjacencyKind::kEdgeAdjacent), 1.0);
  EXPECT_DOUBLE_EQ(analytic_sensitivity(QueryKind::kDegreeVector, AdjacencyKind::kEdgeAdjacent), std::sqrt(2.0));
  EXPECT_EQ(analytic_sensitivity(QueryKind::kClippedFeatureRelease, AdjacencyKind::kNodeAdjacent, 2.5), 2.5);
  EXPECT_THROW(analytic_sensitivity(QueryKind::kEdgeCount, AdjacencyKind::kNodeAdjacent), PrivacyError);
}

TEST(Sensitivity, TriangleDegreeVector) {
  const Graph k3 = build_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  EXPECT_NEAR(bruteforce_sensitivity(degree_vector_query(), k3, AdjacencyKind::kEdgeAdjacent), std::sqrt(2.0),
              1e-12);
  EXPECT_EQ(bruteforce_sensitivity(edge_count_query(), k3, AdjacencyKind::kEdgeAdjacent), 1.0);
}

TEST(Sensitivity, BruteForceNeverExceedsAnalytic) {
  for (std::uint64_t s = 0; s < 40; ++s) {
    const std::size_t n = 2 + s % 7;
    const Graph g0 = oracle::random_graph(n, 0.4, 500 + s);
    FeatureMatrix f(static_cast<Eigen::Index>(n), 3);
    std::mt19937_64 rng(s);
    std::normal_distribution<double> nd(0.0, 2.0);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = nd(rng);
    const Graph g = build_graph(g0.edges(), f);
    const double tol = 1e-12;
    EXPECT_LE(bruteforce_sensitivity(edge_count_query(), g, AdjacencyKind::kEdgeAdjacent),
              analytic_sensitivity(QueryKind::kEdgeCount, AdjacencyKind::kEdgeAdjacent) + tol);
    EXPECT_LE(bruteforce_sensitivity(degree_vector_query(), g, AdjacencyKind::kEdgeAdjacent),
              analytic_sensitivity(QueryKind::kDegreeVector, AdjacencyKind::kEdgeAdjacent) + tol);
    EXPECT_LE(bruteforce_sensitivity(clipped_feature_query(1.0), g, AdjacencyKind::kNodeAdjacent),
              analytic_sensitivity(QueryKind::kClippedFeatureRelease, AdjacencyKind::kNodeAdjacent, 1.0) + tol);
  }
}

TEST(Sensitivity, BruteForceRejectsLargeGraphs) {
  EXPECT_THROW(bruteforce_sensitivity(edge_count_query(), build_graph(13, {}), AdjacencyKind::kEdgeAdjacent),
               PrivacyError);
}

TEST(Perturb, ZeroSigmaIsIdentityAndSeedsAreDeterministic) {
  const std::vector<double> v{1.0, -2.0, 3.5};
  EXPECT_EQ(perturb(v, 0.0, 9), v);
  EXPECT_EQ(perturb(v, 1.0, 9), perturb(v, 1.0, 9));
  EXPECT_NE(perturb(v, 1.0, 9), perturb(v, 1.0, 10));
  EXPECT_THROW(perturb(v, -1.0, 0), PrivacyError);
}

TEST(Perturb, NoiseIsGaussianWithRequestedScale) {
  const double sigma = 2.5;
  const std::size_t n = 100000;
  const auto out = perturb(std::vector<double>(n, 0.0), sigma, 12345);
  double mean = 0.0, sq = 0.0;
  for (double x : out) {
    mean += x;
    sq += x * x;
  }
  mean /= static_cast<double>(n);
  const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
  EXPECT_NEAR(mean, 0.0, 5.0 * sigma / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(sd / sigma, 1.0, 0.01);
  EXPECT_LT(oracle::ks_statistic(out, sigma), oracle::ks_critical_001(n));
}

TEST(ClipRows, ScalesOnlyLongRows) {
  FeatureMatrix f(2, 2);
  f << 3.0, 4.0, 0.3, 0.4;
  const FeatureMatrix c = clip_rows(f, 1.0);
  EXPECT_NEAR(c(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(c(0, 1), 0.8, 1e-15);
  EXPECT_EQ(c(1, 0), 0.3);
  EXPECT_EQ(c(1, 1), 0.4);
}

TEST(ApplyDp, StructureUntouchedAndRecorded) {
  const Graph g = build_graph(std::vector<Edge>{{0, 1}, {1, 2}}, FeatureMatrix::Constant(3, 4, 0.1), {0, 1, 0});
  const auto p = calibrate(1.0, 1e-5);
  const Graph noisy = apply_dp_to_graph(g, p, 3);
  EXPECT_EQ(noisy.edges(), g.edges());
  EXPECT_EQ(noisy.edge_mask(), g.edge_mask());
  EXPECT_EQ(noisy.labels(), g.labels());
  ASSERT_EQ(noisy.privacy_log().size(), 1u);
  EXPECT_EQ(noisy.privacy_log()[0], (PrivacyRecord{1.0, 1e-5}));
  EXPECT_NE(noisy.features(), g.features());
  EXPECT_EQ(noisy, apply_dp_to_graph(g, p, 3));
}

TEST(ApplyDp, ZeroFeaturesGetNoiseOfCalibratedScale) {
  const Graph g = with_features(2000, 25, 0.0);
  const auto p = calibrate(4.0, 1e-5);
  const Graph noisy = apply_dp_to_graph(g, p, 77);
  const auto& f = noisy.features();
  const double mean = f.mean();
  const double sd = std::sqrt((f.array() - mean).square().mean());
  EXPECT_NEAR(sd / p.sigma, 1.0, 0.01);
}

TEST(ApplyDp, RejectsUncalibratedParams) {
  auto p = calibrate(1.0, 1e-5);
  p.sigma = 0.5 * p.sigma;
  EXPECT_THROW(apply_dp_to_graph(with_features(3, 2, 0.0), p, 0), PrivacyError);
}

TEST(Calibration, TableAndCsv) {
  const std::vector<double> scales{1.0, 0.5};
  const auto rows = calibration_table(scales, 8.0, 1e-5, 1.0);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].epsilon, 4.0);
  EXPECT_NEAR(rows[1].sigma, 2.0 * rows[0].sigma, 1e-12);
  std::ostringstream out;
  write_calibration_csv(out, rows);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "budget_scale,epsilon,delta,sensitivity,sigma");
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 2u);
}
