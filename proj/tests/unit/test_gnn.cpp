#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "orbitsplit/gnn.hpp"

using namespace orbitsplit;

namespace {

Graph small_graph(std::size_t n, std::size_t dim, std::uint64_t seed) {
  const Graph base = oracle::random_graph(n, 0.35, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  FeatureMatrix f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = nd(rng);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 3);
  return build_graph(base.edges(), std::move(f), std::move(labels));
}

// Flat views of every trainable tensor, in a fixed order, paired with grads.
struct Coord {
  double* value;
  double grad;
};

std::vector<Coord> coords(GnnModel& m, const ModelGrads<double>& g) {
  std::vector<Coord> out;
  auto add = [&](auto& value, const auto& grad) {
    for (Eigen::Index i = 0; i < value.size(); ++i) out.push_back({value.data() + i, grad.data()[i]});
  };
  add(m.encoder.layer.w_self, g.encoder.layer.d_self);
  add(m.encoder.layer.w_neigh, g.encoder.layer.d_neigh);
  add(m.encoder.layer.bias, g.encoder.layer.d_bias);
  add(m.encoder.bn.gamma, g.encoder.bn.d_gamma);
  add(m.encoder.bn.beta, g.encoder.bn.d_beta);
  add(m.head.w_self, g.head.d_self);
  add(m.head.w_neigh, g.head.d_neigh);
  add(m.head.bias, g.head.d_bias);
  return out;
}

std::vector<std::uint8_t> all_nodes(std::size_t n) { return std::vector<std::uint8_t>(n, 1); }

}  // namespace

TEST(Aggregate, MeanOfActiveNeighboursAndIsolatedZero) {
  const Graph g = build_graph(4, {{0, 1}, {1, 2}});
  Mat<double> h(4, 1);
  h << 1.0, 2.0, 5.0, 7.0;
  const auto a = mean_aggregate(NeighborIndex(g), h);
  EXPECT_EQ(a(0, 0), 2.0);
  EXPECT_EQ(a(1, 0), 3.0);
  EXPECT_EQ(a(2, 0), 2.0);
  EXPECT_EQ(a(3, 0), 0.0);
}

TEST(Aggregate, AdjointIdentity) {
  const Graph g = small_graph(9, 1, 3);
  const NeighborIndex adj(g);
  Mat<double> h = Mat<double>::Random(9, 4), r = Mat<double>::Random(9, 4);
  const double lhs = mean_aggregate(adj, h).cwiseProduct(r).sum();
  const double rhs = h.cwiseProduct(mean_aggregate_adjoint(adj, r)).sum();
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Sage, TwoNodeHandComputation) {
  const Graph g = build_graph(2, {{0, 1}});
  SageLayer<double> l = init_sage_layer<double>(1, 1, 0);
  l.w_self(0, 0) = 2.0;
  l.w_neigh(0, 0) = 3.0;
  l.bias(0) = 0.5;
  Mat<double> x(2, 1);
  x << 1.0, 10.0;
  const auto z = sage_forward(l, NeighborIndex(g), x);
  EXPECT_DOUBLE_EQ(z(0, 0), 2.0 * 1.0 + 3.0 * 10.0 + 0.5);
  EXPECT_DOUBLE_EQ(z(1, 0), 2.0 * 10.0 + 3.0 * 1.0 + 0.5);
  l.mask_neigh(0, 0) = 0.0;
  EXPECT_DOUBLE_EQ(sage_forward(l, NeighborIndex(g), x)(0, 0), 2.5);
}

TEST(Loss, UniformLogitsGiveLogC) {
  Mat<double> logits = Mat<double>::Constant(5, 4, 0.7);
  const std::vector<int> labels{0, 1, 2, 3, 0};
  const auto r = cross_entropy(logits, labels, all_nodes(5));
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-14);
  EXPECT_EQ(r.count, 5u);
}

TEST(Loss, MaskSelectsRowsAndZeroesOtherGradients) {
  Mat<double> logits = Mat<double>::Random(4, 3);
  const std::vector<int> labels{0, 1, 2, 1};
  const std::vector<std::uint8_t> mask{1, 0, 1, 0};
  Mat<double> d;
  const auto r = cross_entropy(logits, labels, mask, &d);
  EXPECT_EQ(r.count, 2u);
  double expected = 0.0;
  for (int i : {0, 2}) {
    double lse = std::log(logits.row(i).array().exp().sum());
    expected += lse - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  EXPECT_NEAR(r.loss, expected / 2.0, 1e-14);
  EXPECT_TRUE(d.row(1).isZero());
  EXPECT_TRUE(d.row(3).isZero());
  EXPECT_NEAR(d.row(0).sum(), 0.0, 1e-15);
}

TEST(Model, ZeroWeightsGiveZeroLogits) {
  const Graph g = small_graph(8, 3, 1);
  auto m = init_model<double>(3, 4, 3, 0.0, 0);
  m.head.w_self.setZero();
  m.head.w_neigh.setZero();
  EXPECT_TRUE(forward(m, g, Mode::kEval).logits.isZero());
}

TEST(Model, GradientsMatchFiniteDifferences) {
  const Graph g = small_graph(10, 4, 42);
  auto model = init_model<double>(4, 6, 3, 0.3, 7);
  model.encoder.bn.gamma.setConstant(1.3);
  model.encoder.bn.beta.setConstant(0.2);
  const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1, 0, 1, 1, 1};
  const std::uint64_t seed = 99;
  const auto lg = loss_and_grads(model, g, g.labels(), mask, Mode::kTrain, seed);
  auto cs = coords(model, lg.grads);
  ASSERT_GE(cs.size(), 100u);

  const double h = 1e-5;
  std::size_t checked = 0;
  for (auto& c : cs) {
    const double orig = *c.value;
    *c.value = orig + h;
    const double up = loss_and_grads(model, g, g.labels(), mask, Mode::kTrain, seed).loss;
    *c.value = orig - h;
    const double down = loss_and_grads(model, g, g.labels(), mask, Mode::kTrain, seed).loss;
    *c.value = orig;
    const double fd = (up - down) / (2.0 * h);
    EXPECT_LE(std::abs(c.grad - fd) / std::max(1.0, std::abs(fd)), 1e-4) << "coordinate " << checked;
    ++checked;
  }
  EXPECT_GE(checked, 100u);
}

TEST(Model, PermutationEquivariantInEvalMode) {
  const Graph g = small_graph(12, 3, 8);
  std::vector<NodeId> perm(12);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  std::vector<Edge> e;
  for (const auto& ed : g.edges()) e.push_back({perm[ed.u], perm[ed.v]});
  FeatureMatrix f(12, 3);
  for (NodeId v = 0; v < 12; ++v) f.row(perm[v]) = g.features().row(v);
  const Graph h = build_graph(e, f);
  const auto m = init_model<double>(3, 5, 3, 0.3, 2);
  const auto lg = forward(m, g, Mode::kEval).logits;
  const auto lh = forward(m, h, Mode::kEval).logits;
  for (NodeId v = 0; v < 12; ++v) EXPECT_TRUE(lg.row(v).isApprox(lh.row(perm[v]), 1e-12));
}

TEST(Model, EvalIsDeterministicAndIgnoresDropout) {
  const Graph g = small_graph(10, 3, 5);
  const auto m = init_model<double>(3, 4, 3, 0.5, 1);
  EXPECT_EQ(forward(m, g, Mode::kEval, 1).logits, forward(m, g, Mode::kEval, 2).logits);
  EXPECT_NE(forward(m, g, Mode::kTrain, 1).logits, forward(m, g, Mode::kTrain, 2).logits);
}

TEST(Dropout, KeepRateAndPartitionIndependence) {
  const DropoutSpec spec{0.3, 11};
  std::size_t kept = 0, total = 0;
  for (NodeId v = 0; v < 2000; ++v)
    for (Eigen::Index j = 0; j < 16; ++j) kept += dropout_keep(spec, v, j), ++total;
  EXPECT_NEAR(static_cast<double>(kept) / static_cast<double>(total), 0.7, 0.01);
  const std::vector<NodeId> ids{7, 3};
  const DropoutSpec local{0.3, 11, ids};
  EXPECT_EQ(dropout_keep(local, 7, 4), dropout_keep(spec, 7, 4));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> value{1.0, 2.0, 3.0};
  const std::vector<double> grad{0.5, 0.0, -4.0};
  const std::vector<double> mask{1.0, 1.0, 0.0};
  const std::vector<ParamSlot<double>> slots{{value.data(), grad.data(), mask.data(), 3}};
  AdamState<double> st;
  adam_update<double>(st, slots, 0.01);
  EXPECT_NEAR(value[0], 0.99, 1e-9);
  EXPECT_EQ(value[1], 2.0);  // zero gradient
  EXPECT_EQ(value[2], 3.0);  // masked
  EXPECT_EQ(st.step_count, 1u);
}

TEST(Flops, PathHandCount) {
  const Graph p3 = build_graph(3, {{0, 1}, {1, 2}});
  const auto m = init_model<double>(2, 2, 2, 0.0, 0);
  // per layer: aggregation 4*2 + 3*2, transform 3*2*8 + 3*2
  EXPECT_EQ(count_flops(m, p3), 2u * (14u + 54u));
}

TEST(Flops, MonotoneInEdgesAndMasks) {
  Graph g = small_graph(15, 4, 9);
  auto m = init_model<double>(4, 6, 3, 0.0, 0);
  const auto base = count_flops(m, g);
  g.set_edge_active(0, false);
  EXPECT_LT(count_flops(m, g), base);
  m.encoder.layer.mask_self(0, 0) = 0.0;
  EXPECT_LT(count_flops(m, g), count_flops(init_model<double>(4, 6, 3, 0.0, 0), g));
}

TEST(MagnitudePrune, FullTargetIsNoOp) {
  const Graph g = small_graph(10, 3, 4);
  auto m = init_model<double>(3, 4, 3, 0.0, 0);
  const auto r = magnitude_prune_weights(m, 1.0, g);
  EXPECT_EQ(r.weights_masked, 0u);
  EXPECT_EQ(r.flops_after, r.flops_before);
}

TEST(MagnitudePrune, MeetsBudgetMinimallyAndRemovesSmallestWeights) {
  const Graph g = small_graph(20, 6, 4);
  for (double target : {0.9, 0.5, 0.3}) {
    auto m = init_model<double>(6, 8, 3, 0.0, 3);
    const auto r = magnitude_prune_weights(m, target, g);
    EXPECT_LE(r.flops_after, r.flops_budget);
    EXPECT_EQ(r.flops_after, count_flops(m, g));
    // One weight fewer masked would cost 2|V| FLOPs and break the budget.
    EXPECT_GT(r.flops_after + 2 * g.num_nodes(), r.flops_budget);

    double max_masked = 0.0, min_kept = std::numeric_limits<double>::infinity();
    std::size_t masked = 0;
    for (auto [w, mask] : {std::pair{&m.encoder.layer.w_self, &m.encoder.layer.mask_self},
                           std::pair{&m.encoder.layer.w_neigh, &m.encoder.layer.mask_neigh},
                           std::pair{&m.head.w_self, &m.head.mask_self},
                           std::pair{&m.head.w_neigh, &m.head.mask_neigh}}) {
      for (Eigen::Index i = 0; i < w->size(); ++i) {
        const double a = std::abs(w->data()[i]);
        if (mask->data()[i] == 0.0) {
          max_masked = std::max(max_masked, a);
          ++masked;
        } else {
          min_kept = std::min(min_kept, a);
        }
      }
    }
    EXPECT_EQ(masked, r.weights_masked);
    EXPECT_LE(max_masked, min_kept);
  }
}

TEST(MagnitudePrune, TiesBrokenByPosition) {
  const Graph g = build_graph(std::vector<Edge>{{0, 1}}, FeatureMatrix::Ones(2, 1));
  auto m = init_model<double>(1, 1, 1, 0.0, 0);
  m.encoder.layer.w_self.setConstant(1.0);
  m.encoder.layer.w_neigh.setConstant(1.0);
  m.head.w_self.setConstant(1.0);
  m.head.w_neigh.setConstant(1.0);
  // dense: 2 * (2 + 2 + 2*2*2 + 2) = 28; one masked weight saves 4.
  const auto r = magnitude_prune_weights(m, 24.5 / 28.0, g);
  EXPECT_EQ(r.weights_masked, 1u);
  EXPECT_EQ(m.encoder.layer.mask_self(0, 0), 0.0);
  EXPECT_EQ(m.encoder.layer.mask_neigh(0, 0), 1.0);
}

TEST(MagnitudePrune, RejectsBadRatio) {
  const Graph g = small_graph(5, 2, 1);
  auto m = init_model<double>(2, 2, 2, 0.0, 0);
  EXPECT_THROW(magnitude_prune_weights(m, 0.0, g), ModelError);
  EXPECT_THROW(magnitude_prune_weights(m, 1.5, g), ModelError);
}

template <typename T>
class CheckpointTest : public ::testing::Test {};
using Precisions = ::testing::Types<float, double>;
TYPED_TEST_SUITE(CheckpointTest, Precisions);

TYPED_TEST(CheckpointTest, RoundTripIsExact) {
  auto m = init_model<TypeParam>(5, 4, 3, 0.25, 17);
  m.encoder.layer.mask_neigh(1, 2) = TypeParam(0);
  m.encoder.bn.running_mean.setConstant(TypeParam(0.1));
  const auto path = std::filesystem::temp_directory_path() / "orbitsplit_ckpt_test.json";
  save_checkpoint(m, path);
  const auto back = load_checkpoint<TypeParam>(path);
  EXPECT_EQ(back.encoder.layer.w_self, m.encoder.layer.w_self);
  EXPECT_EQ(back.encoder.layer.mask_neigh, m.encoder.layer.mask_neigh);
  EXPECT_EQ(back.encoder.bn.running_mean, m.encoder.bn.running_mean);
  EXPECT_EQ(back.head.w_neigh, m.head.w_neigh);
  EXPECT_EQ(back.head.bias, m.head.bias);
  EXPECT_EQ(back.dropout_rate, m.dropout_rate);
  std::filesystem::remove(path);
}

TEST(Training, LossDecreasesAndSplitIsPartition) {
  const Graph g = sbm_generate({{30, 30, 30}, 0.3, 0.02, 8, 0, 1.0});
  const auto split = random_node_split(g.num_nodes(), 0.6, 0);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) EXPECT_EQ(split.train[i] + split.test[i], 1);
  auto m = init_model<double>(8, 16, 3, 0.3, 0);
  AdamState<double> adam;
  TrainConfig cfg;
  const auto losses = train_epochs(m, adam, g, split.train, cfg, 60);
  ASSERT_EQ(losses.size(), 60u);
  EXPECT_LT(losses.back(), 0.5 * losses.front());
  EXPECT_GT(accuracy(predict(m, g), g.labels(), split.test), 0.8);
}

TEST(Training, Float32PathRuns) {
  const Graph g = sbm_generate({{20, 20}, 0.3, 0.02, 4, 1, 1.0});
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.precision = Precision::kFloat32;
  const auto r = train_node_classifier(g, random_node_split(g.num_nodes(), 0.6, 1), cfg, 8);
  EXPECT_EQ(r.losses.size(), 30u);
  EXPECT_LT(r.losses.back(), r.losses.front());
}
