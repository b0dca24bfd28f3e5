#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "orbitsplit/graph.hpp"

namespace orbitsplit {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Mode { kTrain, kEval };
enum class Precision { kFloat32, kFloat64 };

/// One GraphSAGE-mean layer: Z = X (M_s . W_s) + mean_N(X) (M_n . W_n) + b.
/// Masked entries are 0 in the effective weights whatever the stored value.
template <typename T>
struct SageLayer {
  Mat<T> w_self;
  Mat<T> w_neigh;
  RowVec<T> bias;
  Mat<T> mask_self;
  Mat<T> mask_neigh;

  Eigen::Index in_dim() const { return w_self.rows(); }
  Eigen::Index out_dim() const { return w_self.cols(); }
  Mat<T> effective_self() const { return w_self.cwiseProduct(mask_self); }
  Mat<T> effective_neigh() const { return w_neigh.cwiseProduct(mask_neigh); }
  std::size_t active_weights() const;
};

template <typename T>
struct BatchNorm {
  RowVec<T> gamma;
  RowVec<T> beta;
  RowVec<T> running_mean;
  RowVec<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);
};

/// First SAGE layer plus its batch norm: the part of the network that ends at
/// the cut between the client tiers and the server tier.
template <typename T>
struct Encoder {
  SageLayer<T> layer;
  BatchNorm<T> bn;
};

template <typename T>
struct GnnModelT {
  Encoder<T> encoder;  // feature_dim -> hidden_dim, batch norm, ReLU, dropout
  SageLayer<T> head;   // hidden_dim -> num_classes, raw logits
  double dropout_rate = 0.3;

  Eigen::Index feature_dim() const { return encoder.layer.in_dim(); }
  Eigen::Index hidden_dim() const { return encoder.layer.out_dim(); }
  Eigen::Index num_classes() const { return head.out_dim(); }
};

using GnnModel = GnnModelT<double>;
using GnnModel32 = GnnModelT<float>;

// Glorot-uniform weights, zero biases, unit batch-norm scale, all-ones masks.
template <typename T>
SageLayer<T> init_sage_layer(Eigen::Index in_dim, Eigen::Index out_dim, std::uint64_t seed);
template <typename T>
Encoder<T> init_encoder(Eigen::Index in_dim, Eigen::Index hidden_dim, std::uint64_t seed);
template <typename T>
GnnModelT<T> init_model(Eigen::Index feature_dim, Eigen::Index hidden_dim, Eigen::Index num_classes,
                        double dropout_rate, std::uint64_t seed);

/// Dropout draw description. keep(v, j) is a pure function of
/// (seed, global id of v, j), so the same node gets the same mask however the
/// graph is partitioned. Empty global_ids means local index = global id.
struct DropoutSpec {
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::span<const NodeId> global_ids = {};
};

bool dropout_keep(const DropoutSpec& spec, NodeId global_id, Eigen::Index channel);

template <typename T>
Mat<T> mean_aggregate(const NeighborIndex& adj, const Mat<T>& h);
// Adjoint of mean_aggregate.
template <typename T>
Mat<T> mean_aggregate_adjoint(const NeighborIndex& adj, const Mat<T>& grad);

template <typename T>
struct SageCache {
  Mat<T> input;
  Mat<T> aggregated;
};

template <typename T>
struct SageGrads {
  Mat<T> d_self;
  Mat<T> d_neigh;
  RowVec<T> d_bias;
};

template <typename T>
struct BatchNormGrads {
  RowVec<T> d_gamma;
  RowVec<T> d_beta;
};

template <typename T>
struct EncoderGrads {
  SageGrads<T> layer;
  BatchNormGrads<T> bn;
};

template <typename T>
struct ModelGrads {
  EncoderGrads<T> encoder;
  SageGrads<T> head;
};

template <typename T>
struct EncoderCache {
  Mode mode = Mode::kEval;
  SageCache<T> sage;
  Mat<T> normalized;     // x-hat
  RowVec<T> inv_std;
  RowVec<T> batch_mean;  // train mode only
  RowVec<T> batch_var;   // population variance, train mode only
  Mat<T> bn_out;         // pre-ReLU
  Mat<T> dropout_scale;  // 0 or 1/(1-p); empty when no dropout applied
};

template <typename T>
Mat<T> sage_forward(const SageLayer<T>& layer, const NeighborIndex& adj, const Mat<T>& input,
                    SageCache<T>* cache = nullptr);
// Gradients of the layer parameters (masked entries 0). If d_input is
// non-null it receives dLoss/dInput.
template <typename T>
SageGrads<T> sage_backward(const SageLayer<T>& layer, const NeighborIndex& adj,
                           const SageCache<T>& cache, const Mat<T>& d_out, Mat<T>* d_input = nullptr);

// Layer 1, batch norm, ReLU, and dropout in train mode. Batch statistics come
// from every row of `input`.
template <typename T>
Mat<T> encoder_forward(const Encoder<T>& enc, const NeighborIndex& adj, const Mat<T>& input,
                       Mode mode, const DropoutSpec& dropout, EncoderCache<T>* cache = nullptr);
template <typename T>
EncoderGrads<T> encoder_backward(const Encoder<T>& enc, const NeighborIndex& adj,
                                 const EncoderCache<T>& cache, const Mat<T>& d_hidden);
// Running-stat update from a train-mode cache (momentum, unbiased variance).
template <typename T>
void update_running_stats(BatchNorm<T>& bn, const EncoderCache<T>& cache);

struct LossResult {
  double loss = 0.0;
  std::size_t count = 0;
};

// Mean cross-entropy over rows with node_mask[i] != 0. Writes dLoss/dLogits
// (zero rows outside the mask) when d_logits is non-null.
template <typename T>
LossResult cross_entropy(const Mat<T>& logits, std::span<const int> labels,
                         std::span<const std::uint8_t> node_mask, Mat<T>* d_logits = nullptr);

template <typename T>
struct ForwardResult {
  Mat<T> logits;
  Mat<T> hidden;
  EncoderCache<T> encoder_cache;
  SageCache<T> head_cache;
};

template <typename T>
Mat<T> features_as(const Graph& g);

template <typename T>
ForwardResult<T> forward(const GnnModelT<T>& model, const Graph& g, Mode mode,
                         std::uint64_t dropout_seed = 0);
template <typename T>
ForwardResult<T> forward(const GnnModelT<T>& model, const NeighborIndex& adj, const Mat<T>& x,
                         Mode mode, std::uint64_t dropout_seed = 0);

template <typename T>
struct LossAndGrads {
  double loss = 0.0;
  ModelGrads<T> grads;
  ForwardResult<T> forward;
};

template <typename T>
LossAndGrads<T> loss_and_grads(const GnnModelT<T>& model, const Graph& g, std::span<const int> labels,
                               std::span<const std::uint8_t> node_mask, Mode mode,
                               std::uint64_t dropout_seed = 0);
template <typename T>
LossAndGrads<T> loss_and_grads(const GnnModelT<T>& model, const NeighborIndex& adj, const Mat<T>& x,
                               std::span<const int> labels, std::span<const std::uint8_t> node_mask,
                               Mode mode, std::uint64_t dropout_seed = 0);

/// One trainable tensor seen by the optimizer. mask == nullptr means every
/// entry trains.
template <typename T>
struct ParamSlot {
  T* value;
  const T* grad;
  const T* mask;
  std::size_t size;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

// Bias-corrected Adam over the given slots. Masked entries are not touched
// and accumulate no moments. Moments are zero-initialized on first use.
template <typename T>
void adam_update(AdamState<T>& state, std::span<const ParamSlot<T>> slots, double learning_rate);

template <typename T>
std::vector<ParamSlot<T>> param_slots(SageLayer<T>& layer, const SageGrads<T>& grads);
template <typename T>
std::vector<ParamSlot<T>> param_slots(Encoder<T>& enc, const EncoderGrads<T>& grads);

// Encoder slots followed by head slots.
template <typename T>
void adam_step(AdamState<T>& state, GnnModelT<T>& model, const ModelGrads<T>& grads,
               double learning_rate);

/// Per layer: aggregation sum_v |N(v)| * in + |V| * in, transform
/// |V| * (2 nnz(mask_self) + 2 nnz(mask_neigh)) + |V| * out.
template <typename T>
std::uint64_t count_flops(const GnnModelT<T>& model, const Graph& g);
template <typename T>
std::uint64_t count_flops(const GnnModelT<T>& model, std::size_t num_nodes, std::size_t total_degree);

struct MagnitudePruneResult {
  std::uint64_t flops_before = 0;
  std::uint64_t flops_after = 0;
  std::uint64_t flops_budget = 0;
  std::size_t weights_masked = 0;
};

/// Masks the smallest-|w| unmasked weights (ties: layer, self before neigh,
/// row, column) until count_flops <= target_ratio * reference. The reference
/// defaults to count_flops(model, g). Biases and batch norm are never
/// masked. Throws ModelError when even a fully masked model exceeds the
/// budget.
template <typename T>
MagnitudePruneResult magnitude_prune_weights(GnnModelT<T>& model, double target_ratio, const Graph& g,
                                             std::uint64_t reference_flops = 0);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 200;
  double dropout_rate = 0.3;
  std::uint64_t seed = 0;
  Precision precision = Precision::kFloat64;
};

// Per-epoch dropout seed shared by monolithic and split training.
std::uint64_t epoch_dropout_seed(std::uint64_t train_seed, std::uint64_t epoch);

// One full-batch train-mode step: forward, loss, backward, Adam, running
// stats. Returns the loss.
template <typename T>
double train_step(GnnModelT<T>& model, AdamState<T>& adam, const NeighborIndex& adj, const Mat<T>& x,
                  std::span<const int> labels, std::span<const std::uint8_t> train_mask,
                  double learning_rate, std::uint64_t dropout_seed);

// `epochs` train steps starting at epoch index `first_epoch`. Returns losses.
template <typename T>
std::vector<double> train_epochs(GnnModelT<T>& model, AdamState<T>& adam, const Graph& g,
                                 std::span<const std::uint8_t> train_mask, const TrainConfig& cfg,
                                 std::size_t epochs, std::size_t first_epoch = 0);

template <typename T>
std::vector<int> predict(const GnnModelT<T>& model, const Graph& g);

double accuracy(std::span<const int> predictions, std::span<const int> labels,
                std::span<const std::uint8_t> mask);

struct NodeSplit {
  std::vector<std::uint8_t> train;
  std::vector<std::uint8_t> test;
};

// Seeded random split; each node lands in exactly one of train / test.
NodeSplit random_node_split(std::size_t num_nodes, double train_fraction, std::uint64_t seed);

struct ClassifierRun {
  std::vector<double> losses;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::uint64_t flops = 0;
};

// Initializes a model at cfg.precision and trains it on g. Convenience for
// callers that pick the precision at run time.
ClassifierRun train_node_classifier(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                                    Eigen::Index hidden_dim);

// JSON checkpoint: {"precision", "dropout_rate", "encoder": {...}, "head": {...}}
// with shapes and row-major value arrays. Round-trips bit-exactly.
template <typename T>
void save_checkpoint(const GnnModelT<T>& model, const std::filesystem::path& path);
template <typename T>
GnnModelT<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace orbitsplit
