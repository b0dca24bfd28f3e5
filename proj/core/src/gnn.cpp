#include "orbitsplit/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "orbitsplit/rng.hpp"

namespace orbitsplit {

namespace {

constexpr std::uint64_t kInitTag = 0x1417;
constexpr std::uint64_t kDropoutTag = 0xD80F;

template <typename T>
void check_rows(const Mat<T>& m, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(m.rows()) != n) {
    throw ModelError(std::string(what) + ": row count " + std::to_string(m.rows()) +
                     " does not match node count " + std::to_string(n));
  }
}

}  // namespace

template <typename T>
std::size_t SageLayer<T>::active_weights() const {
  return static_cast<std::size_t>((mask_self.array() != T(0)).count() +
                                  (mask_neigh.array() != T(0)).count());
}

template <typename T>
SageLayer<T> init_sage_layer(Eigen::Index in_dim, Eigen::Index out_dim, std::uint64_t seed) {
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  SageLayer<T> l;
  l.w_self.resize(in_dim, out_dim);
  l.w_neigh.resize(in_dim, out_dim);
  for (Eigen::Index i = 0; i < l.w_self.size(); ++i) {
    l.w_self.data()[i] = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
  }
  for (Eigen::Index i = 0; i < l.w_neigh.size(); ++i) {
    l.w_neigh.data()[i] = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
  }
  l.bias = RowVec<T>::Zero(out_dim);
  l.mask_self = Mat<T>::Ones(in_dim, out_dim);
  l.mask_neigh = Mat<T>::Ones(in_dim, out_dim);
  return l;
}

template <typename T>
Encoder<T> init_encoder(Eigen::Index in_dim, Eigen::Index hidden_dim, std::uint64_t seed) {
  Encoder<T> e;
  e.layer = init_sage_layer<T>(in_dim, hidden_dim, derive_seed(seed, kInitTag, 1));
  e.bn.gamma = RowVec<T>::Ones(hidden_dim);
  e.bn.beta = RowVec<T>::Zero(hidden_dim);
  e.bn.running_mean = RowVec<T>::Zero(hidden_dim);
  e.bn.running_var = RowVec<T>::Ones(hidden_dim);
  return e;
}

template <typename T>
GnnModelT<T> init_model(Eigen::Index feature_dim, Eigen::Index hidden_dim, Eigen::Index num_classes,
                        double dropout_rate, std::uint64_t seed) {
  if (feature_dim <= 0 || hidden_dim <= 0 || num_classes <= 0) {
    throw ModelError("model dimensions must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ModelError("dropout rate must be in [0, 1)");
  GnnModelT<T> m;
  m.encoder = init_encoder<T>(feature_dim, hidden_dim, seed);
  m.head = init_sage_layer<T>(hidden_dim, num_classes, derive_seed(seed, kInitTag, 2));
  m.dropout_rate = dropout_rate;
  return m;
}

bool dropout_keep(const DropoutSpec& spec, NodeId global_id, Eigen::Index channel) {
  const std::uint64_t h = derive_seed(spec.seed, global_id, static_cast<std::uint64_t>(channel));
  return unit_interval(h) >= spec.rate;
}

template <typename T>
Mat<T> mean_aggregate(const NeighborIndex& adj, const Mat<T>& h) {
  check_rows(h, adj.num_nodes(), "mean_aggregate");
  Mat<T> out = Mat<T>::Zero(h.rows(), h.cols());
  for (NodeId v = 0; v < adj.num_nodes(); ++v) {
    const auto nbrs = adj.neighbors(v);
    if (nbrs.empty()) continue;
    for (NodeId u : nbrs) out.row(v) += h.row(u);
    out.row(v) /= static_cast<T>(nbrs.size());
  }
  return out;
}

template <typename T>
Mat<T> mean_aggregate_adjoint(const NeighborIndex& adj, const Mat<T>& grad) {
  check_rows(grad, adj.num_nodes(), "mean_aggregate_adjoint");
  Mat<T> out = Mat<T>::Zero(grad.rows(), grad.cols());
  for (NodeId v = 0; v < adj.num_nodes(); ++v) {
    const auto nbrs = adj.neighbors(v);
    if (nbrs.empty()) continue;
    const RowVec<T> share = grad.row(v) / static_cast<T>(nbrs.size());
    for (NodeId u : nbrs) out.row(u) += share;
  }
  return out;
}

template <typename T>
Mat<T> sage_forward(const SageLayer<T>& layer, const NeighborIndex& adj, const Mat<T>& input,
                    SageCache<T>* cache) {
  if (input.cols() != layer.in_dim()) {
    throw ModelError("sage_forward: input width " + std::to_string(input.cols()) +
                     " does not match layer in_dim " + std::to_string(layer.in_dim()));
  }
  Mat<T> agg = mean_aggregate(adj, input);
  Mat<T> z = input * layer.effective_self() + agg * layer.effective_neigh();
  z.rowwise() += layer.bias;
  if (cache) {
    cache->input = input;
    cache->aggregated = std::move(agg);
  }
  return z;
}

template <typename T>
SageGrads<T> sage_backward(const SageLayer<T>& layer, const NeighborIndex& adj,
                           const SageCache<T>& cache, const Mat<T>& d_out, Mat<T>* d_input) {
  SageGrads<T> g;
  g.d_self = (cache.input.transpose() * d_out).cwiseProduct(layer.mask_self);
  g.d_neigh = (cache.aggregated.transpose() * d_out).cwiseProduct(layer.mask_neigh);
  g.d_bias = d_out.colwise().sum();
  if (d_input) {
    *d_input = d_out * layer.effective_self().transpose() +
               mean_aggregate_adjoint<T>(adj, d_out * layer.effective_neigh().transpose());
  }
  return g;
}

template <typename T>
Mat<T> encoder_forward(const Encoder<T>& enc, const NeighborIndex& adj, const Mat<T>& input,
                       Mode mode, const DropoutSpec& dropout, EncoderCache<T>* cache) {
  EncoderCache<T> local;
  EncoderCache<T>& c = cache ? *cache : local;
  c.mode = mode;
  const Mat<T> z = sage_forward(enc.layer, adj, input, &c.sage);
  const auto n = z.rows();

  RowVec<T> mean, var;
  if (mode == Mode::kTrain) {
    mean = n > 0 ? RowVec<T>(z.colwise().mean()) : RowVec<T>::Zero(z.cols());
    const Mat<T> centered = z.rowwise() - mean;
    var = n > 0 ? RowVec<T>(centered.array().square().colwise().mean()) : RowVec<T>::Zero(z.cols());
    c.batch_mean = mean;
    c.batch_var = var;
  } else {
    mean = enc.bn.running_mean;
    var = enc.bn.running_var;
  }
  c.inv_std = (var.array() + enc.bn.eps).sqrt().inverse().matrix();
  c.normalized = ((z.rowwise() - mean).array().rowwise() * c.inv_std.array()).matrix();
  c.bn_out = ((c.normalized.array().rowwise() * enc.bn.gamma.array()).rowwise() + enc.bn.beta.array())
                 .matrix();

  Mat<T> h = c.bn_out.cwiseMax(T(0));
  c.dropout_scale.resize(0, 0);
  if (mode == Mode::kTrain && dropout.rate > 0.0) {
    if (!dropout.global_ids.empty() && dropout.global_ids.size() != static_cast<std::size_t>(n)) {
      throw ModelError("dropout global id list does not match node count");
    }
    const T scale = static_cast<T>(1.0 / (1.0 - dropout.rate));
    c.dropout_scale.resize(n, h.cols());
    for (Eigen::Index v = 0; v < n; ++v) {
      const NodeId gid = dropout.global_ids.empty() ? static_cast<NodeId>(v) : dropout.global_ids[v];
      for (Eigen::Index j = 0; j < h.cols(); ++j) {
        c.dropout_scale(v, j) = dropout_keep(dropout, gid, j) ? scale : T(0);
      }
    }
    h = h.cwiseProduct(c.dropout_scale);
  }
  return h;
}

template <typename T>
EncoderGrads<T> encoder_backward(const Encoder<T>& enc, const NeighborIndex& adj,
                                 const EncoderCache<T>& c, const Mat<T>& d_hidden) {
  Mat<T> d = d_hidden;
  if (c.dropout_scale.size() > 0) d = d.cwiseProduct(c.dropout_scale);
  d = (c.bn_out.array() > T(0)).select(d, T(0));  // ReLU

  EncoderGrads<T> g;
  g.bn.d_gamma = d.cwiseProduct(c.normalized).colwise().sum();
  g.bn.d_beta = d.colwise().sum();
  const Mat<T> d_xhat = (d.array().rowwise() * enc.bn.gamma.array()).matrix();

  Mat<T> d_z;
  if (c.mode == Mode::kTrain) {
    const auto n = static_cast<T>(d.rows());
    const RowVec<T> sum_dxhat = d_xhat.colwise().sum();
    const RowVec<T> sum_dxhat_xhat = d_xhat.cwiseProduct(c.normalized).colwise().sum();
    const Mat<T> inner = (n * d_xhat.array()).matrix().rowwise() - sum_dxhat;
    const Mat<T> corr = (c.normalized.array().rowwise() * sum_dxhat_xhat.array()).matrix();
    d_z = (((inner - corr).array().rowwise() * c.inv_std.array()) / n).matrix();
  } else {
    d_z = (d_xhat.array().rowwise() * c.inv_std.array()).matrix();
  }
  g.layer = sage_backward(enc.layer, adj, c.sage, d_z, static_cast<Mat<T>*>(nullptr));
  return g;
}

template <typename T>
void update_running_stats(BatchNorm<T>& bn, const EncoderCache<T>& cache) {
  if (cache.mode != Mode::kTrain) return;
  const auto n = cache.normalized.rows();
  const T unbias = n > 1 ? static_cast<T>(n) / static_cast<T>(n - 1) : T(1);
  bn.running_mean = (T(1) - bn.momentum) * bn.running_mean + bn.momentum * cache.batch_mean;
  bn.running_var = (T(1) - bn.momentum) * bn.running_var + bn.momentum * unbias * cache.batch_var;
}

template <typename T>
LossResult cross_entropy(const Mat<T>& logits, std::span<const int> labels,
                         std::span<const std::uint8_t> node_mask, Mat<T>* d_logits) {
  const auto n = static_cast<std::size_t>(logits.rows());
  if (node_mask.size() != n) throw ModelError("node mask length does not match node count");
  if (labels.size() != n) throw ModelError("label count does not match node count");
  const std::size_t count =
      static_cast<std::size_t>(std::count_if(node_mask.begin(), node_mask.end(), [](auto b) { return b != 0; }));
  if (count == 0) throw ModelError("cross_entropy: empty node mask");

  if (d_logits) *d_logits = Mat<T>::Zero(logits.rows(), logits.cols());
  double total = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    if (!node_mask[v]) continue;
    const int y = labels[v];
    if (y < 0 || y >= logits.cols()) throw ModelError("label out of range for the classifier");
    const auto row = logits.row(static_cast<Eigen::Index>(v));
    const T mx = row.maxCoeff();
    const RowVec<T> e = (row.array() - mx).exp().matrix();
    const T sum = e.sum();
    total += static_cast<double>(mx + std::log(sum) - row(y));
    if (d_logits) {
      auto drow = d_logits->row(static_cast<Eigen::Index>(v));
      drow = e / sum;
      drow(y) -= T(1);
      drow /= static_cast<T>(count);
    }
  }
  return {total / static_cast<double>(count), count};
}

template <typename T>
Mat<T> features_as(const Graph& g) {
  return g.features().cast<T>();
}

template <typename T>
ForwardResult<T> forward(const GnnModelT<T>& model, const NeighborIndex& adj, const Mat<T>& x,
                         Mode mode, std::uint64_t dropout_seed) {
  if (x.cols() != model.feature_dim()) {
    throw ModelError("feature dim " + std::to_string(x.cols()) + " does not match model input " +
                     std::to_string(model.feature_dim()));
  }
  ForwardResult<T> r;
  const DropoutSpec drop{model.dropout_rate, dropout_seed, {}};
  r.hidden = encoder_forward(model.encoder, adj, x, mode, drop, &r.encoder_cache);
  r.logits = sage_forward(model.head, adj, r.hidden, &r.head_cache);
  return r;
}

template <typename T>
ForwardResult<T> forward(const GnnModelT<T>& model, const Graph& g, Mode mode,
                         std::uint64_t dropout_seed) {
  return forward(model, NeighborIndex(g), features_as<T>(g), mode, dropout_seed);
}

template <typename T>
LossAndGrads<T> loss_and_grads(const GnnModelT<T>& model, const NeighborIndex& adj, const Mat<T>& x,
                               std::span<const int> labels, std::span<const std::uint8_t> node_mask,
                               Mode mode, std::uint64_t dropout_seed) {
  LossAndGrads<T> out;
  out.forward = forward(model, adj, x, mode, dropout_seed);
  Mat<T> d_logits;
  out.loss = cross_entropy(out.forward.logits, labels, node_mask, &d_logits).loss;
  Mat<T> d_hidden;
  out.grads.head = sage_backward(model.head, adj, out.forward.head_cache, d_logits, &d_hidden);
  out.grads.encoder = encoder_backward(model.encoder, adj, out.forward.encoder_cache, d_hidden);
  return out;
}

template <typename T>
LossAndGrads<T> loss_and_grads(const GnnModelT<T>& model, const Graph& g, std::span<const int> labels,
                               std::span<const std::uint8_t> node_mask, Mode mode,
                               std::uint64_t dropout_seed) {
  return loss_and_grads(model, NeighborIndex(g), features_as<T>(g), labels, node_mask, mode, dropout_seed);
}

template <typename T>
void adam_update(AdamState<T>& state, std::span<const ParamSlot<T>> slots, double learning_rate) {
  if (state.first_moment.empty()) {
    for (const auto& s : slots) {
      state.first_moment.emplace_back(s.size, T(0));
      state.second_moment.emplace_back(s.size, T(0));
    }
  }
  if (state.first_moment.size() != slots.size()) throw ModelError("adam: parameter slot count changed");
  ++state.step_count;
  const auto t = static_cast<double>(state.step_count);
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T bc1 = static_cast<T>(1.0 - std::pow(state.beta1, t));
  const T bc2 = static_cast<T>(1.0 - std::pow(state.beta2, t));
  const T lr = static_cast<T>(learning_rate), eps = static_cast<T>(state.eps_hat);

  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto& s = slots[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != s.size) throw ModelError("adam: parameter shape changed");
    for (std::size_t i = 0; i < s.size; ++i) {
      if (s.mask && s.mask[i] == T(0)) continue;
      const T g = s.grad[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      const T m_hat = m[i] / bc1;
      const T v_hat = v[i] / bc2;
      s.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
std::vector<ParamSlot<T>> param_slots(SageLayer<T>& layer, const SageGrads<T>& g) {
  if (g.d_self.size() != layer.w_self.size() || g.d_neigh.size() != layer.w_neigh.size() ||
      g.d_bias.size() != layer.bias.size()) {
    throw ModelError("gradient shapes do not match the layer");
  }
  return {
      {layer.w_self.data(), g.d_self.data(), layer.mask_self.data(), static_cast<std::size_t>(layer.w_self.size())},
      {layer.w_neigh.data(), g.d_neigh.data(), layer.mask_neigh.data(), static_cast<std::size_t>(layer.w_neigh.size())},
      {layer.bias.data(), g.d_bias.data(), nullptr, static_cast<std::size_t>(layer.bias.size())},
  };
}

template <typename T>
std::vector<ParamSlot<T>> param_slots(Encoder<T>& enc, const EncoderGrads<T>& g) {
  auto slots = param_slots(enc.layer, g.layer);
  slots.push_back({enc.bn.gamma.data(), g.bn.d_gamma.data(), nullptr, static_cast<std::size_t>(enc.bn.gamma.size())});
  slots.push_back({enc.bn.beta.data(), g.bn.d_beta.data(), nullptr, static_cast<std::size_t>(enc.bn.beta.size())});
  return slots;
}

template <typename T>
void adam_step(AdamState<T>& state, GnnModelT<T>& model, const ModelGrads<T>& grads,
               double learning_rate) {
  auto slots = param_slots(model.encoder, grads.encoder);
  auto head = param_slots(model.head, grads.head);
  slots.insert(slots.end(), head.begin(), head.end());
  adam_update<T>(state, slots, learning_rate);
}

template <typename T>
std::uint64_t count_flops(const GnnModelT<T>& model, std::size_t n, std::size_t total_degree) {
  auto layer_flops = [&](const SageLayer<T>& l) {
    const auto in = static_cast<std::uint64_t>(l.in_dim());
    const auto out = static_cast<std::uint64_t>(l.out_dim());
    const std::uint64_t aggregation = total_degree * in + n * in;
    const std::uint64_t transform = n * 2 * static_cast<std::uint64_t>(l.active_weights()) + n * out;
    return aggregation + transform;
  };
  return layer_flops(model.encoder.layer) + layer_flops(model.head);
}

template <typename T>
std::uint64_t count_flops(const GnnModelT<T>& model, const Graph& g) {
  return count_flops(model, g.num_nodes(), NeighborIndex(g).total_degree());
}

template <typename T>
MagnitudePruneResult magnitude_prune_weights(GnnModelT<T>& model, double target_ratio, const Graph& g,
                                             std::uint64_t reference_flops) {
  if (!(target_ratio > 0.0 && target_ratio <= 1.0)) throw ModelError("FLOPs target ratio must be in (0, 1]");
  const std::size_t n = g.num_nodes();
  const std::size_t total_degree = NeighborIndex(g).total_degree();

  MagnitudePruneResult r;
  r.flops_before = count_flops(model, n, total_degree);
  const std::uint64_t reference = reference_flops ? reference_flops : r.flops_before;
  r.flops_budget = static_cast<std::uint64_t>(std::floor(target_ratio * static_cast<double>(reference)));
  r.flops_after = r.flops_before;
  if (r.flops_before <= r.flops_budget) return r;

  struct Candidate {
    T magnitude;
    int layer;
    int matrix;  // 0 = self, 1 = neigh
    Eigen::Index row, col;
  };
  std::vector<Candidate> cands;
  Mat<T>* masks[2][2] = {{&model.encoder.layer.mask_self, &model.encoder.layer.mask_neigh},
                         {&model.head.mask_self, &model.head.mask_neigh}};
  const Mat<T>* weights[2][2] = {{&model.encoder.layer.w_self, &model.encoder.layer.w_neigh},
                                 {&model.head.w_self, &model.head.w_neigh}};
  for (int l = 0; l < 2; ++l) {
    for (int m = 0; m < 2; ++m) {
      const Mat<T>& w = *weights[l][m];
      const Mat<T>& mask = *masks[l][m];
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
          if (mask(i, j) != T(0)) cands.push_back({std::abs(w(i, j)), l, m, i, j});
    }
  }

  // Every masked weight removes exactly 2|V| transform FLOPs.
  const std::uint64_t per_weight = 2 * static_cast<std::uint64_t>(n);
  const std::uint64_t floor_flops = r.flops_before - per_weight * cands.size();
  if (floor_flops > r.flops_budget) {
    throw ModelError("FLOPs target unreachable: a fully masked model still needs " +
                     std::to_string(floor_flops) + " > budget " + std::to_string(r.flops_budget));
  }
  const std::uint64_t excess = r.flops_before - r.flops_budget;
  const std::size_t k = per_weight == 0 ? 0 : static_cast<std::size_t>((excess + per_weight - 1) / per_weight);

  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.magnitude, a.layer, a.matrix, a.row, a.col) <
           std::tie(b.magnitude, b.layer, b.matrix, b.row, b.col);
  });
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = cands[i];
    (*masks[c.layer][c.matrix])(c.row, c.col) = T(0);
  }
  r.weights_masked = k;
  r.flops_after = count_flops(model, n, total_degree);
  return r;
}

std::uint64_t epoch_dropout_seed(std::uint64_t train_seed, std::uint64_t epoch) {
  return derive_seed(train_seed, kDropoutTag, epoch);
}

template <typename T>
double train_step(GnnModelT<T>& model, AdamState<T>& adam, const NeighborIndex& adj, const Mat<T>& x,
                  std::span<const int> labels, std::span<const std::uint8_t> train_mask,
                  double learning_rate, std::uint64_t dropout_seed) {
  auto lg = loss_and_grads(model, adj, x, labels, train_mask, Mode::kTrain, dropout_seed);
  adam_step(adam, model, lg.grads, learning_rate);
  update_running_stats(model.encoder.bn, lg.forward.encoder_cache);
  return lg.loss;
}

template <typename T>
std::vector<double> train_epochs(GnnModelT<T>& model, AdamState<T>& adam, const Graph& g,
                                 std::span<const std::uint8_t> train_mask, const TrainConfig& cfg,
                                 std::size_t epochs, std::size_t first_epoch) {
  if (!(cfg.learning_rate > 0.0)) throw ModelError("learning rate must be positive");
  if (!g.has_labels()) throw ModelError("training needs node labels");
  const NeighborIndex adj(g);
  const Mat<T> x = features_as<T>(g);
  std::vector<double> losses;
  losses.reserve(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    losses.push_back(train_step(model, adam, adj, x, g.labels(), train_mask, cfg.learning_rate,
                                epoch_dropout_seed(cfg.seed, first_epoch + e)));
  }
  return losses;
}

template <typename T>
std::vector<int> predict(const GnnModelT<T>& model, const Graph& g) {
  const auto r = forward(model, g, Mode::kEval);
  std::vector<int> pred(static_cast<std::size_t>(r.logits.rows()));
  for (Eigen::Index v = 0; v < r.logits.rows(); ++v) {
    Eigen::Index arg = 0;
    r.logits.row(v).maxCoeff(&arg);
    pred[static_cast<std::size_t>(v)] = static_cast<int>(arg);
  }
  return pred;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels,
                std::span<const std::uint8_t> mask) {
  if (predictions.size() != labels.size() || mask.size() != labels.size()) {
    throw ModelError("accuracy: length mismatch");
  }
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    hit += predictions[i] == labels[i];
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

NodeSplit random_node_split(std::size_t num_nodes, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ModelError("train fraction must be in (0, 1)");
  std::vector<NodeId> order(num_nodes);
  std::iota(order.begin(), order.end(), NodeId{0});
  Rng rng(seed);
  for (std::size_t i = num_nodes; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_train = static_cast<std::size_t>(std::round(train_fraction * static_cast<double>(num_nodes)));
  NodeSplit s{std::vector<std::uint8_t>(num_nodes, 0), std::vector<std::uint8_t>(num_nodes, 0)};
  for (std::size_t i = 0; i < num_nodes; ++i) (i < n_train ? s.train : s.test)[order[i]] = 1;
  return s;
}

namespace {

template <typename T>
ClassifierRun run_classifier(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                             Eigen::Index hidden_dim) {
  auto model = init_model<T>(static_cast<Eigen::Index>(g.feature_dim()), hidden_dim, g.num_classes(),
                             cfg.dropout_rate, cfg.seed);
  AdamState<T> adam;
  ClassifierRun run;
  run.losses = train_epochs(model, adam, g, split.train, cfg, cfg.epochs);
  const auto pred = predict(model, g);
  run.train_accuracy = accuracy(pred, g.labels(), split.train);
  run.test_accuracy = accuracy(pred, g.labels(), split.test);
  run.flops = count_flops(model, g);
  return run;
}

}  // namespace

ClassifierRun train_node_classifier(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                                    Eigen::Index hidden_dim) {
  return cfg.precision == Precision::kFloat32 ? run_classifier<float>(g, split, cfg, hidden_dim)
                                              : run_classifier<double>(g, split, cfg, hidden_dim);
}

#define ORBITSPLIT_INSTANTIATE_GNN(T)                                                                  \
  template struct SageLayer<T>;                                                                        \
  template SageLayer<T> init_sage_layer<T>(Eigen::Index, Eigen::Index, std::uint64_t);                 \
  template Encoder<T> init_encoder<T>(Eigen::Index, Eigen::Index, std::uint64_t);                      \
  template GnnModelT<T> init_model<T>(Eigen::Index, Eigen::Index, Eigen::Index, double, std::uint64_t); \
  template Mat<T> mean_aggregate<T>(const NeighborIndex&, const Mat<T>&);                              \
  template Mat<T> mean_aggregate_adjoint<T>(const NeighborIndex&, const Mat<T>&);                      \
  template Mat<T> sage_forward<T>(const SageLayer<T>&, const NeighborIndex&, const Mat<T>&,            \
                                  SageCache<T>*);                                                      \
  template SageGrads<T> sage_backward<T>(const SageLayer<T>&, const NeighborIndex&,                    \
                                         const SageCache<T>&, const Mat<T>&, Mat<T>*);                 \
  template Mat<T> encoder_forward<T>(const Encoder<T>&, const NeighborIndex&, const Mat<T>&, Mode,     \
                                     const DropoutSpec&, EncoderCache<T>*);                            \
  template EncoderGrads<T> encoder_backward<T>(const Encoder<T>&, const NeighborIndex&,                \
                                               const EncoderCache<T>&, const Mat<T>&);                 \
  template void update_running_stats<T>(BatchNorm<T>&, const EncoderCache<T>&);                        \
  template LossResult cross_entropy<T>(const Mat<T>&, std::span<const int>,                            \
                                       std::span<const std::uint8_t>, Mat<T>*);                        \
  template Mat<T> features_as<T>(const Graph&);                                                        \
  template ForwardResult<T> forward<T>(const GnnModelT<T>&, const Graph&, Mode, std::uint64_t);        \
  template ForwardResult<T> forward<T>(const GnnModelT<T>&, const NeighborIndex&, const Mat<T>&, Mode, \
                                       std::uint64_t);                                                 \
  template LossAndGrads<T> loss_and_grads<T>(const GnnModelT<T>&, const Graph&, std::span<const int>,  \
                                             std::span<const std::uint8_t>, Mode, std::uint64_t);      \
  template LossAndGrads<T> loss_and_grads<T>(const GnnModelT<T>&, const NeighborIndex&, const Mat<T>&, \
                                             std::span<const int>, std::span<const std::uint8_t>,      \
                                             Mode, std::uint64_t);                                     \
  template void adam_update<T>(AdamState<T>&, std::span<const ParamSlot<T>>, double);                  \
  template std::vector<ParamSlot<T>> param_slots<T>(SageLayer<T>&, const SageGrads<T>&);               \
  template std::vector<ParamSlot<T>> param_slots<T>(Encoder<T>&, const EncoderGrads<T>&);              \
  template void adam_step<T>(AdamState<T>&, GnnModelT<T>&, const ModelGrads<T>&, double);              \
  template std::uint64_t count_flops<T>(const GnnModelT<T>&, const Graph&);                            \
  template std::uint64_t count_flops<T>(const GnnModelT<T>&, std::size_t, std::size_t);                \
  template MagnitudePruneResult magnitude_prune_weights<T>(GnnModelT<T>&, double, const Graph&,        \
                                                           std::uint64_t);                             \
  template double train_step<T>(GnnModelT<T>&, AdamState<T>&, const NeighborIndex&, const Mat<T>&,     \
                                std::span<const int>, std::span<const std::uint8_t>, double,           \
                                std::uint64_t);                                                        \
  template std::vector<double> train_epochs<T>(GnnModelT<T>&, AdamState<T>&, const Graph&,             \
                                               std::span<const std::uint8_t>, const TrainConfig&,      \
                                               std::size_t, std::size_t);                              \
  template std::vector<int> predict<T>(const GnnModelT<T>&, const Graph&);

ORBITSPLIT_INSTANTIATE_GNN(float)
ORBITSPLIT_INSTANTIATE_GNN(double)

#undef ORBITSPLIT_INSTANTIATE_GNN

}  // namespace orbitsplit
