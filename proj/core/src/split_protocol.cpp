#include "orbitsplit/split_protocol.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "orbitsplit/csv.hpp"
#include "orbitsplit/rng.hpp"

namespace orbitsplit {

namespace {

constexpr std::uint64_t kPartitionTag = 0x5A27;
constexpr std::uint64_t kSatelliteDpTag = 0xD9A1;

template <typename P>
const P& payload_as(const Message& msg, MessageKind kind) {
  if (msg.kind != kind) {
    throw ProtocolError(std::string("expected ") + to_string(kind) + " from " + msg.src.name() + ", got " +
                        to_string(msg.kind));
  }
  const P* p = std::get_if<P>(&msg.payload);
  if (!p) throw ProtocolError(std::string("payload does not match kind ") + to_string(kind));
  return *p;
}

std::vector<Edge> active_edges(const Graph& g) {
  std::vector<Edge> out;
  out.reserve(g.num_active_edges());
  for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
    if (g.edge_active(e)) out.push_back(g.edges()[e]);
  }
  return out;
}

// Disjoint union of shards in the given order; row offsets follow it.
struct ShardView {
  std::span<const NodeId> ids;
  std::vector<Edge> edges;
  const FeatureMatrix* features = nullptr;
  std::span<const int> labels;
};

struct Merged {
  Graph graph;
  std::vector<NodeId> ids;
};

Merged merge_shards(std::span<const ShardView> shards, bool with_labels) {
  Merged m;
  std::vector<Edge> edges;
  std::vector<int> labels;
  Eigen::Index rows = 0, cols = -1;
  for (const auto& s : shards) {
    rows += static_cast<Eigen::Index>(s.ids.size());
    if (cols < 0) cols = s.features->cols();
    if (s.features->cols() != cols) throw ProtocolError("shards disagree on feature width");
  }
  FeatureMatrix x(rows, std::max<Eigen::Index>(cols, 0));
  Eigen::Index offset = 0;
  for (const auto& s : shards) {
    if (s.features->rows() != static_cast<Eigen::Index>(s.ids.size())) {
      throw ProtocolError("shard feature rows do not match its node ids");
    }
    x.middleRows(offset, s.features->rows()) = *s.features;
    for (const auto& e : s.edges) {
      edges.push_back({static_cast<NodeId>(e.u + offset), static_cast<NodeId>(e.v + offset)});
    }
    m.ids.insert(m.ids.end(), s.ids.begin(), s.ids.end());
    if (with_labels) labels.insert(labels.end(), s.labels.begin(), s.labels.end());
    offset += s.features->rows();
  }
  auto sorted = m.ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ProtocolError("shards overlap in global node ids");
  }
  m.graph = build_graph(edges, std::move(x), std::move(labels));
  return m;
}

std::string link_name(NodeAddress src, NodeAddress dst) { return src.name() + "->" + dst.name(); }

}  // namespace

std::string NodeAddress::name() const {
  switch (tier) {
    case Tier::kSatellite:
      return "sat-" + std::to_string(index);
    case Tier::kSpaceStation:
      return "space-" + std::to_string(index);
    case Tier::kGroundStation:
      return "ground-" + std::to_string(index);
  }
  return "unknown";
}

const char* to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::kPrunedGraph:
      return "PrunedGraph";
    case MessageKind::kSmashedData:
      return "SmashedData";
    case MessageKind::kGradientsBack:
      return "GradientsBack";
    case MessageKind::kModelUpdate:
      return "ModelUpdate";
  }
  return "unknown";
}

std::uint64_t serialized_size(const Payload& payload) {
  struct Visitor {
    std::uint64_t operator()(const PrunedGraphPayload& p) const {
      const auto n = static_cast<std::uint64_t>(p.global_ids.size());
      const auto e = static_cast<std::uint64_t>(p.edges.size());
      const auto d = static_cast<std::uint64_t>(p.features.cols());
      return kHeaderBytes + kIndexBytes * n + 2 * kIndexBytes * e + kRealBytes * n * d;
    }
    std::uint64_t operator()(const SmashedPayload& p) const {
      return kHeaderBytes + kRealBytes * static_cast<std::uint64_t>(p.activations.size());
    }
    std::uint64_t operator()(const GradientsPayload& p) const {
      return kHeaderBytes + kRealBytes * static_cast<std::uint64_t>(p.gradients.size());
    }
    std::uint64_t operator()(const ModelUpdatePayload& p) const {
      const auto& h = p.head;
      return kHeaderBytes +
             kRealBytes * static_cast<std::uint64_t>(h.w_self.size() + h.w_neigh.size() + h.bias.size());
    }
  };
  return std::visit(Visitor{}, payload);
}

Message make_message(NodeAddress src, NodeAddress dst, std::size_t round, Payload payload) {
  Message m;
  m.kind = static_cast<MessageKind>(payload.index());
  m.src = src;
  m.dst = dst;
  m.round = round;
  m.payload_bytes = serialized_size(payload);
  m.payload = std::move(payload);
  return m;
}

ChannelModel::ChannelModel(double bandwidth, double latency) : bandwidth_(bandwidth), latency_(latency) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (!(latency >= 0.0)) throw std::invalid_argument("latency must be non-negative");
}

double ChannelModel::transfer(std::uint64_t bytes) {
  const double t = latency_ + static_cast<double>(bytes) / bandwidth_;
  cumulative_bytes_ += bytes;
  cumulative_time_ += t;
  ++messages_;
  return t;
}

std::vector<NodeAddress> Topology::satellites_of(NodeAddress station) const {
  std::vector<NodeAddress> out;
  for (const auto& s : satellites) {
    if (s.uplink && *s.uplink == station) out.push_back(s.id);
  }
  return out;
}

void Topology::validate(std::size_t num_nodes) const {
  if (satellites.empty() || space_stations.empty()) throw ProtocolError("topology needs satellites and space stations");
  std::vector<std::uint8_t> owned(num_nodes, 0);
  for (std::size_t i = 0; i < satellites.size(); ++i) {
    const auto& s = satellites[i];
    if (s.id != satellite(static_cast<std::uint32_t>(i))) throw ProtocolError("satellite ids must be 0..S-1");
    if (!s.uplink || s.uplink->tier != Tier::kSpaceStation || s.uplink->index >= space_stations.size()) {
      throw ProtocolError(s.id.name() + " has no valid space-station uplink");
    }
    for (NodeId v : s.owned_partition.nodes) {
      if (v >= num_nodes || owned[v]) throw ProtocolError("partitions must be disjoint and in range");
      owned[v] = 1;
    }
  }
  if (std::find(owned.begin(), owned.end(), 0) != owned.end()) {
    throw ProtocolError("partitions must cover every node");
  }
  for (std::size_t i = 0; i < space_stations.size(); ++i) {
    const auto& st = space_stations[i];
    if (!st.uplink || *st.uplink != ground_station()) throw ProtocolError(st.id.name() + " must uplink to ground");
    if (satellites_of(st.id).empty()) throw ProtocolError(st.id.name() + " has no satellites");
  }
}

Topology build_topology(std::size_t num_nodes, const TopologyConfig& cfg, std::uint64_t seed) {
  const std::size_t s = cfg.satellites;
  if (s == 0 || cfg.space_stations == 0) throw std::invalid_argument("need at least one satellite and station");
  if (cfg.space_stations > s) throw std::invalid_argument("more space stations than satellites");
  if (num_nodes < s) throw std::invalid_argument("fewer nodes than satellites");

  std::vector<std::vector<NodeId>> parts(s);
  if (cfg.partition == PartitionStrategy::kBlockAligned) {
    for (std::size_t v = 0; v < num_nodes; ++v) parts[v * s / num_nodes].push_back(static_cast<NodeId>(v));
  } else {
    std::vector<NodeId> perm(num_nodes);
    std::iota(perm.begin(), perm.end(), NodeId{0});
    Rng rng(seed);
    for (std::size_t i = num_nodes; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    for (std::size_t k = 0; k < num_nodes; ++k) parts[k % s].push_back(perm[k]);
  }

  Topology t;
  t.ground = {ground_station(), {}, std::nullopt};
  for (std::size_t j = 0; j < cfg.space_stations; ++j) {
    t.space_stations.push_back({space_station(static_cast<std::uint32_t>(j)), {}, ground_station()});
  }
  for (std::size_t i = 0; i < s; ++i) {
    t.satellites.push_back({satellite(static_cast<std::uint32_t>(i)), NodeSubset::from_unsorted(std::move(parts[i])),
                            space_station(static_cast<std::uint32_t>(i % cfg.space_stations))});
  }
  t.validate(num_nodes);
  return t;
}

Network::Network(const Topology& topo, const TopologyConfig& cfg) {
  auto link = [&](NodeAddress a, NodeAddress b) {
    links_.emplace(std::pair{a, b}, ChannelModel(cfg.bandwidth, cfg.latency));
    links_.emplace(std::pair{b, a}, ChannelModel(cfg.bandwidth, cfg.latency));
  };
  for (const auto& s : topo.satellites) link(s.id, *s.uplink);
  for (const auto& st : topo.space_stations) link(st.id, topo.ground.id);
}

double Network::deliver(const Message& msg) {
  auto it = links_.find({msg.src, msg.dst});
  if (it == links_.end()) throw ProtocolError("no link " + link_name(msg.src, msg.dst));
  return it->second.transfer(msg.payload_bytes);
}

std::uint64_t Network::total_bytes() const {
  std::uint64_t total = 0;
  for (const auto& [_, ch] : links_) total += ch.cumulative_bytes();
  return total;
}

SatelliteOutput satellite_step(const TierNode& node, const Subgraph& raw_shard, const SatelliteConfig& cfg,
                               std::uint64_t seed, std::size_t round) {
  if (node.id.tier != Tier::kSatellite || !node.uplink) throw ProtocolError("satellite_step needs a satellite");
  if (raw_shard.original_ids.size() != raw_shard.graph.num_nodes()) {
    throw ProtocolError("shard ids do not match its node count");
  }
  Subgraph noisy{cfg.dp_enabled ? apply_dp_to_graph(raw_shard.graph, cfg.privacy, seed) : raw_shard.graph,
                 raw_shard.original_ids};

  PrunedGraphPayload p;
  if (cfg.prune_enabled) {
    const auto scores = compute_centrality(noisy.graph, cfg.score_mode).combined;
    const auto sel = cfg.selection == SelectionMode::kRatio
                         ? select_prune_nodes_ratio(scores, cfg.dropping_ratio)
                         : select_prune_nodes_threshold(scores, cfg.threshold_k);
    Subgraph pruned = prune_graph_with_ids(noisy.graph, sel);
    for (NodeId local : pruned.original_ids) p.global_ids.push_back(noisy.original_ids[local]);
    p.edges = active_edges(pruned.graph);
    p.features = pruned.graph.features();
  } else {
    p.global_ids = noisy.original_ids;
    p.edges = active_edges(noisy.graph);
    p.features = noisy.graph.features();
  }
  return {make_message(node.id, *node.uplink, round, std::move(p)), std::move(noisy)};
}

SpaceStation::SpaceStation(NodeAddress id, Encoder<double> encoder, std::vector<NodeAddress> satellites)
    : id_(id), encoder_(std::move(encoder)), satellites_(std::move(satellites)) {
  if (id.tier != Tier::kSpaceStation) throw ProtocolError("space station id must be in the space tier");
  std::sort(satellites_.begin(), satellites_.end());
}

void SpaceStation::receive_shards(std::span<const Message> msgs) {
  if (adj_) throw ProtocolError(id_.name() + " already holds its shards");
  if (msgs.size() != satellites_.size()) {
    throw ProtocolError(id_.name() + " expected " + std::to_string(satellites_.size()) + " shards, got " +
                        std::to_string(msgs.size()));
  }
  std::vector<const Message*> order;
  for (const auto& m : msgs) {
    if (m.dst != id_) throw ProtocolError("shard addressed to " + m.dst.name() + " reached " + id_.name());
    if (!std::binary_search(satellites_.begin(), satellites_.end(), m.src)) {
      throw ProtocolError(m.src.name() + " is not assigned to " + id_.name());
    }
    order.push_back(&m);
  }
  std::sort(order.begin(), order.end(), [](const Message* a, const Message* b) { return a->src < b->src; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->src == order[i - 1]->src) throw ProtocolError("duplicate shard from " + order[i]->src.name());
  }
  std::vector<ShardView> views;
  for (const Message* m : order) {
    const auto& p = payload_as<PrunedGraphPayload>(*m, MessageKind::kPrunedGraph);
    views.push_back({p.global_ids, p.edges, &p.features, {}});
  }
  Merged merged = merge_shards(views, false);
  if (static_cast<Eigen::Index>(merged.graph.feature_dim()) != encoder_.layer.in_dim()) {
    throw ProtocolError("shard feature width does not match the encoder");
  }
  union_ = std::move(merged.graph);
  global_ids_ = std::move(merged.ids);
  x_ = features_as<double>(union_);
  adj_.emplace(union_);
}

Message SpaceStation::topology_message(std::size_t round) const {
  if (!adj_) throw ProtocolError(id_.name() + " has no shards yet");
  PrunedGraphPayload p{global_ids_, active_edges(union_), FeatureMatrix(union_.num_nodes(), 0)};
  return make_message(id_, ground_station(), round, std::move(p));
}

Message SpaceStation::forward(std::size_t round, std::uint64_t dropout_seed, double dropout_rate) {
  if (!adj_) throw ProtocolError(id_.name() + " has no shards yet");
  if (pending_round_) throw ProtocolError(id_.name() + " is still waiting for gradients");
  cache_.emplace();
  const DropoutSpec drop{dropout_rate, dropout_seed, global_ids_};
  Mat<double> h = encoder_forward(encoder_, *adj_, x_, Mode::kTrain, drop, &*cache_);
  pending_round_ = round;
  return make_message(id_, ground_station(), round, SmashedPayload{std::move(h)});
}

void SpaceStation::backward(const Message& grads, double learning_rate) {
  const auto& p = payload_as<GradientsPayload>(grads, MessageKind::kGradientsBack);
  if (grads.src != ground_station() || grads.dst != id_) throw ProtocolError("misrouted gradients");
  if (!pending_round_ || *pending_round_ != grads.round) {
    throw ProtocolError(id_.name() + " got gradients for round " + std::to_string(grads.round) +
                        " with no matching forward pass");
  }
  if (p.gradients.rows() != x_.rows() || p.gradients.cols() != encoder_.layer.out_dim()) {
    throw ProtocolError("gradient shape does not match the smashed data");
  }
  const auto g = encoder_backward(encoder_, *adj_, *cache_, p.gradients);
  const auto slots = param_slots(encoder_, g);
  adam_update<double>(adam_, slots, learning_rate);
  update_running_stats(encoder_.bn, *cache_);
  pending_round_.reset();
  cache_.reset();
}

void SpaceStation::apply_model_update(const Message& update) {
  const auto& p = payload_as<ModelUpdatePayload>(update, MessageKind::kModelUpdate);
  if (update.src != ground_station() || update.dst != id_) throw ProtocolError("misrouted model update");
  head_ = p.head;
}

Message space_station_step(SpaceStation& station, std::span<const Message> shard_msgs, std::size_t round,
                           std::uint64_t dropout_seed, double dropout_rate) {
  if (!shard_msgs.empty()) station.receive_shards(shard_msgs);
  return station.forward(round, dropout_seed, dropout_rate);
}

GroundStation::GroundStation(SageLayer<double> head, std::vector<int> labels,
                             std::vector<std::uint8_t> train_mask)
    : head_(std::move(head)), labels_(std::move(labels)), train_mask_(std::move(train_mask)) {
  if (labels_.size() != train_mask_.size()) throw ProtocolError("labels and train mask differ in length");
}

void GroundStation::receive_topology(const Message& msg) {
  const auto& p = payload_as<PrunedGraphPayload>(msg, MessageKind::kPrunedGraph);
  if (msg.src.tier != Tier::kSpaceStation) {
    throw ProtocolError("ground accepts graph topology only from space stations, not " + msg.src.name());
  }
  if (msg.dst != ground_station()) throw ProtocolError("misrouted topology message");
  if (p.features.cols() != 0) throw ProtocolError("raw features must not reach the ground station");
  for (NodeId v : p.global_ids) {
    if (v >= labels_.size()) throw ProtocolError("topology names an unknown node");
  }
  stations_[msg.src] = {p.global_ids, p.edges};
}

GroundStation::Assembled GroundStation::assemble(std::span<const Message> smashed) const {
  if (stations_.empty()) throw ProtocolError("ground station has no topology");
  if (smashed.size() != stations_.size()) {
    throw ProtocolError("expected one SmashedData per space station (" + std::to_string(stations_.size()) +
                        "), got " + std::to_string(smashed.size()));
  }
  std::vector<const Message*> order;
  for (const auto& m : smashed) {
    payload_as<SmashedPayload>(m, MessageKind::kSmashedData);
    if (m.dst != ground_station()) throw ProtocolError("misrouted smashed data");
    if (!stations_.contains(m.src)) throw ProtocolError("smashed data from unknown sender " + m.src.name());
    order.push_back(&m);
  }
  std::sort(order.begin(), order.end(), [](const Message* a, const Message* b) { return a->src < b->src; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->src == order[i - 1]->src) throw ProtocolError("duplicate smashed data from " + order[i]->src.name());
  }

  Assembled a;
  std::vector<ShardView> views;
  std::vector<FeatureMatrix> empties;
  empties.reserve(order.size());
  Eigen::Index rows = 0;
  for (const Message* m : order) {
    const auto& view = stations_.at(m->src);
    const auto& h = std::get<SmashedPayload>(m->payload).activations;
    if (h.rows() != static_cast<Eigen::Index>(view.global_ids.size()) || h.cols() != head_.in_dim()) {
      throw ProtocolError("smashed data from " + m->src.name() + " has the wrong shape");
    }
    a.order.push_back(m->src);
    a.offsets.push_back(rows);
    rows += h.rows();
    empties.emplace_back(h.rows(), 0);
    views.push_back({view.global_ids, view.edges, &empties.back(), {}});
  }
  Merged merged = merge_shards(views, false);
  a.graph = std::move(merged.graph);
  a.activations.resize(rows, head_.in_dim());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& h = std::get<SmashedPayload>(order[k]->payload).activations;
    a.activations.middleRows(a.offsets[k], h.rows()) = h;
  }
  for (NodeId v : merged.ids) {
    a.labels.push_back(labels_[v]);
    a.mask.push_back(train_mask_[v]);
  }
  return a;
}

GroundOutput GroundStation::step(std::span<const Message> smashed, std::size_t round, double learning_rate) {
  Assembled a = assemble(smashed);
  const NeighborIndex adj(a.graph);
  SageCache<double> cache;
  const Mat<double> logits = sage_forward(head_, adj, a.activations, &cache);
  Mat<double> d_logits;
  const LossResult lr = cross_entropy(logits, a.labels, a.mask, &d_logits);
  Mat<double> d_h;
  const auto grads = sage_backward(head_, adj, cache, d_logits, &d_h);
  const auto slots = param_slots(head_, grads);
  adam_update<double>(adam_, slots, learning_rate);

  GroundOutput out;
  out.metrics.loss = lr.loss;
  out.metrics.nodes = static_cast<std::size_t>(logits.rows());
  std::size_t hit = 0;
  for (Eigen::Index v = 0; v < logits.rows(); ++v) {
    if (!a.mask[static_cast<std::size_t>(v)]) continue;
    Eigen::Index arg = 0;
    logits.row(v).maxCoeff(&arg);
    hit += static_cast<int>(arg) == a.labels[static_cast<std::size_t>(v)];
  }
  out.metrics.train_accuracy = static_cast<double>(hit) / static_cast<double>(lr.count);

  for (std::size_t k = 0; k < a.order.size(); ++k) {
    const auto rows = static_cast<Eigen::Index>(stations_.at(a.order[k]).global_ids.size());
    out.gradients.push_back(make_message(ground_station(), a.order[k], round,
                                         GradientsPayload{d_h.middleRows(a.offsets[k], rows)}));
  }
  for (const auto& [addr, _] : stations_) {
    out.updates.push_back(make_message(ground_station(), addr, round, ModelUpdatePayload{head_}));
  }
  return out;
}

double GroundStation::loss(std::span<const Message> smashed) const {
  Assembled a = assemble(smashed);
  const NeighborIndex adj(a.graph);
  return cross_entropy(sage_forward(head_, adj, a.activations), a.labels, a.mask).loss;
}

GroundOutput ground_station_step(GroundStation& ground, std::span<const Message> smashed, std::size_t round,
                                 double learning_rate) {
  return ground.step(smashed, round, learning_rate);
}

void SplitRunMetrics::write_csv(std::ostream& out) const {
  std::vector<std::string> header{"round", "loss", "train_acc", "test_acc", "sl_bytes_total"};
  for (const auto& [name, _] : link_bytes) header.push_back(name);
  CsvWriter csv(out, header);
  std::uint64_t total = 0;
  for (const auto& r : rounds) {
    total += r.bytes;
    std::vector<std::string> fields{std::to_string(r.round), format_number(r.loss),
                                    format_number(r.train_accuracy), format_number(r.test_accuracy),
                                    std::to_string(total)};
    for (const auto& [name, _] : link_bytes) {
      const auto it = r.link_bytes.find(name);
      fields.push_back(std::to_string(it == r.link_bytes.end() ? 0 : it->second));
    }
    csv.write_fields(fields);
  }
}

namespace {

struct EvalShard {
  std::vector<NodeId> ids;
  Graph graph;
};

// Eval-mode predictions on each station's DP-perturbed, unpruned shards.
std::vector<int> split_predictions(std::size_t n, std::span<const SpaceStation> stations,
                                   std::span<const EvalShard> shards, const SageLayer<double>& head) {
  std::vector<int> pred(n, -1);
  for (std::size_t k = 0; k < stations.size(); ++k) {
    const NeighborIndex adj(shards[k].graph);
    const Mat<double> x = features_as<double>(shards[k].graph);
    const Mat<double> h = encoder_forward(stations[k].encoder(), adj, x, Mode::kEval, DropoutSpec{});
    const Mat<double> logits = sage_forward(head, adj, h);
    for (Eigen::Index v = 0; v < logits.rows(); ++v) {
      Eigen::Index arg = 0;
      logits.row(v).maxCoeff(&arg);
      pred[shards[k].ids[static_cast<std::size_t>(v)]] = static_cast<int>(arg);
    }
  }
  return pred;
}

}  // namespace

SplitRunMetrics run_split_training(const Graph& global, const NodeSplit& split, const SplitConfig& cfg,
                                   std::uint64_t seed) {
  if (!global.has_labels()) throw std::invalid_argument("split training needs node labels");
  const std::size_t n = global.num_nodes();
  if (split.train.size() != n || split.test.size() != n) {
    throw std::invalid_argument("node split does not match the graph");
  }
  if (!(cfg.train.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");

  const Topology topo = build_topology(n, cfg.topology, derive_seed(seed, kPartitionTag));
  Network net(topo, cfg.topology);
  const auto model = init_model<double>(static_cast<Eigen::Index>(global.feature_dim()), cfg.hidden_dim,
                                        global.num_classes(), cfg.train.dropout_rate, seed);

  SplitRunMetrics out;
  RoundMetrics cur;
  auto send = [&](const Message& m) {
    const double t = net.deliver(m);
    const auto bytes = m.payload_bytes;
    out.log.push_back({m.kind, m.src, m.dst, m.round, bytes});
    out.link_bytes[link_name(m.src, m.dst)] += bytes;
    out.bytes_by_kind[static_cast<std::size_t>(m.kind)] += bytes;
    out.total_bytes += bytes;
    cur.bytes += bytes;
    cur.bytes_by_kind[static_cast<std::size_t>(m.kind)] += bytes;
    return t;
  };

  // Satellites: DP, node pruning, one upload.
  std::map<NodeAddress, std::vector<Message>> inbox;
  std::map<NodeAddress, std::vector<Subgraph>> noisy;
  double t_uplink = 0.0;
  for (std::size_t i = 0; i < topo.satellites.size(); ++i) {
    const auto& sat = topo.satellites[i];
    auto so = satellite_step(sat, induced_subgraph(global, sat.owned_partition), cfg.satellite,
                             derive_seed(seed, kSatelliteDpTag, i), 1);
    t_uplink = std::max(t_uplink, send(so.message));
    inbox[*sat.uplink].push_back(std::move(so.message));
    noisy[*sat.uplink].push_back(std::move(so.noisy_shard));
  }

  std::vector<SpaceStation> stations;
  std::vector<EvalShard> eval;
  GroundStation ground(model.head, global.labels(), split.train);
  double t_topology = 0.0;
  for (const auto& node : topo.space_stations) {
    stations.emplace_back(node.id, model.encoder, topo.satellites_of(node.id));
    stations.back().receive_shards(inbox[node.id]);
    const Message tm = stations.back().topology_message(1);
    t_topology = std::max(t_topology, send(tm));
    ground.receive_topology(tm);

    std::vector<ShardView> views;
    for (const auto& s : noisy[node.id]) {
      views.push_back({s.original_ids, active_edges(s.graph), &s.graph.features(), s.graph.labels()});
    }
    Merged m = merge_shards(views, true);
    eval.push_back({std::move(m.ids), std::move(m.graph)});
  }
  for (const auto& st : stations) out.smashed_nodes += st.global_ids().size();

  auto measure = [&](RoundMetrics& r) {
    const auto pred = split_predictions(n, stations, eval, ground.head());
    r.train_accuracy = accuracy(pred, global.labels(), split.train);
    r.test_accuracy = accuracy(pred, global.labels(), split.test);
  };

  double prelude_time = std::max(t_uplink, t_topology);
  for (std::size_t round = 1; round <= cfg.train.epochs; ++round) {
    cur.round = round;
    double t_smashed = 0.0, t_grads = 0.0, t_updates = 0.0;
    std::vector<Message> smashed;
    for (auto& st : stations) {
      smashed.push_back(st.forward(round, epoch_dropout_seed(seed, round - 1), cfg.train.dropout_rate));
      t_smashed = std::max(t_smashed, send(smashed.back()));
    }
    const GroundOutput go = ground.step(smashed, round, cfg.train.learning_rate);
    if (go.gradients.size() != stations.size()) throw ProtocolError("ground returned a wrong gradient count");
    for (const auto& g : go.gradients) {
      t_grads = std::max(t_grads, send(g));
      stations.at(g.dst.index).backward(g, cfg.train.learning_rate);
    }
    for (const auto& u : go.updates) {
      t_updates = std::max(t_updates, send(u));
      stations.at(u.dst.index).apply_model_update(u);
    }
    cur.loss = go.metrics.loss;
    cur.wall_time = std::max({prelude_time, t_smashed, t_grads, t_updates});
    prelude_time = 0.0;
    cur.link_bytes = out.link_bytes;
    if (cfg.track_accuracy || round == cfg.train.epochs) measure(cur);
    out.rounds.push_back(cur);
    cur = RoundMetrics{};
  }

  if (out.rounds.empty()) {
    RoundMetrics r;
    measure(r);
    out.final_train_accuracy = r.train_accuracy;
    out.final_test_accuracy = r.test_accuracy;
  } else {
    out.final_train_accuracy = out.rounds.back().train_accuracy;
    out.final_test_accuracy = out.rounds.back().test_accuracy;
  }
  for (const auto& st : stations) out.encoders.push_back(st.encoder());
  out.head = ground.head();
  return out;
}

FlBaselineResult run_fl_baseline(const FlBaselineConfig& cfg) {
  if (cfg.num_clients == 0) throw std::invalid_argument("FL baseline needs at least one client");
  if (cfg.params_per_model == 0 || cfg.bytes_per_param == 0) {
    throw std::invalid_argument("FL baseline needs a non-empty model");
  }
  const std::uint64_t one_way = static_cast<std::uint64_t>(cfg.num_clients) * cfg.params_per_model *
                                cfg.bytes_per_param;
  FlBaselineResult r;
  r.per_round_bytes.assign(cfg.rounds, 2 * one_way);
  r.upload_bytes = one_way * cfg.rounds;
  r.download_bytes = one_way * cfg.rounds;
  r.total_bytes = r.upload_bytes + r.download_bytes;
  return r;
}

std::size_t parameter_count(const GnnModel& model) {
  auto layer = [](const SageLayer<double>& l) {
    return static_cast<std::size_t>(l.w_self.size() + l.w_neigh.size() + l.bias.size());
  };
  const auto& bn = model.encoder.bn;
  return layer(model.encoder.layer) + static_cast<std::size_t>(bn.gamma.size() + bn.beta.size()) +
         layer(model.head);
}

std::size_t parameter_count(Eigen::Index f, Eigen::Index h, Eigen::Index c) {
  if (f <= 0 || h <= 0 || c <= 0) throw std::invalid_argument("model dimensions must be positive");
  return static_cast<std::size_t>(2 * f * h + h + 2 * h + 2 * h * c + c);
}

CommCostRow comm_cost_row(std::size_t clients, const SplitRunMetrics& sl, const FlBaselineResult& fl) {
  if (sl.total_bytes == 0) throw std::domain_error("split-learning run moved no bytes");
  return {clients, fl.total_bytes, sl.total_bytes,
          static_cast<double>(fl.total_bytes) / static_cast<double>(sl.total_bytes)};
}

std::vector<CommCostRow> comm_cost_report(std::span<const std::size_t> clients,
                                          std::span<const SplitRunMetrics> sl,
                                          std::span<const FlBaselineResult> fl) {
  if (clients.size() != sl.size() || clients.size() != fl.size()) {
    throw std::invalid_argument("comm cost inputs differ in length");
  }
  std::vector<CommCostRow> rows;
  for (std::size_t i = 0; i < clients.size(); ++i) rows.push_back(comm_cost_row(clients[i], sl[i], fl[i]));
  return rows;
}

void write_comm_cost_csv(std::ostream& out, std::span<const CommCostRow> rows) {
  CsvWriter csv(out, {"clients", "fl_bytes", "sl_bytes", "ratio"});
  for (const auto& r : rows) csv.row(r.clients, r.fl_bytes, r.sl_bytes, r.ratio);
}

}  // namespace orbitsplit
