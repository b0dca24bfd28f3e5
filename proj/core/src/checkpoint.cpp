#include <fstream>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "orbitsplit/gnn.hpp"

namespace orbitsplit {

namespace {

using nlohmann::json;

template <typename T>
constexpr const char* precision_name() {
  return std::is_same_v<T, float> ? "float32" : "float64";
}

template <typename Derived>
json dump_matrix(const Eigen::MatrixBase<Derived>& m) {
  using T = typename Derived::Scalar;
  std::vector<T> values;
  values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) values.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", values}};
}

template <typename M>
void load_matrix(const json& j, M& out) {
  using T = typename M::Scalar;
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto values = j.at("values").get<std::vector<T>>();
  if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw ModelError("checkpoint: value count does not match shape");
  }
  out.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) out(i, c) = values[static_cast<std::size_t>(i * cols + c)];
}

template <typename T>
json dump_layer(const SageLayer<T>& l) {
  return {{"w_self", dump_matrix(l.w_self)},       {"w_neigh", dump_matrix(l.w_neigh)},
          {"bias", dump_matrix(l.bias)},           {"mask_self", dump_matrix(l.mask_self)},
          {"mask_neigh", dump_matrix(l.mask_neigh)}};
}

template <typename T>
SageLayer<T> load_layer(const json& j) {
  SageLayer<T> l;
  load_matrix(j.at("w_self"), l.w_self);
  load_matrix(j.at("w_neigh"), l.w_neigh);
  load_matrix(j.at("bias"), l.bias);
  load_matrix(j.at("mask_self"), l.mask_self);
  load_matrix(j.at("mask_neigh"), l.mask_neigh);
  if (l.w_neigh.rows() != l.w_self.rows() || l.w_neigh.cols() != l.w_self.cols() ||
      l.mask_self.rows() != l.w_self.rows() || l.mask_self.cols() != l.w_self.cols() ||
      l.mask_neigh.rows() != l.w_self.rows() || l.mask_neigh.cols() != l.w_self.cols() ||
      l.bias.cols() != l.w_self.cols()) {
    throw ModelError("checkpoint: inconsistent layer shapes");
  }
  return l;
}

}  // namespace

template <typename T>
void save_checkpoint(const GnnModelT<T>& model, const std::filesystem::path& path) {
  const auto& bn = model.encoder.bn;
  json j = {
      {"format", "orbitsplit-gnn-checkpoint"},
      {"version", 1},
      {"precision", precision_name<T>()},
      {"dropout_rate", model.dropout_rate},
      {"encoder",
       {{"layer", dump_layer(model.encoder.layer)},
        {"batch_norm",
         {{"gamma", dump_matrix(bn.gamma)},
          {"beta", dump_matrix(bn.beta)},
          {"running_mean", dump_matrix(bn.running_mean)},
          {"running_var", dump_matrix(bn.running_var)},
          {"momentum", bn.momentum},
          {"eps", bn.eps}}}}},
      {"head", dump_layer(model.head)},
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << j.dump(1) << '\n';
}

template <typename T>
GnnModelT<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  const json j = json::parse(in);
  if (j.at("precision").get<std::string>() != precision_name<T>()) {
    throw ModelError("checkpoint precision is " + j.at("precision").get<std::string>() +
                     ", expected " + precision_name<T>());
  }
  GnnModelT<T> m;
  m.dropout_rate = j.at("dropout_rate").get<double>();
  const json& enc = j.at("encoder");
  m.encoder.layer = load_layer<T>(enc.at("layer"));
  const json& bn = enc.at("batch_norm");
  load_matrix(bn.at("gamma"), m.encoder.bn.gamma);
  load_matrix(bn.at("beta"), m.encoder.bn.beta);
  load_matrix(bn.at("running_mean"), m.encoder.bn.running_mean);
  load_matrix(bn.at("running_var"), m.encoder.bn.running_var);
  m.encoder.bn.momentum = bn.at("momentum").get<T>();
  m.encoder.bn.eps = bn.at("eps").get<T>();
  m.head = load_layer<T>(j.at("head"));
  if (m.head.in_dim() != m.encoder.layer.out_dim()) throw ModelError("checkpoint: layer dims do not chain");
  return m;
}

template void save_checkpoint<float>(const GnnModelT<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(const GnnModelT<double>&, const std::filesystem::path&);
template GnnModelT<float> load_checkpoint<float>(const std::filesystem::path&);
template GnnModelT<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace orbitsplit
