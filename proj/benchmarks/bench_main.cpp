#include <benchmark/benchmark.h>

#include "orbitsplit/centrality.hpp"
#include "orbitsplit/gnn.hpp"
#include "orbitsplit/split_protocol.hpp"

using namespace orbitsplit;

namespace {

Graph sbm(std::size_t per_block) {
  return sbm_generate({{per_block, per_block, per_block}, 0.3, 0.02, 16, 0, 1.0});
}

void BM_Betweenness(benchmark::State& state) {
  const Graph g = sbm(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(betweenness_centrality(g));
}
BENCHMARK(BM_Betweenness)->Arg(33)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_Bridges(benchmark::State& state) {
  const Graph g = sbm(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(find_bridges(g));
}
BENCHMARK(BM_Bridges)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_ForwardBackward(benchmark::State& state) {
  const Graph g = sbm(100);
  const auto model = init_model<double>(16, state.range(0), 3, 0.3, 0);
  const std::vector<std::uint8_t> mask(g.num_nodes(), 1);
  const NeighborIndex adj(g);
  const auto x = features_as<double>(g);
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_and_grads(model, adj, x, g.labels(), mask, Mode::kTrain, 1).loss);
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_SplitRounds(benchmark::State& state) {
  const Graph g = sbm(100);
  const auto split = random_node_split(g.num_nodes(), 0.6, 0);
  SplitConfig cfg;
  cfg.topology = {static_cast<std::size_t>(state.range(0)), 2};
  cfg.train.epochs = 10;
  cfg.track_accuracy = false;
  for (auto _ : state) benchmark::DoNotOptimize(run_split_training(g, split, cfg, 0).total_bytes);
}
BENCHMARK(BM_SplitRounds)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
