#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cdrlink/decompose.hpp"
#include "cdrlink/featurize.hpp"
#include "cdrlink/learn.hpp"
#include "cdrlink/pairgraph.hpp"
#include "cdrlink/synthgen.hpp"

using namespace cdrlink;

namespace {

struct Corpus {
  SyntheticDataset data;
  LinkGraph graph;
  std::vector<PairKey> pairs;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    auto config = preset_config("table3-like");
    config.n_pairs = 1000;
    Corpus out{generate(config), {}, {}};
    out.graph = build_links(out.data.events, config.window);
    out.pairs = mutual_top_rank_pairs(apply_regularity_filter(out.graph, config.window));
    return out;
  }();
  return c;
}

LabeledDataset gaussian_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  LabeledDataset out;
  out.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  out.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.y[i] = static_cast<int>(i % 2);
    for (std::size_t j = 0; j < d; ++j)
      out.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = z(rng) + (j < 10 ? 0.5 * out.y[i] : 0.0);
  }
  return out;
}

void BM_BuildLinks(benchmark::State& state) {
  const auto& c = corpus();
  for (auto _ : state) benchmark::DoNotOptimize(build_links(c.data.events, ObservationWindow::default_window()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c.data.events.size()));
}
BENCHMARK(BM_BuildLinks)->Unit(benchmark::kMillisecond);

void BM_ComputeFeatures(benchmark::State& state) {
  const auto& c = corpus();
  for (auto _ : state)
    benchmark::DoNotOptimize(compute_features(c.data.events, c.pairs, c.graph, ObservationWindow::default_window()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c.pairs.size()));
}
BENCHMARK(BM_ComputeFeatures)->Unit(benchmark::kMillisecond);

void BM_Pca(benchmark::State& state) {
  const auto data = generate_planted_factors({static_cast<std::size_t>(state.range(0)), 1});
  const FeatureMatrix z = apply_scaler(data.table.values, fit_scaler(data.table.values));
  for (auto _ : state) benchmark::DoNotOptimize(pca(z));
}
BENCHMARK(BM_Pca)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_Varimax(benchmark::State& state) {
  const auto data = generate_planted_factors({5000, 1});
  const auto l = loadings(pca(apply_scaler(data.table.values, fit_scaler(data.table.values))), kPlantedFactorCount);
  for (auto _ : state) benchmark::DoNotOptimize(varimax(l));
}
BENCHMARK(BM_Varimax)->Unit(benchmark::kMillisecond);

void BM_TrainLinear(benchmark::State& state) {
  const auto kind = state.range(1) == 0 ? ModelKind::logreg : ModelKind::linear_svm;
  const auto train = gaussian_rows(static_cast<std::size_t>(state.range(0)), kFeatureCount, 3);
  for (auto _ : state) benchmark::DoNotOptimize(train_linear(kind, train, TrainOptions{}));
  state.SetLabel(to_string(kind));
}
BENCHMARK(BM_TrainLinear)->Args({2000, 0})->Args({2000, 1})->Unit(benchmark::kMillisecond);

void BM_KnnNeighbors(benchmark::State& state) {
  const auto train = gaussian_rows(static_cast<std::size_t>(state.range(0)), kFeatureCount, 4);
  const auto query = gaussian_rows(500, kFeatureCount, 5);
  for (auto _ : state) benchmark::DoNotOptimize(knn_neighbors(train.x, query.x, 51));
  state.SetItemsProcessed(state.iterations() * 500);
}
BENCHMARK(BM_KnnNeighbors)->Arg(2000)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
