#include <benchmark/benchmark.h>

#include <map>
#include <memory>
#include <tuple>

#include "fastertucker/csf_index.hpp"
#include "fastertucker/intermediates.hpp"
#include "fastertucker/trainer.hpp"

namespace ft = fastertucker;

namespace {

struct Fixture {
  ft::SparseTensorCoo tensor;
  ft::CsfForest forest;
  ft::Model model;
};

// Shared across benchmark repetitions; built on first use.
const Fixture& fixture(std::size_t order, std::size_t nnz, std::size_t rank) {
  static std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::unique_ptr<Fixture>> cache;
  auto& slot = cache[{order, nnz, rank}];
  if (!slot) {
    ft::SyntheticSpec spec;
    spec.dims.assign(order, 1000);
    spec.nnz = nnz;
    spec.seed = 1;
    auto f = std::make_unique<Fixture>();
    f->tensor = ft::generate_synthetic(spec).tensor;
    f->forest = ft::CsfForest(f->tensor);
    const std::vector<std::size_t> ranks(order, rank);
    f->model = ft::init_model(f->tensor.dims(), ranks, rank, ft::InitSpec{0, 1, 2, true});
    slot = std::move(f);
  }
  return *slot;
}

void factor_sweep(benchmark::State& state, ft::Plan plan) {
  const auto& f = fixture(state.range(0), state.range(1), state.range(2));
  ft::TrainConfig cfg;
  cfg.plan = plan;
  cfg.lr_a = 1e-6;
  ft::Model model = f.model;
  ft::Trainer trainer(model, f.forest, cfg);
  trainer.prepare();
  ft::mode_t root = 0;
  for (auto _ : state) {
    trainer.update_factor_mode(root);
    root = (root + 1) % f.tensor.order();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.tensor.nnz()));
}

void core_sweep(benchmark::State& state, ft::Plan plan) {
  const auto& f = fixture(state.range(0), state.range(1), state.range(2));
  ft::TrainConfig cfg;
  cfg.plan = plan;
  cfg.lr_b = 1e-6;
  ft::Model model = f.model;
  ft::Trainer trainer(model, f.forest, cfg);
  trainer.prepare();
  ft::mode_t root = 0;
  for (auto _ : state) {
    trainer.update_core_mode(root);
    root = (root + 1) % f.tensor.order();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.tensor.nnz()));
}

void precompute(benchmark::State& state) {
  const auto& f = fixture(3, 100000, state.range(0));
  ft::AbCache cache(f.model);
  for (auto _ : state) {
    cache = ft::AbCache(f.model);
    cache.precompute(f.model);
    benchmark::DoNotOptimize(cache.at(0, 0, 0));
  }
}

void build_forest(benchmark::State& state) {
  const auto& f = fixture(state.range(0), state.range(1), 8);
  for (auto _ : state) {
    ft::CsfForest forest(f.tensor);
    benchmark::DoNotOptimize(forest.nnz());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.tensor.nnz()));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({3, 100000, 8})->Args({3, 100000, 32})->Args({4, 100000, 8})->Args({6, 100000, 8});
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK_CAPTURE(factor_sweep, cached, ft::Plan::Cached)->Apply(shapes);
BENCHMARK_CAPTURE(factor_sweep, uncached, ft::Plan::Uncached)->Apply(shapes);
BENCHMARK_CAPTURE(core_sweep, cached, ft::Plan::Cached)->Apply(shapes);
BENCHMARK_CAPTURE(core_sweep, uncached, ft::Plan::Uncached)->Apply(shapes);
BENCHMARK(precompute)->Arg(8)->Arg(32)->Unit(benchmark::kMicrosecond);
BENCHMARK(build_forest)->Args({3, 100000})->Args({6, 100000})->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
