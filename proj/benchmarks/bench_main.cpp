#include <benchmark/benchmark.h>

#include "vista/frontend.hpp"
#include "vista/inference.hpp"
#include "vista/random.hpp"

namespace {

void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  vista::Rng rng(1);
  const auto x = rng.normal_tensor(vista::Shape{c, 32, 32}, 1.0);
  const auto k = rng.normal_tensor(vista::Shape{c, c, 3, 3}, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(vista::conv2d(x, k));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * c * c * 9 * 32 * 32));
}
BENCHMARK(BM_Conv2d)->Arg(4)->Arg(8)->Arg(16);

// Receiving-scale refinement cost against the rank T.
void BM_RefineScale(benchmark::State& state) {
  vista::Rng rng(2);
  const std::vector<std::size_t> channels{8, 16, 16};
  vista::MultiScaleFeatures f;
  f.features = {rng.normal_tensor(vista::Shape{8, 32, 32}, 1.0),
                rng.normal_tensor(vista::Shape{16, 16, 16}, 1.0),
                rng.normal_tensor(vista::Shape{16, 8, 8}, 1.0)};
  f.receiving = 2;
  vista::InferenceConfig cfg;
  cfg.rank = static_cast<int>(state.range(0));
  const auto bank = vista::make_kernel_bank(channels, 2, 3, rng);
  const auto params = vista::make_attention_params(3, 16, 8, 8, cfg, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vista::refine_scale(f, bank, params, cfg, 7));
  }
}
BENCHMARK(BM_RefineScale)->Arg(0)->Arg(1)->Arg(3)->Arg(5)->Arg(7)->Arg(9);

void BM_PredictSegmentation(benchmark::State& state) {
  vista::ModelConfig cfg;
  cfg.inference.rank = static_cast<int>(state.range(0));
  const auto params = vista::init_model(cfg, 32, 32, 3);
  vista::Rng rng(4);
  const auto image = rng.normal_tensor(vista::Shape{3, 32, 32}, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(vista::predict(params, cfg, image, 5));
}
BENCHMARK(BM_PredictSegmentation)->Arg(1)->Arg(9);

}  // namespace
BENCHMARK_MAIN();
