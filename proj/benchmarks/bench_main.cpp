#include <random>

#include <benchmark/benchmark.h>

#include "semamba/eval/metrics.hpp"
#include "semamba/nets/network.hpp"
#include "semamba/ssm/cross_scan.hpp"
#include "semamba/ssm/selective_scan.hpp"

using namespace semamba;

namespace {

// Sizes follow the first Mamba-UNet stage at 224 px: 192 inner channels, 56x56 tokens.
void BM_SelectiveScanForward(benchmark::State& state) {
  const int64_t len = state.range(0);
  const int64_t channels = 4 * 192, n = 16;
  torch::manual_seed(0);
  const auto u = torch::randn({1, channels, len});
  const auto delta = torch::rand({1, channels, len}) * 0.1 + 1e-3;
  const auto A = -torch::rand({channels, n}) - 0.5;
  const auto B = torch::randn({1, 4, n, len});
  const auto C = torch::randn({1, 4, n, len});
  const auto D = torch::ones({channels});
  torch::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ssm::selective_scan(u, delta, A, B, C, D));
  state.SetItemsProcessed(state.iterations() * channels * len);
}
BENCHMARK(BM_SelectiveScanForward)->Arg(196)->Arg(784)->Arg(3136)->Unit(benchmark::kMillisecond);

void BM_SelectiveScanBackward(benchmark::State& state) {
  const int64_t len = state.range(0);
  const int64_t channels = 4 * 192, n = 16;
  torch::manual_seed(0);
  auto u = torch::randn({1, channels, len}).requires_grad_(true);
  auto delta = (torch::rand({1, channels, len}) * 0.1 + 1e-3).requires_grad_(true);
  auto A = (-torch::rand({channels, n}) - 0.5).requires_grad_(true);
  auto B = torch::randn({1, 4, n, len}).requires_grad_(true);
  auto C = torch::randn({1, 4, n, len}).requires_grad_(true);
  auto D = torch::ones({channels}).requires_grad_(true);
  for (auto _ : state) {
    ssm::selective_scan(u, delta, A, B, C, D).sum().backward();
  }
  state.SetItemsProcessed(state.iterations() * channels * len);
}
BENCHMARK(BM_SelectiveScanBackward)->Arg(196)->Arg(784)->Unit(benchmark::kMillisecond);

void BM_CrossScanMerge(benchmark::State& state) {
  const int64_t side = state.range(0);
  const auto map = torch::randn({2, 192, side, side});
  for (auto _ : state) benchmark::DoNotOptimize(ssm::cross_merge(ssm::cross_scan(map)));
}
BENCHMARK(BM_CrossScanMerge)->Arg(14)->Arg(28)->Arg(56);

void BM_SurfaceDistances(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Mask a(side, side, 0), b(side, side, 0);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double dy = y - side / 2.0, dx = x - side / 2.0;
      a.data[static_cast<std::size_t>(y * side + x)] = dx * dx + dy * dy < side * side / 9.0;
      b.data[static_cast<std::size_t>(y * side + x)] = std::abs(dx - 3) + std::abs(dy) < side / 3.0;
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::surface_distances(a, b));
}
BENCHMARK(BM_SurfaceDistances)->Arg(64)->Arg(224);

void BM_NetworkForward(benchmark::State& state) {
  auto spec = state.range(0) == 0 ? nets::NetworkSpec::cnn_unet(4) : nets::NetworkSpec::mamba_unet(4);
  auto net = nets::build_network(spec, 0);
  net->eval();
  const auto x = torch::randn({1, 1, spec.input_size, spec.input_size});
  torch::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(net->forward(x).logits);
}
BENCHMARK(BM_NetworkForward)->ArgName("mamba")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
